#pragma once

#include <string>
#include <vector>

#include "loopdet/types.h"

namespace loopdet {

struct VerificationResult {
  bool accepted = false;
  int inlier_count = 0;
  std::string method;
};

// Interface for geometric verification backends. The engine ships only the
// ratio-test stub below; pose solvers can be plugged in behind this boundary.
class VerificationGate {
 public:
  virtual ~VerificationGate() = default;
  virtual VerificationResult verify(
      const std::vector<ProjectedDescriptor>& query_descriptors,
      const std::vector<ProjectedDescriptor>& candidate_descriptors) const = 0;
};

// Descriptor-consistency stand-in for pose estimation: mutual 2-NN matching
// in projected space with a distance ratio test (a match survives when
// d1/d2 < ratio in both directions), accepted once the survivor count
// reaches min_matches. Deterministic and pure.
VerificationResult verify_stub(
    const std::vector<ProjectedDescriptor>& query_descriptors,
    const std::vector<ProjectedDescriptor>& candidate_descriptors,
    double ratio, int min_matches);

class RatioTestGate : public VerificationGate {
 public:
  RatioTestGate(double ratio, int min_matches)
      : ratio_(ratio), min_matches_(min_matches) {}

  VerificationResult verify(
      const std::vector<ProjectedDescriptor>& query_descriptors,
      const std::vector<ProjectedDescriptor>& candidate_descriptors) const override {
    return verify_stub(query_descriptors, candidate_descriptors, ratio_,
                       min_matches_);
  }

 private:
  double ratio_;
  int min_matches_;
};

}  // namespace loopdet
