#pragma once

#include <filesystem>
#include <optional>

#include "loopdet/multi_index.h"
#include "loopdet/projection.h"

namespace loopdet {

// Trained index codebooks (columns are codewords).
struct IndexCodebooks {
  Eigen::MatrixXd first;
  Eigen::MatrixXd second;
};

// Calibration artifacts persisted as one flat binary file:
//   "VPRP" section: version u32, D_raw u32, d u32, mean (D_raw f64),
//                   basis (D_raw x d f64, row-major). Version 2 appends
//                   d whitening scales.
//   "VPRI" section (optional): K u32, dim1 u32, dim2 u32, theta f64,
//                   first codebook (K x dim1 f64, row-major), second
//                   codebook (K x dim2 f64, row-major).
// All scalars little-endian.
struct CalibratedModel {
  ProjectionModel projection;
  std::optional<IndexCodebooks> codebooks;
  std::optional<double> theta;
};

void save_model(const CalibratedModel& model, const std::filesystem::path& path);
CalibratedModel load_model(const std::filesystem::path& path);

}  // namespace loopdet
