#pragma once

#include <Eigen/Core>
#include <vector>

#include "loopdet/types.h"

namespace loopdet {

// PCA projection from raw descriptor space to a low-dimensional real-valued
// space. Immutable after fitting; project() is pure and thread-safe.
struct ProjectionModel {
  Eigen::VectorXd mean;                 // D_raw
  Eigen::MatrixXd basis;                // D_raw x d, orthonormal columns,
                                        // ordered by descending variance
  Eigen::VectorXd explained_variances;  // d, nonincreasing
  double total_variance = 0.0;
  bool whiten = false;
  Eigen::VectorXd whitening_scales;     // d, set only when whiten

  int input_dim() const { return static_cast<int>(mean.size()); }
  int output_dim() const { return static_cast<int>(basis.cols()); }

  // Fraction of the training variance captured by the retained directions.
  double explained_variance_fraction() const {
    return total_variance > 0.0 ? explained_variances.sum() / total_variance : 0.0;
  }

  // basis^T * (raw - mean), optionally rescaled per-axis when whitening.
  Eigen::VectorXd project(const Eigen::VectorXd& raw) const;
  Eigen::VectorXd project(const RawDescriptor& raw) const;
};

// Fits the model on training samples given as matrix columns. Requires
// target_dim <= rows and enough linearly independent samples; otherwise
// throws std::invalid_argument. Deterministic: eigenvector signs are fixed
// so that the largest-magnitude component of each basis column is positive,
// and equal eigenvalues keep the solver's column order.
ProjectionModel fit_projection(const Eigen::MatrixXd& training_columns,
                               int target_dim, bool whiten = false);

// Same, with bits mapped to {0.0, 1.0}. Accumulates the covariance in
// streaming form so large training sets never materialize as a dense matrix.
ProjectionModel fit_projection(const std::vector<RawDescriptor>& training,
                               int target_dim, bool whiten = false);

}  // namespace loopdet
