#include "loopdet/projection.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace loopdet {

namespace {

// Shared tail of both fit overloads: eigen-decompose the covariance, order
// directions by descending variance, fix signs, check effective rank.
ProjectionModel finalize_model(const Eigen::VectorXd& mean,
                               const Eigen::MatrixXd& covariance,
                               int target_dim, bool whiten) {
  const int dim = static_cast<int>(mean.size());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(covariance);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("fit_projection: eigen decomposition failed");
  }

  const Eigen::VectorXd& eigenvalues = solver.eigenvalues();  // ascending
  std::vector<int> order(dim);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return eigenvalues[a] > eigenvalues[b];
  });

  const double lead = std::max(eigenvalues[order[0]], 0.0);
  const double rank_tol = std::max(lead * 1e-10, 1e-12);
  if (eigenvalues[order[target_dim - 1]] <= rank_tol) {
    throw std::invalid_argument(
        "fit_projection: training data rank below target dimension " +
        std::to_string(target_dim));
  }

  ProjectionModel model;
  model.mean = mean;
  model.basis.resize(dim, target_dim);
  model.explained_variances.resize(target_dim);
  for (int c = 0; c < target_dim; ++c) {
    Eigen::VectorXd column = solver.eigenvectors().col(order[c]);
    // Sign convention: largest-magnitude component positive.
    int arg_max = 0;
    for (int r = 1; r < dim; ++r) {
      if (std::abs(column[r]) > std::abs(column[arg_max])) {
        arg_max = r;
      }
    }
    if (column[arg_max] < 0.0) {
      column = -column;
    }
    model.basis.col(c) = column;
    model.explained_variances[c] = eigenvalues[order[c]];
  }
  model.total_variance = std::max(covariance.trace(), 0.0);
  model.whiten = whiten;
  if (whiten) {
    model.whitening_scales =
        model.explained_variances.cwiseMax(rank_tol).cwiseSqrt().cwiseInverse();
  }
  return model;
}

}  // namespace

Eigen::VectorXd ProjectionModel::project(const Eigen::VectorXd& raw) const {
  if (raw.size() != mean.size()) {
    throw std::invalid_argument("project: descriptor dimension " +
                                std::to_string(raw.size()) + " != model " +
                                std::to_string(mean.size()));
  }
  Eigen::VectorXd out = basis.transpose() * (raw - mean);
  if (whiten) {
    out = out.cwiseProduct(whitening_scales);
  }
  return out;
}

Eigen::VectorXd ProjectionModel::project(const RawDescriptor& raw) const {
  return project(raw.to_real());
}

ProjectionModel fit_projection(const Eigen::MatrixXd& training_columns,
                               int target_dim, bool whiten) {
  const int dim = static_cast<int>(training_columns.rows());
  const auto n = training_columns.cols();
  if (target_dim < 1 || target_dim > dim) {
    throw std::invalid_argument("fit_projection: target dimension out of range");
  }
  if (n < 2) {
    throw std::invalid_argument("fit_projection: need at least 2 training samples");
  }
  const Eigen::VectorXd mean = training_columns.rowwise().mean();
  const Eigen::MatrixXd centered = training_columns.colwise() - mean;
  const Eigen::MatrixXd covariance =
      (centered * centered.transpose()) / static_cast<double>(n - 1);
  return finalize_model(mean, covariance, target_dim, whiten);
}

ProjectionModel fit_projection(const std::vector<RawDescriptor>& training,
                               int target_dim, bool whiten) {
  if (training.size() < 2) {
    throw std::invalid_argument("fit_projection: need at least 2 training samples");
  }
  const int dim = training.front().size();
  if (target_dim < 1 || target_dim > dim) {
    throw std::invalid_argument("fit_projection: target dimension out of range");
  }
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  Eigen::MatrixXd second_moment = Eigen::MatrixXd::Zero(dim, dim);
  for (const RawDescriptor& raw : training) {
    if (raw.size() != dim) {
      throw std::invalid_argument("fit_projection: inconsistent descriptor size");
    }
    const Eigen::VectorXd x = raw.to_real();
    sum += x;
    second_moment.selfadjointView<Eigen::Lower>().rankUpdate(x);
  }
  const double n = static_cast<double>(training.size());
  second_moment = second_moment.selfadjointView<Eigen::Lower>();
  const Eigen::VectorXd mean = sum / n;
  const Eigen::MatrixXd covariance =
      (second_moment - n * mean * mean.transpose()) / (n - 1.0);
  return finalize_model(mean, covariance, target_dim, whiten);
}

}  // namespace loopdet
