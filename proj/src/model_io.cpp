#include "loopdet/model_io.h"

#include <cstring>
#include <fstream>

#include "binary_io.h"

namespace loopdet {

namespace {

constexpr char kProjectionMagic[4] = {'V', 'P', 'R', 'P'};
constexpr char kIndexMagic[4] = {'V', 'P', 'R', 'I'};

void write_matrix_row_major(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      io::write_f64(out, m(r, c));
    }
  }
}

Eigen::MatrixXd read_matrix_row_major(std::istream& in, Eigen::Index rows,
                                      Eigen::Index cols, const char* what) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = io::read_f64(in, what);
    }
  }
  return m;
}

}  // namespace

void save_model(const CalibratedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  const ProjectionModel& proj = model.projection;

  io::write_bytes(out, kProjectionMagic, 4);
  io::write_u32(out, proj.whiten ? 2u : 1u);
  io::write_u32(out, static_cast<std::uint32_t>(proj.input_dim()));
  io::write_u32(out, static_cast<std::uint32_t>(proj.output_dim()));
  for (Eigen::Index i = 0; i < proj.mean.size(); ++i) {
    io::write_f64(out, proj.mean[i]);
  }
  write_matrix_row_major(out, proj.basis);
  if (proj.whiten) {
    for (Eigen::Index i = 0; i < proj.whitening_scales.size(); ++i) {
      io::write_f64(out, proj.whitening_scales[i]);
    }
  }

  if (model.codebooks) {
    const IndexCodebooks& cb = *model.codebooks;
    io::write_bytes(out, kIndexMagic, 4);
    io::write_u32(out, static_cast<std::uint32_t>(cb.first.cols()));
    io::write_u32(out, static_cast<std::uint32_t>(cb.first.rows()));
    io::write_u32(out, static_cast<std::uint32_t>(cb.second.rows()));
    io::write_f64(out, model.theta.value_or(
                           std::numeric_limits<double>::infinity()));
    // K x dim layout: one row per codeword.
    write_matrix_row_major(out, cb.first.transpose());
    write_matrix_row_major(out, cb.second.transpose());
  }
}

CalibratedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open " + path.string());
  }
  CalibratedModel model;

  char magic[4];
  io::read_bytes(in, magic, 4, "projection magic");
  if (std::memcmp(magic, kProjectionMagic, 4) != 0) {
    throw DataError(path.string() + ": bad projection magic");
  }
  const std::uint32_t version = io::read_u32(in, "projection version");
  if (version != 1 && version != 2) {
    throw DataError(path.string() + ": unsupported projection version " +
                    std::to_string(version));
  }
  const auto d_raw = static_cast<Eigen::Index>(io::read_u32(in, "raw dimension"));
  const auto d = static_cast<Eigen::Index>(io::read_u32(in, "target dimension"));
  if (d_raw < 1 || d < 1 || d > d_raw) {
    throw DataError(path.string() + ": invalid dimensions in header");
  }
  ProjectionModel& proj = model.projection;
  proj.mean.resize(d_raw);
  for (Eigen::Index i = 0; i < d_raw; ++i) {
    proj.mean[i] = io::read_f64(in, "mean");
  }
  proj.basis = read_matrix_row_major(in, d_raw, d, "basis");
  if (version == 2) {
    proj.whiten = true;
    proj.whitening_scales.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      proj.whitening_scales[i] = io::read_f64(in, "whitening scales");
    }
  }

  if (in.peek() == EOF) {
    return model;
  }
  io::read_bytes(in, magic, 4, "index magic");
  if (std::memcmp(magic, kIndexMagic, 4) != 0) {
    throw DataError(path.string() + ": bad index section magic");
  }
  const auto k = static_cast<Eigen::Index>(io::read_u32(in, "codebook size"));
  const auto dim1 = static_cast<Eigen::Index>(io::read_u32(in, "first half dim"));
  const auto dim2 = static_cast<Eigen::Index>(io::read_u32(in, "second half dim"));
  if (k < 1 || dim1 < 1 || dim2 < 1 || dim1 + dim2 != d) {
    throw DataError(path.string() + ": invalid codebook header");
  }
  model.theta = io::read_f64(in, "theta");
  IndexCodebooks cb;
  cb.first = read_matrix_row_major(in, k, dim1, "first codebook").transpose();
  cb.second = read_matrix_row_major(in, k, dim2, "second codebook").transpose();
  model.codebooks = std::move(cb);
  return model;
}

}  // namespace loopdet
