#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "rbc/episode_io.hpp"
#include "rbc/errors.hpp"
#include "rbc/lran.hpp"

namespace rbc {

// LRAN checkpoint, little-endian:
//   magic "LRAN", version u32 = 1, latent_dim u32, ny u32, nx u32,
//   input_mean f64, input_std f64,
// then the parameter tensors in the canonical order of
// LranModel::param_views(), each as rank u32, dims u32..., then binary64
// values in Eigen (column-major) storage order. Matrices store (rows, cols),
// vectors a single dim.

namespace detail {

inline void put_tensor(std::ostream& os, const Matrix& m) {
  put_u32(os, 2);
  put_u32(os, static_cast<std::uint32_t>(m.rows()));
  put_u32(os, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) put_f64(os, m.data()[i]);
}

inline void put_tensor(std::ostream& os, const Vector& v) {
  put_u32(os, 1);
  put_u32(os, static_cast<std::uint32_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) put_f64(os, v.data()[i]);
}

struct RawTensor {
  std::vector<std::uint32_t> dims;
  std::vector<double> values;
  Eigen::Index rows() const { return dims.empty() ? 0 : dims[0]; }
  Eigen::Index cols() const { return dims.size() > 1 ? dims[1] : 1; }
};

inline RawTensor get_tensor(std::istream& is, const std::string& where) {
  std::uint32_t rank;
  if (!get_u32(is, rank)) throw FormatError("load_model: truncated tensor header in " + where);
  if (rank < 1 || rank > 2)
    throw FormatError("load_model: unsupported tensor rank " + std::to_string(rank));
  RawTensor t;
  std::uint64_t total = 1;
  for (std::uint32_t d = 0; d < rank; ++d) {
    std::uint32_t dim;
    if (!get_u32(is, dim)) throw FormatError("load_model: truncated tensor dims in " + where);
    if (dim == 0 || dim > (1u << 28)) throw FormatError("load_model: implausible tensor dim");
    t.dims.push_back(dim);
    total *= dim;
  }
  t.values.resize(total);
  for (std::uint64_t i = 0; i < total; ++i)
    if (!get_f64(is, t.values[i]))
      throw FormatError("load_model: truncated tensor data in " + where);
  return t;
}

inline void assign_tensor(Matrix& m, const RawTensor& t, const char* name) {
  if (t.dims.size() != 2 || t.rows() != m.rows() || t.cols() != m.cols())
    throw FormatError(std::string("load_model: tensor shape mismatch for ") + name);
  std::memcpy(m.data(), t.values.data(), sizeof(double) * t.values.size());
}

inline void assign_tensor(Vector& v, const RawTensor& t, const char* name) {
  if (t.dims.size() != 1 || t.rows() != v.size())
    throw FormatError(std::string("load_model: tensor shape mismatch for ") + name);
  std::memcpy(v.data(), t.values.data(), sizeof(double) * t.values.size());
}

}  // namespace detail

inline void save_model(const LranModel& model, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("save_model: cannot open " + path.string());
  os.write("LRAN", 4);
  detail::put_u32(os, 1u);
  detail::put_u32(os, static_cast<std::uint32_t>(model.latent_dim));
  detail::put_u32(os, static_cast<std::uint32_t>(model.grid.ny));
  detail::put_u32(os, static_cast<std::uint32_t>(model.grid.nx));
  detail::put_f64(os, model.input_mean);
  detail::put_f64(os, model.input_std);
  for (const ConvLayer& l : model.enc_conv) {
    detail::put_tensor(os, l.w);
    detail::put_tensor(os, l.b);
  }
  detail::put_tensor(os, model.enc_dense.w);
  detail::put_tensor(os, model.enc_dense.b);
  detail::put_tensor(os, model.dec_dense.w);
  detail::put_tensor(os, model.dec_dense.b);
  for (const ConvLayer& l : model.dec_deconv) {
    detail::put_tensor(os, l.w);
    detail::put_tensor(os, l.b);
  }
  detail::put_tensor(os, model.k_matrix);
  if (!os) throw IoError("save_model: write failed for " + path.string());
}

inline LranModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("load_model: cannot open " + path.string());
  char magic[4];
  if (!detail::get_bytes(is, reinterpret_cast<unsigned char*>(magic), 4))
    throw FormatError("load_model: truncated header in " + path.string());
  if (std::memcmp(magic, "LRAN", 4) != 0)
    throw FormatError("load_model: bad magic in " + path.string());
  std::uint32_t version, latent, ny, nx;
  double mean, std_dev;
  if (!detail::get_u32(is, version) || !detail::get_u32(is, latent) ||
      !detail::get_u32(is, ny) || !detail::get_u32(is, nx) ||
      !detail::get_f64(is, mean) || !detail::get_f64(is, std_dev))
    throw FormatError("load_model: truncated header in " + path.string());
  if (version != 1)
    throw FormatError("load_model: unsupported version " + std::to_string(version));

  const std::string where = path.string();
  std::vector<detail::RawTensor> tensors;
  tensors.reserve(21);
  for (int i = 0; i < 21; ++i) tensors.push_back(detail::get_tensor(is, where));
  is.peek();
  if (!is.eof()) throw FormatError("load_model: trailing bytes in " + where);

  // channel widths are implied by the stored conv weight shapes
  std::array<int, 4> channels{};
  for (int l = 0; l < 4; ++l) {
    channels[l] = static_cast<int>(tensors[2 * l].rows());
    if (channels[l] < 1) throw FormatError("load_model: bad conv tensor in " + where);
  }

  LranModel model = make_lran_model(Grid(static_cast<int>(nx), static_cast<int>(ny)),
                                    static_cast<int>(latent), channels,
                                    std::uint64_t{0});
  model.input_mean = mean;
  model.input_std = std_dev;
  int idx = 0;
  for (ConvLayer& l : model.enc_conv) {
    detail::assign_tensor(l.w, tensors[idx++], "enc conv w");
    detail::assign_tensor(l.b, tensors[idx++], "enc conv b");
  }
  detail::assign_tensor(model.enc_dense.w, tensors[idx++], "enc dense w");
  detail::assign_tensor(model.enc_dense.b, tensors[idx++], "enc dense b");
  detail::assign_tensor(model.dec_dense.w, tensors[idx++], "dec dense w");
  detail::assign_tensor(model.dec_dense.b, tensors[idx++], "dec dense b");
  for (ConvLayer& l : model.dec_deconv) {
    detail::assign_tensor(l.w, tensors[idx++], "deconv w");
    detail::assign_tensor(l.b, tensors[idx++], "deconv b");
  }
  detail::assign_tensor(model.k_matrix, tensors[idx++], "k matrix");
  return model;
}

/// Per-epoch loss log as CSV: epoch, train_loss, val_loss.
inline void write_training_log(const std::vector<EpochStats>& log,
                               const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("write_training_log: cannot open " + path.string());
  os << "epoch,train_loss,val_loss\n";
  char buf[96];
  for (const EpochStats& e : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g\n", e.epoch, e.train_loss, e.val_loss);
    os << buf;
  }
  if (!os) throw IoError("write_training_log: write failed for " + path.string());
}

}  // namespace rbc
