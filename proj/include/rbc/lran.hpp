#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "rbc/conv.hpp"
#include "rbc/dataset.hpp"
#include "rbc/errors.hpp"
#include "rbc/grid.hpp"

namespace rbc {

/// Training hyperparameters of the Linear Recurrent Autoencoder Network.
/// channels are the encoder conv widths (the decoder mirrors them) and may
/// be reduced for smaller grids; train_end bounds the training snapshots.
struct LranConfig {
  int latent_dim = 64;
  int sequence_length = 10;  // T
  double delta = 1.0;        // decay of importance over the sequence
  double beta = 0.0;         // hidden-loss weight
  double eps1 = 1e-6;
  double eps2 = 1e-6;
  double learning_rate = 1e-4;
  int batch_size = 32;
  int max_epochs = 50;
  int patience = 5;
  std::uint64_t seed = 0;
  int train_end = 470;
  std::array<int, 4> channels{32, 64, 32, 32};

  void validate() const {
    if (latent_dim < 1) throw std::invalid_argument("LranConfig: latent_dim < 1");
    if (sequence_length < 1) throw std::invalid_argument("LranConfig: sequence_length < 1");
    if (!(delta > 0.0) || delta > 1.0) throw std::invalid_argument("LranConfig: delta not in (0, 1]");
    if (beta < 0.0) throw std::invalid_argument("LranConfig: beta < 0");
    if (!(eps1 > 0.0) || !(eps2 > 0.0)) throw std::invalid_argument("LranConfig: eps must be positive");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("LranConfig: learning_rate <= 0");
    if (batch_size < 1 || max_epochs < 1 || patience < 1)
      throw std::invalid_argument("LranConfig: batch_size/max_epochs/patience < 1");
    for (int c : channels)
      if (c < 1) throw std::invalid_argument("LranConfig: channel width < 1");
  }
};

struct ConvLayer {
  ConvGeom geom;
  Matrix w;  // (geom.out_ch, geom.in_ch * 25)
  Vector b;  // conv: out_ch; deconv: the transposed output channels
};

struct DenseLayer {
  Matrix w;
  Vector b;
};

struct ParamView {
  double* data;
  Eigen::Index size;
};

/// Encoder (5 layers), latent operator K, decoder (5 layers) and the scalar
/// input normalization. Encoder: four 5x5 convs with strides 2,1,2,1 and
/// GELU, then a dense map to the latent space. Decoder mirrors it with
/// transposed convolutions; no activation after the final layer.
struct LranModel {
  Grid grid;
  int latent_dim = 0;
  std::array<int, 4> channels{};
  double input_mean = 0.0;
  double input_std = 1.0;

  std::array<ConvLayer, 4> enc_conv;
  DenseLayer enc_dense;
  DenseLayer dec_dense;
  std::array<ConvLayer, 4> dec_deconv;  // geometry of the mirrored convs
  Matrix k_matrix;                      // latent_dim x latent_dim

  int flat_size() const { return channels[3] * (grid.ny / 4) * (grid.nx / 4); }

  /// Canonical parameter order (also the checkpoint tensor order):
  /// enc conv 1..4 (w, b), enc dense (w, b), dec dense (w, b),
  /// deconv 1..4 (w, b), K.
  std::vector<ParamView> param_views() {
    std::vector<ParamView> v;
    auto add = [&v](Matrix& m) { v.push_back({m.data(), m.size()}); };
    auto addv = [&v](Vector& x) { v.push_back({x.data(), x.size()}); };
    for (ConvLayer& l : enc_conv) {
      add(l.w);
      addv(l.b);
    }
    add(enc_dense.w);
    addv(enc_dense.b);
    add(dec_dense.w);
    addv(dec_dense.b);
    for (ConvLayer& l : dec_deconv) {
      add(l.w);
      addv(l.b);
    }
    add(k_matrix);
    return v;
  }

  Eigen::Index param_count() {
    Eigen::Index n = 0;
    for (const ParamView& p : param_views()) n += p.size;
    return n;
  }
};

namespace detail {

inline double uniform_pm(std::mt19937_64& eng, double limit) {
  const double u = static_cast<double>(eng() >> 11) * 0x1.0p-53;
  return limit * (2.0 * u - 1.0);
}

inline void fill_uniform(Matrix& m, std::mt19937_64& eng, double limit) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform_pm(eng, limit);
}

}  // namespace detail

/// Fresh model with fan-in-scaled uniform weights, zero biases and K = I.
/// The grid must be divisible by 4 in both directions (two stride-2 layers).
inline LranModel make_lran_model(const Grid& grid, int latent_dim,
                                 const std::array<int, 4>& channels,
                                 std::mt19937_64& eng) {
  if (grid.ny % 4 != 0 || grid.nx % 4 != 0)
    throw ShapeMismatch("make_lran_model: grid dims must be divisible by 4");
  if (latent_dim < 1) throw std::invalid_argument("make_lran_model: latent_dim < 1");

  LranModel m;
  m.grid = grid;
  m.latent_dim = latent_dim;
  m.channels = channels;
  const int h = grid.ny, w = grid.nx;
  const auto& c = channels;

  m.enc_conv[0].geom = {1, c[0], h, w, 2};
  m.enc_conv[1].geom = {c[0], c[1], h / 2, w / 2, 1};
  m.enc_conv[2].geom = {c[1], c[2], h / 2, w / 2, 2};
  m.enc_conv[3].geom = {c[2], c[3], h / 4, w / 4, 1};
  m.dec_deconv[0].geom = {c[2], c[3], h / 4, w / 4, 1};
  m.dec_deconv[1].geom = {c[1], c[2], h / 2, w / 2, 2};
  m.dec_deconv[2].geom = {c[0], c[1], h / 2, w / 2, 1};
  m.dec_deconv[3].geom = {1, c[0], h, w, 2};

  const int kk = ConvGeom::k * ConvGeom::k;
  for (ConvLayer& l : m.enc_conv) {
    l.w.resize(l.geom.out_ch, l.geom.in_ch * kk);
    detail::fill_uniform(l.w, eng, std::sqrt(1.0 / (l.geom.in_ch * kk)));
    l.b = Vector::Zero(l.geom.out_ch);
  }
  const int flat = m.flat_size();
  m.enc_dense.w.resize(latent_dim, flat);
  detail::fill_uniform(m.enc_dense.w, eng, std::sqrt(1.0 / flat));
  m.enc_dense.b = Vector::Zero(latent_dim);
  m.dec_dense.w.resize(flat, latent_dim);
  detail::fill_uniform(m.dec_dense.w, eng, std::sqrt(1.0 / latent_dim));
  m.dec_dense.b = Vector::Zero(flat);
  for (ConvLayer& l : m.dec_deconv) {
    l.w.resize(l.geom.out_ch, l.geom.in_ch * kk);
    // the deconv consumes geom.out_ch channels per output point
    detail::fill_uniform(l.w, eng, std::sqrt(1.0 / (l.geom.out_ch * kk)));
    l.b = Vector::Zero(l.geom.in_ch);
  }
  m.k_matrix = Matrix::Identity(latent_dim, latent_dim);
  return m;
}

inline LranModel make_lran_model(const Grid& grid, int latent_dim,
                                 const std::array<int, 4>& channels,
                                 std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  return make_lran_model(grid, latent_dim, channels, eng);
}

/// Zero-valued tensor clone, used as a gradient accumulator.
inline LranModel zeros_like(const LranModel& m) {
  LranModel z = m;
  for (const ParamView& p : z.param_views())
    for (Eigen::Index i = 0; i < p.size; ++i) p.data[i] = 0.0;
  return z;
}

// -------- forward / backward --------

struct EncCache {
  Matrix input;  // (1, h*w), normalized units
  std::array<Matrix, 4> pre, post;
  Vector latent;
};

struct DecCache {
  Vector latent;
  Vector dense_pre, dense_post;
  std::array<Matrix, 4> pre, post;  // post[3] is the output (no activation)
};

namespace detail {

inline Vector encode_forward(const LranModel& m, const Matrix& input_norm,
                             EncCache* cache) {
  Matrix cur = input_norm;
  if (cache) cache->input = input_norm;
  for (int l = 0; l < 4; ++l) {
    const ConvLayer& layer = m.enc_conv[l];
    Matrix pre = conv_forward(layer.geom, layer.w, cur);
    pre.colwise() += layer.b;
    Matrix post = gelu(pre);
    if (cache) {
      cache->pre[l] = pre;
      cache->post[l] = post;
    }
    cur = std::move(post);
  }
  const Eigen::Map<const Vector> flat(cur.data(), cur.size());
  Vector latent = m.enc_dense.w * flat + m.enc_dense.b;
  if (cache) cache->latent = latent;
  return latent;
}

inline Matrix decode_forward(const LranModel& m, const Vector& g, DecCache* cache) {
  Vector dense_pre = m.dec_dense.w * g + m.dec_dense.b;
  Vector dense_post = gelu(dense_pre);
  if (cache) {
    cache->latent = g;
    cache->dense_pre = dense_pre;
    cache->dense_post = dense_post;
  }
  const int h4 = m.grid.ny / 4, w4 = m.grid.nx / 4;
  Matrix cur = Eigen::Map<const Matrix>(dense_post.data(), m.channels[3], h4 * w4);
  for (int l = 0; l < 4; ++l) {
    const ConvLayer& layer = m.dec_deconv[l];
    Matrix pre = conv_grad_input(layer.geom, layer.w, cur);
    pre.colwise() += layer.b;
    Matrix post = (l < 3) ? gelu(pre) : pre;
    if (cache) {
      cache->pre[l] = pre;
      cache->post[l] = post;
    }
    cur = std::move(post);
  }
  return cur;  // (1, h*w), normalized units
}

inline void encode_backward(const LranModel& m, const EncCache& c,
                            const Vector& dlatent, LranModel& grads) {
  grads.enc_dense.b += dlatent;
  const Eigen::Map<const Vector> flat(c.post[3].data(), c.post[3].size());
  grads.enc_dense.w += dlatent * flat.transpose();
  Vector dflat = m.enc_dense.w.transpose() * dlatent;
  Matrix dcur = Eigen::Map<const Matrix>(dflat.data(), c.post[3].rows(), c.post[3].cols());
  for (int l = 3; l >= 0; --l) {
    const ConvLayer& layer = m.enc_conv[l];
    const Matrix dpre = dcur.array() * gelu_derivative(c.pre[l]).array();
    grads.enc_conv[l].b += dpre.rowwise().sum();
    const Matrix& input = (l == 0) ? c.input : c.post[l - 1];
    grads.enc_conv[l].w += conv_grad_weight(layer.geom, input, dpre);
    if (l > 0) dcur = conv_grad_input(layer.geom, layer.w, dpre);
  }
}

inline Vector decode_backward(const LranModel& m, const DecCache& c,
                              const Matrix& dout, LranModel& grads) {
  Matrix dcur = dout;
  Matrix dense_feature;
  for (int l = 3; l >= 0; --l) {
    const ConvLayer& layer = m.dec_deconv[l];
    const Matrix dpre =
        (l < 3) ? Matrix(dcur.array() * gelu_derivative(c.pre[l]).array()) : dcur;
    grads.dec_deconv[l].b += dpre.rowwise().sum();
    if (l == 0)
      dense_feature = Eigen::Map<const Matrix>(c.dense_post.data(),
                                               m.channels[3], c.pre[0].cols());
    const Matrix& input = (l == 0) ? dense_feature : c.post[l - 1];
    grads.dec_deconv[l].w += conv_grad_weight(layer.geom, dpre, input);
    dcur = conv_forward(layer.geom, layer.w, dpre);
  }
  const Eigen::Map<const Vector> dflat(dcur.data(), dcur.size());
  const Vector ddense_pre = dflat.array() * gelu_derivative(c.dense_pre).array();
  grads.dec_dense.b += ddense_pre;
  grads.dec_dense.w += ddense_pre * c.latent.transpose();
  return m.dec_dense.w.transpose() * ddense_pre;
}

/// Composite sequence loss; accumulates parameter gradients when grads is
/// non-null. frames are normalized (1, h*w) rows.
inline double sequence_loss_core(const LranModel& m,
                                 const Matrix* const* frames, int t_len,
                                 const LranConfig& cfg, LranModel* grads) {
  if (t_len < 1) throw BadSequence("sequence_loss: empty sequence");
  const bool with_grad = grads != nullptr;

  std::vector<EncCache> enc(t_len);
  std::vector<DecCache> dec(with_grad ? t_len : 0);

  // frame encodings: index 0 seeds the rollout, the rest are hidden-loss
  // targets and only exist when the hidden term is active
  std::vector<Vector> g(t_len);
  for (int t = 0; t < t_len; ++t) {
    if (t > 0 && cfg.beta == 0.0) break;
    const bool need_cache = with_grad && (t == 0 || cfg.beta != 0.0);
    g[t] = encode_forward(m, *frames[t], need_cache ? &enc[t] : nullptr);
  }

  // latent rollout ghat_t = K^t g_0 and decodes
  std::vector<Vector> ghat(t_len);
  ghat[0] = g[0];
  for (int t = 1; t < t_len; ++t) ghat[t] = m.k_matrix * ghat[t - 1];

  double n1 = 0.0, n2 = 0.0;
  {
    double d = 1.0;
    for (int t = 0; t < t_len; ++t, d *= cfg.delta) n1 += d;
    d = 1.0;
    for (int t = 1; t < t_len; ++t, d *= cfg.delta) n2 += d;
  }

  double loss = 0.0;
  std::vector<Matrix> residual(t_len);
  std::vector<double> denom1(t_len), weight1(t_len);
  {
    double d = 1.0;
    for (int t = 0; t < t_len; ++t, d *= cfg.delta) {
      Matrix qhat = decode_forward(m, ghat[t], with_grad ? &dec[t] : nullptr);
      residual[t] = qhat - *frames[t];
      denom1[t] = frames[t]->squaredNorm() + cfg.eps1;
      weight1[t] = d / n1;
      loss += weight1[t] * residual[t].squaredNorm() / denom1[t];
    }
  }
  std::vector<Vector> hidden(t_len);
  std::vector<double> denom2(t_len), weight2(t_len);
  if (cfg.beta != 0.0 && t_len >= 2) {
    double d = 1.0;
    for (int t = 1; t < t_len; ++t, d *= cfg.delta) {
      hidden[t] = ghat[t] - g[t];
      denom2[t] = g[t].squaredNorm() + cfg.eps2;
      weight2[t] = d / n2;
      loss += cfg.beta * weight2[t] * hidden[t].squaredNorm() / denom2[t];
    }
  }
  if (!with_grad) return loss;

  std::vector<Vector> dghat(t_len, Vector::Zero(m.latent_dim));
  for (int t = 0; t < t_len; ++t) {
    const Matrix dout = (2.0 * weight1[t] / denom1[t]) * residual[t];
    dghat[t] += decode_backward(m, dec[t], dout, *grads);
  }
  if (cfg.beta != 0.0 && t_len >= 2) {
    for (int t = 1; t < t_len; ++t) {
      const double c2 = 2.0 * cfg.beta * weight2[t] / denom2[t];
      dghat[t] += c2 * hidden[t];
      // the target encoding also feeds the denominator ||g_t||^2 + eps2
      const Vector dtarget = (-c2) * hidden[t] -
                             (c2 * hidden[t].squaredNorm() / denom2[t]) * g[t];
      encode_backward(m, enc[t], dtarget, *grads);
    }
  }
  Vector carry = Vector::Zero(m.latent_dim);
  for (int t = t_len - 1; t >= 1; --t) {
    const Vector total = dghat[t] + carry;
    grads->k_matrix += total * ghat[t - 1].transpose();
    carry = m.k_matrix.transpose() * total;
  }
  encode_backward(m, enc[0], Vector(dghat[0] + carry), *grads);
  return loss;
}

inline Matrix normalize_frame(const LranModel& m, const ScalarField& q) {
  if (!(q.grid == m.grid)) throw ShapeMismatch("lran: field grid does not match model");
  Matrix row(1, q.grid.ny * q.grid.nx);
  for (int j = 0; j < q.grid.ny; ++j)
    for (int i = 0; i < q.grid.nx; ++i)
      row(0, j * q.grid.nx + i) = (q.values(j, i) - m.input_mean) / m.input_std;
  return row;
}

inline ScalarField denormalize_frame(const LranModel& m, const Matrix& row) {
  ScalarField f(m.grid);
  for (int j = 0; j < m.grid.ny; ++j)
    for (int i = 0; i < m.grid.nx; ++i)
      f.values(j, i) = row(0, j * m.grid.nx + i) * m.input_std + m.input_mean;
  return f;
}

}  // namespace detail

/// Latent observables of one snapshot.
inline Vector encode(const LranModel& model, const ScalarField& q) {
  return detail::encode_forward(model, detail::normalize_frame(model, q), nullptr);
}

/// Field reconstruction from latent observables, in physical units.
inline ScalarField decode(const LranModel& model, const Vector& g) {
  if (g.size() != model.latent_dim)
    throw ShapeMismatch("decode: latent vector length does not match model");
  return detail::denormalize_frame(model,
                                   detail::decode_forward(model, g, nullptr));
}

/// Composite loss of one snapshot sequence (normalized units, as trained).
inline double sequence_loss(const LranModel& model,
                            const std::vector<ScalarField>& sequence,
                            const LranConfig& config) {
  if (static_cast<int>(sequence.size()) != config.sequence_length)
    throw BadSequence("sequence_loss: sequence length != config.sequence_length");
  std::vector<Matrix> frames(sequence.size());
  std::vector<const Matrix*> ptrs(sequence.size());
  for (size_t i = 0; i < sequence.size(); ++i) {
    frames[i] = detail::normalize_frame(model, sequence[i]);
    ptrs[i] = &frames[i];
  }
  return detail::sequence_loss_core(model, ptrs.data(),
                                    static_cast<int>(sequence.size()), config,
                                    nullptr);
}

/// Multi-step prediction: decode(K^n encode(entry)) for n = 1..horizon.
inline std::vector<ScalarField> rollout(const LranModel& model,
                                        const ScalarField& entry, int horizon) {
  if (horizon < 0) throw std::invalid_argument("rollout: negative horizon");
  Vector g = encode(model, entry);
  std::vector<ScalarField> out;
  out.reserve(horizon);
  for (int n = 1; n <= horizon; ++n) {
    g = model.k_matrix * g;
    out.push_back(decode(model, g));
  }
  return out;
}

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainedLran {
  LranModel model;
  std::vector<EpochStats> log;
};

namespace detail {

class Adam {
 public:
  Adam(Eigen::Index n, double lr) : lr_(lr), m_(Vector::Zero(n)), v_(Vector::Zero(n)) {}

  void update(const std::vector<ParamView>& params,
              const std::vector<ParamView>& grads, double grad_scale) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    Eigen::Index off = 0;
    for (size_t i = 0; i < params.size(); ++i) {
      for (Eigen::Index j = 0; j < params[i].size; ++j, ++off) {
        const double g = grads[i].data[j] * grad_scale;
        m_(off) = beta1_ * m_(off) + (1.0 - beta1_) * g;
        v_(off) = beta2_ * v_(off) + (1.0 - beta2_) * g * g;
        params[i].data[j] -= lr_ * (m_(off) / c1) / (std::sqrt(v_(off) / c2) + eps_);
      }
    }
  }

 private:
  static constexpr double beta1_ = 0.9;
  static constexpr double beta2_ = 0.999;
  static constexpr double eps_ = 1e-8;
  double lr_;
  long t_ = 0;
  Vector m_, v_;
};

}  // namespace detail

/// ADAM training on overlapping sequences of one episode with seeded 80/20
/// train/validation split, per-epoch reshuffling, and early stopping when
/// the validation loss fails to improve by 1e-6 for `patience` consecutive
/// epochs. Returns the parameters with the best validation loss and the
/// per-epoch loss log.
inline TrainedLran train(const Episode& episode, const LranConfig& config) {
  config.validate();
  const SequenceSet seqs = make_sequences(episode, config.sequence_length,
                                          config.seed, config.train_end);
  const Grid grid = episode.grid();

  std::mt19937_64 eng(config.seed);
  LranModel model = make_lran_model(grid, config.latent_dim, config.channels, eng);

  // scalar normalization statistics over the frames of the training windows
  std::vector<bool> in_train(config.train_end, false);
  for (int k = 0; k < seqs.count(); ++k)
    if (seqs.is_train[k])
      for (int t = 0; t < seqs.length; ++t) in_train[seqs.starts[k] + t] = true;
  double sum = 0.0, sum2 = 0.0;
  long count = 0;
  for (int i = 0; i < config.train_end; ++i) {
    if (!in_train[i]) continue;
    const Matrix& v = episode.snapshots[i].values;
    sum += v.sum();
    sum2 += v.squaredNorm();
    count += v.size();
  }
  if (count == 0) throw BadLength("train: no training frames");
  model.input_mean = sum / count;
  const double var = std::max(sum2 / count - model.input_mean * model.input_mean, 0.0);
  model.input_std = var > 0.0 ? std::sqrt(var) : 1.0;

  std::vector<Matrix> frames(config.train_end);
  for (int i = 0; i < config.train_end; ++i)
    frames[i] = detail::normalize_frame(model, episode.snapshots[i]);

  std::vector<int> train_ids = seqs.train_indices();
  const std::vector<int> val_ids = seqs.validation_indices();

  std::vector<ParamView> params = model.param_views();
  LranModel grads = zeros_like(model);
  std::vector<ParamView> gviews = grads.param_views();
  detail::Adam adam(model.param_count(), config.learning_rate);

  std::vector<const Matrix*> seq_ptr(config.sequence_length);
  auto eval_sequence = [&](int id, LranModel* g) {
    for (int t = 0; t < config.sequence_length; ++t)
      seq_ptr[t] = &frames[seqs.starts[id] + t];
    return detail::sequence_loss_core(model, seq_ptr.data(),
                                      config.sequence_length, config, g);
  };

  TrainedLran result;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<double> best_params(static_cast<size_t>(model.param_count()));
  int stall = 0;
  constexpr double min_improvement = 1e-6;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    for (int i = static_cast<int>(train_ids.size()) - 1; i > 0; --i) {
      const int j = static_cast<int>(eng() % static_cast<std::uint64_t>(i + 1));
      std::swap(train_ids[i], train_ids[j]);
    }
    double train_sum = 0.0;
    for (size_t pos = 0; pos < train_ids.size(); pos += config.batch_size) {
      const int bn = static_cast<int>(
          std::min<size_t>(config.batch_size, train_ids.size() - pos));
      for (const ParamView& g : gviews)
        for (Eigen::Index j = 0; j < g.size; ++j) g.data[j] = 0.0;
      for (int b = 0; b < bn; ++b) {
        const double l = eval_sequence(train_ids[pos + b], &grads);
        if (!std::isfinite(l))
          throw NonFiniteLoss("train: non-finite loss at epoch " +
                              std::to_string(epoch) + ", sequence start " +
                              std::to_string(seqs.starts[train_ids[pos + b]]));
        train_sum += l;
      }
      adam.update(params, gviews, 1.0 / bn);
    }
    const double train_loss = train_sum / static_cast<double>(train_ids.size());

    double val_loss = train_loss;  // fallback when the split has no validation windows
    if (!val_ids.empty()) {
      double s = 0.0;
      for (int id : val_ids) s += eval_sequence(id, nullptr);
      val_loss = s / static_cast<double>(val_ids.size());
    }
    if (!std::isfinite(val_loss))
      throw NonFiniteLoss("train: non-finite validation loss at epoch " +
                          std::to_string(epoch));
    result.log.push_back({epoch, train_loss, val_loss});

    if (best_val - val_loss >= min_improvement) {
      best_val = val_loss;
      Eigen::Index off = 0;
      for (const ParamView& p : params)
        for (Eigen::Index j = 0; j < p.size; ++j) best_params[off++] = p.data[j];
      stall = 0;
    } else if (++stall >= config.patience) {
      break;
    }
  }

  Eigen::Index off = 0;
  for (const ParamView& p : params)
    for (Eigen::Index j = 0; j < p.size; ++j) p.data[j] = best_params[off++];
  result.model = std::move(model);
  return result;
}

}  // namespace rbc
