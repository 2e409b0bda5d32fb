#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "rbc/errors.hpp"
#include "rbc/grid.hpp"

namespace rbc {

/// Ordered sequence of recorded convective-flux snapshots from one DNS run;
/// the unit of persistence.
struct Episode {
  double ra = 0.0;
  double pr = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> times;
  std::vector<ScalarField> snapshots;

  int snapshot_count() const { return static_cast<int>(snapshots.size()); }
  const Grid& grid() const { return snapshots.at(0).grid; }
};

/// Local convective heat flux q = u_y * theta with theta = T - <T>_{x,y}
/// (instantaneous spatial mean).
inline ScalarField convective_field(const ScalarField& temperature,
                                    const ScalarField& u_y) {
  if (!(temperature.grid == u_y.grid))
    throw ShapeMismatch("convective_field: temperature and u_y grids differ");
  const double mean_t = temperature.mean();
  Matrix q = u_y.values.array() * (temperature.values.array() - mean_t);
  return ScalarField(temperature.grid, std::move(q));
}

/// Nusselt number from the spatially averaged convective flux:
/// Nu = <q> / (kappa (T_b - T_t) / H) with kappa = 1/sqrt(Ra Pr).
inline double nusselt(const ScalarField& q_field, double ra, double pr,
                      double t_bottom = 2.0, double t_top = 1.0, double h = 1.0) {
  if (t_bottom == t_top)
    throw DegenerateGradient("nusselt: t_bottom equals t_top");
  if (!(h > 0.0)) throw std::invalid_argument("nusselt: h must be positive");
  return q_field.mean() * h * std::sqrt(ra * pr) / (t_bottom - t_top);
}

/// Normalized sum of squared errors ||q - q_hat||^2 / ||q||^2 (Frobenius).
inline double nsse(const ScalarField& truth, const ScalarField& prediction) {
  if (!(truth.grid == prediction.grid))
    throw ShapeMismatch("nsse: fields on different grids");
  const double ref = truth.values.squaredNorm();
  if (ref == 0.0) throw ZeroReference("nsse: reference field has zero norm");
  return (truth.values - prediction.values).squaredNorm() / ref;
}

/// Train/test partition of an episode: snapshots [0, train_end) train the
/// models, [train_end, train_end + test_length) form the prediction window.
struct SplitSpec {
  int train_end = 470;
  int test_length = 30;
};

/// Overlapping training windows of one length, tagged train/validation by a
/// seeded 80/20 shuffle.
struct SequenceSet {
  int length = 0;
  int train_end = 0;
  std::vector<int> starts;       // window k covers [starts[k], starts[k]+length)
  std::vector<bool> is_train;    // parallel to starts

  int count() const { return static_cast<int>(starts.size()); }
  std::vector<int> train_indices() const {
    std::vector<int> out;
    for (int k = 0; k < count(); ++k)
      if (is_train[k]) out.push_back(k);
    return out;
  }
  std::vector<int> validation_indices() const {
    std::vector<int> out;
    for (int k = 0; k < count(); ++k)
      if (!is_train[k]) out.push_back(k);
    return out;
  }
};

namespace detail {

inline std::vector<int> seeded_shuffle(int n, std::uint64_t seed) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 eng(seed);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(eng() % static_cast<std::uint64_t>(i + 1));
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

}  // namespace detail

/// All train_end - length overlapping windows (starts 0 .. train_end-length-1),
/// split 80/20 train/validation by seeded shuffle; validation size rounds down.
inline SequenceSet make_sequences(const Episode& episode, int length,
                                  std::uint64_t split_seed, int train_end = 470) {
  const int n = episode.snapshot_count();
  if (length < 2 || length > train_end)
    throw BadLength("make_sequences: need 2 <= length <= train_end");
  if (train_end > n)
    throw BadLength("make_sequences: train_end " + std::to_string(train_end) +
                    " exceeds episode snapshot count " + std::to_string(n));
  const int count = train_end - length;
  if (count < 1) throw BadLength("make_sequences: no windows fit");

  SequenceSet set;
  set.length = length;
  set.train_end = train_end;
  set.starts.resize(count);
  for (int k = 0; k < count; ++k) set.starts[k] = k;
  set.is_train.assign(count, false);

  const int n_val = count / 5;
  const std::vector<int> order = detail::seeded_shuffle(count, split_seed);
  for (int k = 0; k < count - n_val; ++k) set.is_train[order[k]] = true;
  return set;
}

struct TestWindow {
  int entry_index = 0;
  ScalarField entry;                  // last training snapshot
  std::vector<ScalarField> targets;   // horizon tau in 1..test_length maps to targets[tau-1]
};

/// Prediction window: entry = q_{train_end-1}, targets = the following
/// test_length snapshots.
inline TestWindow test_window(const Episode& episode, const SplitSpec& split) {
  const int n = episode.snapshot_count();
  if (split.train_end < 1 || split.test_length < 1 ||
      split.train_end + split.test_length > n)
    throw BadSplit("test_window: train_end " + std::to_string(split.train_end) +
                   " + test_length " + std::to_string(split.test_length) +
                   " does not fit episode of " + std::to_string(n) + " snapshots");
  TestWindow w;
  w.entry_index = split.train_end - 1;
  w.entry = episode.snapshots[w.entry_index];
  w.targets.assign(episode.snapshots.begin() + split.train_end,
                   episode.snapshots.begin() + split.train_end + split.test_length);
  return w;
}

}  // namespace rbc
