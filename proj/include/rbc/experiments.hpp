#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "rbc/dataset.hpp"
#include "rbc/episode_io.hpp"
#include "rbc/errors.hpp"
#include "rbc/kdmd.hpp"
#include "rbc/lran.hpp"
#include "rbc/simulation.hpp"

namespace rbc {

// -------- formatting helpers --------

/// Compact Rayleigh-number tag for file names: 1e5, 2e6, 1.5e5, 900.
inline std::string ra_tag(double ra) {
  char buf[48];
  if (ra >= 1000.0) {
    const int e = static_cast<int>(std::floor(std::log10(ra)));
    const double m = ra / std::pow(10.0, e);
    if (std::abs(m - std::round(m)) < 1e-9) {
      std::snprintf(buf, sizeof(buf), "%de%d", static_cast<int>(std::round(m)), e);
      return buf;
    }
    std::snprintf(buf, sizeof(buf), "%.3ge%d", m, e);
    return buf;
  }
  std::snprintf(buf, sizeof(buf), "%g", ra);
  return buf;
}

inline std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// -------- field rendering --------

/// 8-bit grayscale PGM (P5), min-max scaled; a degenerate range maps to 0.
/// Rows are written top wall first. A sidecar "<path>.bounds.txt" records
/// the scaling bounds.
inline void render_field(const ScalarField& field, const std::filesystem::path& path) {
  const Grid& g = field.grid;
  const double lo = field.values.minCoeff();
  const double hi = field.values.maxCoeff();
  const double span = hi - lo;
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("render_field: cannot open " + path.string());
  os << "P5\n" << g.nx << " " << g.ny << "\n255\n";
  for (int j = g.ny - 1; j >= 0; --j)
    for (int i = 0; i < g.nx; ++i) {
      const double t = span > 0.0 ? (field.values(j, i) - lo) / span : 0.0;
      os.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * t))));
    }
  if (!os) throw IoError("render_field: write failed for " + path.string());
  std::ofstream bs(path.string() + ".bounds.txt", std::ios::trunc);
  if (!bs) throw IoError("render_field: cannot open bounds sidecar for " + path.string());
  bs << "min " << format_g(lo) << "\nmax " << format_g(hi) << "\n";
}

// -------- dataset plumbing --------

struct SimulateSummary {
  std::vector<std::filesystem::path> written;
  std::vector<std::pair<int, std::string>> failures;  // episode index, reason
};

/// Runs `episodes` DNS episodes with seeds base.seed + k and writes
/// ra<RA>_ep<k>.rbce files. A Blowup aborts only its own episode.
inline SimulateSummary run_simulate(const SimulationConfig& base, int episodes,
                                    const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  SimulateSummary summary;
  for (int k = 0; k < episodes; ++k) {
    SimulationConfig cfg = base;
    cfg.seed = base.seed + static_cast<std::uint64_t>(k);
    const std::filesystem::path file =
        out_dir / ("ra" + ra_tag(base.ra) + "_ep" + std::to_string(k) + ".rbce");
    try {
      write_episode(simulate_episode(cfg), file);
      summary.written.push_back(file);
    } catch (const Blowup& e) {
      summary.failures.emplace_back(k, e.what());
    }
  }
  return summary;
}

/// All episodes in data_dir whose header Ra matches, ordered by file name.
inline std::vector<Episode> load_episodes(const std::filesystem::path& data_dir,
                                          double ra) {
  if (!std::filesystem::is_directory(data_dir))
    throw IoError("load_episodes: not a directory: " + data_dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(data_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".rbce")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<Episode> out;
  for (const auto& f : files) {
    Episode ep = read_episode(f);
    if (std::abs(ep.ra - ra) <= 1e-9 * std::max(1.0, std::abs(ra)))
      out.push_back(std::move(ep));
  }
  return out;
}

/// Snapshot pairs from the m-snapshot window ending at train_end - 1.
inline SnapshotPair snapshot_pair_from_episode(const Episode& ep, int snapshot_size,
                                               int train_end) {
  if (snapshot_size < 3 || snapshot_size > train_end ||
      train_end > ep.snapshot_count())
    throw BadLength("snapshot_pair_from_episode: window does not fit");
  const Grid& g = ep.grid();
  SnapshotPair pairs;
  pairs.x_matrix.resize(static_cast<Eigen::Index>(g.ny) * g.nx, snapshot_size - 1);
  pairs.y_matrix.resize(static_cast<Eigen::Index>(g.ny) * g.nx, snapshot_size - 1);
  for (int i = 0; i < snapshot_size - 1; ++i) {
    pairs.x_matrix.col(i) = flatten(ep.snapshots[train_end - snapshot_size + i]);
    pairs.y_matrix.col(i) = flatten(ep.snapshots[train_end - snapshot_size + i + 1]);
  }
  return pairs;
}

// -------- KDMD sweep / evaluation --------

struct KdmdSettings {
  KernelSpec kernel;
  int snapshot_size = 60;
};

/// Sweep-optimal KDMD settings, valid across the studied Rayleigh numbers:
/// gaussian kernel, sigma = 2, snapshot size 60.
inline KdmdSettings optimal_kdmd_settings() { return KdmdSettings{}; }

/// Sweep-optimal LRAN hyperparameters per Rayleigh number; more turbulent
/// settings get longer sequences and larger latent spaces.
inline LranConfig optimal_lran_config(double ra) {
  LranConfig cfg;
  cfg.delta = 0.9;
  cfg.learning_rate = 1e-4;
  if (ra < 5e5) {
    cfg.sequence_length = 18;
    cfg.latent_dim = 200;
  } else if (ra < 3.5e6) {
    cfg.sequence_length = 20;
    cfg.latent_dim = 400;
  } else {
    cfg.sequence_length = 25;
    cfg.latent_dim = 500;
  }
  return cfg;
}

/// Per-horizon NSSE of one KDMD fit on one episode's test window.
inline Vector kdmd_eval_nsse(const Episode& ep, const KdmdSettings& settings,
                             const SplitSpec& split = {}) {
  const TestWindow w = test_window(ep, split);
  const SnapshotPair pairs =
      snapshot_pair_from_episode(ep, settings.snapshot_size, split.train_end);
  const KdmdModel model = fit(pairs, settings.kernel);
  const std::vector<Vector> preds = predict(model, flatten(w.entry), split.test_length);
  Vector out(split.test_length);
  for (int tau = 0; tau < split.test_length; ++tau)
    out(tau) = nsse(w.targets[tau], unflatten(ep.grid(), preds[tau]));
  return out;
}

struct KdmdSweepRow {
  double sigma = 0.0;
  int snapshot_size = 0;
  bool ok = false;
  std::string error;
  Vector nsse;  // per horizon, mean over episodes
  double mean_nsse = 0.0;
  double wall_time_s = 0.0;  // reported on stdout; kept out of the CSV
};

struct KdmdSweepResult {
  int horizon = 0;
  std::vector<KdmdSweepRow> rows;
  int failed_count() const {
    int n = 0;
    for (const auto& r : rows) n += r.ok ? 0 : 1;
    return n;
  }
};

inline const std::vector<double>& kdmd_sweep_sigmas() {
  static const std::vector<double> v{1.0, 2.0, 4.0, 6.0};
  return v;
}

inline const std::vector<int>& kdmd_sweep_sizes() {
  static const std::vector<int> v{5, 10, 30, 40, 60, 80, 100, 150};
  return v;
}

/// Grid sweep over sigma x snapshot size (32 configurations). Each row
/// scores every episode's test window and reports the per-horizon mean;
/// failures are recorded and the sweep continues. Rows sort by mean NSSE,
/// failed rows last.
inline KdmdSweepResult run_sweep_kdmd(const std::vector<Episode>& episodes,
                                      const SplitSpec& split = {}) {
  if (episodes.empty()) throw BadLength("run_sweep_kdmd: no episodes");
  KdmdSweepResult result;
  result.horizon = split.test_length;
  for (double sigma : kdmd_sweep_sigmas())
    for (int size : kdmd_sweep_sizes()) {
      KdmdSweepRow row;
      row.sigma = sigma;
      row.snapshot_size = size;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        Vector acc = Vector::Zero(split.test_length);
        for (const Episode& ep : episodes) {
          KdmdSettings s;
          s.kernel.kind = KernelSpec::Kind::gaussian;
          s.kernel.sigma = sigma;
          s.snapshot_size = size;
          acc += kdmd_eval_nsse(ep, s, split);
        }
        row.nsse = acc / static_cast<double>(episodes.size());
        row.mean_nsse = row.nsse.mean();
        row.ok = true;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      row.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      result.rows.push_back(std::move(row));
    }
  std::stable_sort(result.rows.begin(), result.rows.end(),
                   [](const KdmdSweepRow& a, const KdmdSweepRow& b) {
                     if (a.ok != b.ok) return a.ok;
                     if (!a.ok) return false;
                     return a.mean_nsse < b.mean_nsse;
                   });
  return result;
}

inline void write_kdmd_sweep_csv(const KdmdSweepResult& result,
                                 const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("write_kdmd_sweep_csv: cannot open " + path.string());
  os << "sigma,snapshot_size,status,mean_nsse";
  for (int h = 1; h <= result.horizon; ++h) os << ",nsse_h" << h;
  os << "\n";
  for (const KdmdSweepRow& r : result.rows) {
    std::string status = r.ok ? "ok" : "failed: " + r.error;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    os << format_g(r.sigma) << "," << r.snapshot_size << "," << status << ",";
    if (r.ok) {
      os << format_g(r.mean_nsse);
      for (int h = 0; h < result.horizon; ++h) os << "," << format_g(r.nsse(h));
    } else {
      for (int h = 0; h <= result.horizon; ++h) os << (h ? "," : "");
    }
    os << "\n";
  }
  if (!os) throw IoError("write_kdmd_sweep_csv: write failed for " + path.string());
}

// -------- LRAN sweep --------

struct LranSweepRow {
  int run = 0;
  LranConfig config;
  int episode_index = 0;
  bool ok = false;
  std::string error;
  Vector nsse;
  double mean_nsse = 0.0;
  double wall_time_s = 0.0;
};

struct LranSweepResult {
  int horizon = 0;
  std::vector<LranSweepRow> rows;
  int failed_count() const {
    int n = 0;
    for (const auto& r : rows) n += r.ok ? 0 : 1;
    return n;
  }
};

/// Random search over the LRAN hyperparameter ranges: latent dimension
/// log-uniform in [16, 1024], delta uniform in [0.9, 1.0], beta an atom at
/// zero (p = 0.2) or log-uniform in [0.01, 10], sequence length uniform in
/// [2, 30], learning rate from {1e-4, 1e-5}, episode index from {0..4}.
/// Structural settings (channels, batch size, epochs, train_end) come from
/// `base`. Each run trains on its sampled episode and scores the test window.
inline LranSweepResult run_sweep_lran(const std::vector<Episode>& episodes,
                                      int n_runs, std::uint64_t seed,
                                      const LranConfig& base,
                                      const SplitSpec& split = {}) {
  if (episodes.empty()) throw BadLength("run_sweep_lran: no episodes");
  std::mt19937_64 eng(seed);
  auto uniform = [&eng]() { return static_cast<double>(eng() >> 11) * 0x1.0p-53; };

  LranSweepResult result;
  result.horizon = split.test_length;
  const int n_ep = static_cast<int>(std::min<std::size_t>(episodes.size(), 5));
  for (int run = 0; run < n_runs; ++run) {
    LranSweepRow row;
    row.run = run;
    LranConfig cfg = base;
    cfg.latent_dim = static_cast<int>(std::lround(
        std::exp(std::log(16.0) + uniform() * (std::log(1024.0) - std::log(16.0)))));
    cfg.delta = 0.9 + 0.1 * uniform();
    const double beta_draw = uniform();
    cfg.beta = (beta_draw < 0.2)
                   ? 0.0
                   : std::exp(std::log(0.01) + uniform() * (std::log(10.0) - std::log(0.01)));
    cfg.sequence_length = 2 + static_cast<int>(eng() % 29ull);  // {2..30}
    cfg.learning_rate = (eng() % 2ull == 0) ? 1e-4 : 1e-5;
    row.episode_index = static_cast<int>(eng() % static_cast<std::uint64_t>(n_ep));
    cfg.seed = seed + static_cast<std::uint64_t>(run) + 1;
    row.config = cfg;

    const auto t0 = std::chrono::steady_clock::now();
    try {
      const Episode& ep = episodes[row.episode_index];
      const TrainedLran trained = train(ep, cfg);
      const TestWindow w = test_window(ep, split);
      const std::vector<ScalarField> preds =
          rollout(trained.model, w.entry, split.test_length);
      row.nsse.resize(split.test_length);
      for (int tau = 0; tau < split.test_length; ++tau)
        row.nsse(tau) = nsse(w.targets[tau], preds[tau]);
      row.mean_nsse = row.nsse.mean();
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    row.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.rows.push_back(std::move(row));
  }
  return result;
}

inline void write_lran_sweep_csv(const LranSweepResult& result,
                                 const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("write_lran_sweep_csv: cannot open " + path.string());
  os << "run,episode_index,latent_dim,sequence_length,delta,beta,learning_rate,"
        "batch_size,max_epochs,train_end,channels,seed,status,mean_nsse";
  for (int h = 1; h <= result.horizon; ++h) os << ",nsse_h" << h;
  os << "\n";
  for (const LranSweepRow& r : result.rows) {
    std::string status = r.ok ? "ok" : "failed: " + r.error;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    const auto& ch = r.config.channels;
    os << r.run << "," << r.episode_index << "," << r.config.latent_dim << ","
       << r.config.sequence_length << "," << format_g(r.config.delta) << ","
       << format_g(r.config.beta) << "," << format_g(r.config.learning_rate) << ","
       << r.config.batch_size << "," << r.config.max_epochs << ","
       << r.config.train_end << "," << ch[0] << "/" << ch[1] << "/" << ch[2] << "/"
       << ch[3] << "," << r.config.seed << "," << status << ",";
    if (r.ok) {
      os << format_g(r.mean_nsse);
      for (int h = 0; h < result.horizon; ++h) os << "," << format_g(r.nsse(h));
    } else {
      for (int h = 0; h <= result.horizon; ++h) os << (h ? "," : "");
    }
    os << "\n";
  }
  if (!os) throw IoError("write_lran_sweep_csv: write failed for " + path.string());
}

// -------- method comparison --------

/// Per-horizon NSSE aggregated over episodes (population standard deviation,
/// so a single episode gives zero spread).
struct NsseCurve {
  double ra = 0.0;
  std::string method;
  Vector mean;
  Vector std_dev;
};

namespace detail {

inline NsseCurve aggregate_curve(double ra, const std::string& method,
                                 const std::vector<Vector>& per_episode) {
  const int horizon = static_cast<int>(per_episode.at(0).size());
  const double n = static_cast<double>(per_episode.size());
  NsseCurve c;
  c.ra = ra;
  c.method = method;
  c.mean = Vector::Zero(horizon);
  c.std_dev = Vector::Zero(horizon);
  for (const Vector& v : per_episode) c.mean += v;
  c.mean /= n;
  for (const Vector& v : per_episode)
    c.std_dev += (v - c.mean).cwiseAbs2();
  c.std_dev = (c.std_dev / n).cwiseSqrt();
  return c;
}

}  // namespace detail

struct CompareResult {
  NsseCurve kdmd;
  NsseCurve lran;
  std::vector<std::filesystem::path> written;
  std::vector<std::pair<int, std::string>> failures;  // episode index, reason
};

/// Experiment-3 style comparison: evaluates both methods with fixed
/// configurations on every episode, writes the aggregated NSSE curve CSV,
/// a Nusselt trace CSV (ground truth vs LRAN prediction, first episode)
/// and PGM renders of truth/KDMD/LRAN fields at tau in {1, 10, 25}.
inline CompareResult run_compare(const std::vector<Episode>& episodes, double ra,
                                 const KdmdSettings& kdmd_settings,
                                 const LranConfig& lran_config,
                                 const std::filesystem::path& out_dir,
                                 const SplitSpec& split = {}) {
  if (episodes.empty()) throw BadLength("run_compare: no episodes");
  std::filesystem::create_directories(out_dir);
  CompareResult result;

  std::vector<Vector> kdmd_scores, lran_scores;
  std::vector<ScalarField> first_lran_preds, first_kdmd_preds;
  int first_ok = -1;
  for (size_t e = 0; e < episodes.size(); ++e) {
    const Episode& ep = episodes[e];
    try {
      Vector k_nsse = kdmd_eval_nsse(ep, kdmd_settings, split);

      LranConfig cfg = lran_config;
      cfg.seed = lran_config.seed + static_cast<std::uint64_t>(e);
      const TrainedLran trained = train(ep, cfg);
      const TestWindow w = test_window(ep, split);
      const std::vector<ScalarField> preds =
          rollout(trained.model, w.entry, split.test_length);
      Vector l_nsse(split.test_length);
      for (int tau = 0; tau < split.test_length; ++tau)
        l_nsse(tau) = nsse(w.targets[tau], preds[tau]);

      kdmd_scores.push_back(std::move(k_nsse));
      lran_scores.push_back(std::move(l_nsse));
      if (first_ok < 0) {
        first_ok = static_cast<int>(e);
        first_lran_preds = preds;
        const SnapshotPair pairs = snapshot_pair_from_episode(
            ep, kdmd_settings.snapshot_size, split.train_end);
        const KdmdModel km = fit(pairs, kdmd_settings.kernel);
        const std::vector<Vector> kp =
            predict(km, flatten(w.entry), split.test_length);
        for (const Vector& v : kp) first_kdmd_preds.push_back(unflatten(ep.grid(), v));
      }
    } catch (const std::exception& err) {
      result.failures.emplace_back(static_cast<int>(e), err.what());
    }
  }
  if (first_ok < 0)
    throw BadLength("run_compare: every episode failed");

  result.kdmd = detail::aggregate_curve(ra, "kdmd", kdmd_scores);
  result.lran = detail::aggregate_curve(ra, "lran", lran_scores);

  const std::string tag = ra_tag(ra);
  {
    const std::filesystem::path p = out_dir / ("nsse_ra" + tag + ".csv");
    std::ofstream os(p, std::ios::trunc);
    if (!os) throw IoError("run_compare: cannot open " + p.string());
    os << "horizon,kdmd_mean,kdmd_std,lran_mean,lran_std\n";
    for (int h = 0; h < split.test_length; ++h)
      os << h + 1 << "," << format_g(result.kdmd.mean(h)) << ","
         << format_g(result.kdmd.std_dev(h)) << "," << format_g(result.lran.mean(h))
         << "," << format_g(result.lran.std_dev(h)) << "\n";
    result.written.push_back(p);
  }
  {
    // Nusselt trace on the first scored episode
    const Episode& ep = episodes[first_ok];
    const TestWindow w = test_window(ep, split);
    const std::filesystem::path p = out_dir / ("nusselt_ra" + tag + ".csv");
    std::ofstream os(p, std::ios::trunc);
    if (!os) throw IoError("run_compare: cannot open " + p.string());
    os << "horizon,nu_truth,nu_lran\n";
    for (int h = 0; h < split.test_length; ++h)
      os << h + 1 << "," << format_g(nusselt(w.targets[h], ep.ra, ep.pr)) << ","
         << format_g(nusselt(first_lran_preds[h], ep.ra, ep.pr)) << "\n";
    result.written.push_back(p);
  }
  {
    const Episode& ep = episodes[first_ok];
    const TestWindow w = test_window(ep, split);
    for (int tau : {1, 10, 25}) {
      if (tau > split.test_length) continue;
      const std::string suffix = "_tau" + std::to_string(tau) + ".pgm";
      render_field(w.targets[tau - 1], out_dir / ("truth" + suffix));
      render_field(first_kdmd_preds[tau - 1], out_dir / ("kdmd" + suffix));
      render_field(first_lran_preds[tau - 1], out_dir / ("lran" + suffix));
      result.written.push_back(out_dir / ("truth" + suffix));
      result.written.push_back(out_dir / ("kdmd" + suffix));
      result.written.push_back(out_dir / ("lran" + suffix));
    }
  }
  return result;
}

// -------- JSON configuration mirrors --------

inline KdmdSettings kdmd_settings_from_json(const nlohmann::json& j) {
  KdmdSettings s;
  const std::string kind = j.value("kind", std::string("gaussian"));
  if (kind == "gaussian")
    s.kernel.kind = KernelSpec::Kind::gaussian;
  else if (kind == "polynomial")
    s.kernel.kind = KernelSpec::Kind::polynomial;
  else
    throw FormatError("kdmd config: unknown kernel kind '" + kind + "'");
  s.kernel.sigma = j.value("sigma", s.kernel.sigma);
  s.kernel.degree = j.value("degree", s.kernel.degree);
  s.kernel.scale = j.value("scale", s.kernel.scale);
  s.snapshot_size = j.value("snapshot_size", s.snapshot_size);
  return s;
}

inline LranConfig lran_config_from_json(const nlohmann::json& j) {
  LranConfig c;
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.sequence_length = j.value("sequence_length", c.sequence_length);
  c.delta = j.value("delta", c.delta);
  c.beta = j.value("beta", c.beta);
  c.eps1 = j.value("eps1", c.eps1);
  c.eps2 = j.value("eps2", c.eps2);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.seed = j.value("seed", c.seed);
  c.train_end = j.value("train_end", c.train_end);
  if (j.contains("channels")) {
    const auto& ch = j["channels"];
    if (!ch.is_array() || ch.size() != 4)
      throw FormatError("lran config: channels must be an array of 4 widths");
    for (int i = 0; i < 4; ++i) c.channels[i] = ch[i].get<int>();
  }
  return c;
}

inline nlohmann::json load_json_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw MissingConfig("config file not found: " + path.string());
  std::ifstream is(path);
  if (!is) throw MissingConfig("cannot open config file: " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("unparseable config " + path.string() + ": " + e.what());
  }
  return j;
}

}  // namespace rbc
