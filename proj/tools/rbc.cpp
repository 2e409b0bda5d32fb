// rbc: command-line harness for the Rayleigh-Benard surrogate experiments.
//
//   rbc simulate --ra 1e5 --episodes 5 --seed 0 --out data/
//   rbc sweep kdmd --ra 1e5 --data data/ --out sweep_kdmd.csv
//   rbc sweep lran --ra 1e5 --data data/ --runs 10 --seed 0 --out sweep_lran.csv
//   rbc compare --ra 1e5 --data data/ --kdmd-config kdmd.json \
//               --lran-config lran.json --out results/
//   rbc render --episode data/ra1e5_ep0.rbce --index 499 --out field.pgm
//
// Exit codes: 0 success, 1 hard error, 2 partial failure in a batch.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "rbc/rbc.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitPartial = 2;

int cmd_simulate(double ra, int episodes, std::uint64_t seed, int nx, int ny,
                 double dt, const std::string& out_dir) {
  rbc::SimulationConfig cfg;
  cfg.ra = ra;
  cfg.seed = seed;
  cfg.grid = rbc::Grid(nx, ny);
  if (dt > 0.0) cfg.dt = dt;
  cfg.validate();

  const rbc::SimulateSummary summary = rbc::run_simulate(cfg, episodes, out_dir);
  std::printf("%-28s %10s %12s\n", "file", "seed", "snapshots");
  for (size_t k = 0; k < summary.written.size(); ++k)
    std::printf("%-28s %10llu %12lld\n",
                summary.written[k].filename().string().c_str(),
                static_cast<unsigned long long>(seed + k),
                static_cast<long long>(cfg.snapshot_count()));
  for (const auto& [index, reason] : summary.failures)
    std::printf("episode %d FAILED: %s\n", index, reason.c_str());
  std::printf("wrote %zu episode(s), %zu failure(s)\n", summary.written.size(),
              summary.failures.size());
  return summary.failures.empty() ? kExitOk : kExitPartial;
}

int cmd_sweep_kdmd(double ra, const std::string& data_dir, const std::string& out_csv) {
  const std::vector<rbc::Episode> episodes = rbc::load_episodes(data_dir, ra);
  const rbc::KdmdSweepResult result = rbc::run_sweep_kdmd(episodes);
  rbc::write_kdmd_sweep_csv(result, out_csv);
  double total = 0.0;
  for (const auto& r : result.rows) total += r.wall_time_s;
  std::printf("kdmd sweep: %zu rows (%d failed) on %zu episode(s), %.1f s total -> %s\n",
              result.rows.size(), result.failed_count(), episodes.size(), total,
              out_csv.c_str());
  if (!result.rows.empty() && result.rows.front().ok)
    std::printf("best: sigma=%g snapshot_size=%d mean_nsse=%.6g\n",
                result.rows.front().sigma, result.rows.front().snapshot_size,
                result.rows.front().mean_nsse);
  return result.failed_count() == 0 ? kExitOk : kExitPartial;
}

int cmd_sweep_lran(double ra, const std::string& data_dir, int runs,
                   std::uint64_t seed, int max_epochs, const std::string& out_csv) {
  const std::vector<rbc::Episode> episodes = rbc::load_episodes(data_dir, ra);
  rbc::LranConfig base;
  if (max_epochs > 0) base.max_epochs = max_epochs;
  const rbc::LranSweepResult result =
      rbc::run_sweep_lran(episodes, runs, seed, base);
  rbc::write_lran_sweep_csv(result, out_csv);
  double total = 0.0;
  for (const auto& r : result.rows) total += r.wall_time_s;
  std::printf("lran sweep: %zu rows (%d failed) on %zu episode(s), %.1f s total -> %s\n",
              result.rows.size(), result.failed_count(), episodes.size(), total,
              out_csv.c_str());
  return result.failed_count() == 0 ? kExitOk : kExitPartial;
}

int cmd_compare(double ra, const std::string& data_dir, const std::string& kdmd_json,
                const std::string& lran_json, const std::string& out_dir) {
  const std::vector<rbc::Episode> episodes = rbc::load_episodes(data_dir, ra);
  const rbc::KdmdSettings kdmd =
      kdmd_json.empty()
          ? rbc::optimal_kdmd_settings()
          : rbc::kdmd_settings_from_json(rbc::load_json_config(kdmd_json));
  const rbc::LranConfig lran =
      lran_json.empty() ? rbc::optimal_lran_config(ra)
                        : rbc::lran_config_from_json(rbc::load_json_config(lran_json));
  const rbc::CompareResult result =
      rbc::run_compare(episodes, ra, kdmd, lran, out_dir);
  for (const auto& p : result.written) std::printf("wrote %s\n", p.string().c_str());
  for (const auto& [index, reason] : result.failures)
    std::printf("episode %d FAILED: %s\n", index, reason.c_str());
  std::printf("mean NSSE over window: kdmd %.6g, lran %.6g\n",
              result.kdmd.mean.mean(), result.lran.mean.mean());
  return result.failures.empty() ? kExitOk : kExitPartial;
}

int cmd_render(const std::string& episode_file, unsigned index, const std::string& out) {
  const rbc::Episode ep = rbc::read_episode(episode_file);
  if (index >= static_cast<unsigned>(ep.snapshot_count()))
    throw rbc::BadSplit("render: snapshot index " + std::to_string(index) +
                        " out of range (episode has " +
                        std::to_string(ep.snapshot_count()) + ")");
  rbc::render_field(ep.snapshots[index], out);
  std::printf("wrote %s (%d x %d)\n", out.c_str(), ep.grid().nx, ep.grid().ny);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rayleigh-Benard convection surrogate-model experiments"};
  app.require_subcommand(1);

  double ra = 1e5;
  int episodes = 5;
  std::uint64_t seed = 0;
  int nx = 48, ny = 32;
  double dt = 0.0;
  std::string out_dir, data_dir, out_csv, kdmd_json, lran_json, episode_file, out_file;
  int runs = 10;
  int max_epochs = 0;
  unsigned index = 0;

  CLI::App* sim = app.add_subcommand("simulate", "run DNS episodes and write RBCE files");
  sim->add_option("--ra", ra, "Rayleigh number")->required();
  sim->add_option("--episodes", episodes, "number of episodes");
  sim->add_option("--seed", seed, "base RNG seed (episode k uses seed+k)");
  sim->add_option("--nx", nx, "grid points in x (even)");
  sim->add_option("--ny", ny, "grid points in y");
  sim->add_option("--dt", dt, "solver time step (default 0.025; reduce for Ra >= 1e6)");
  sim->add_option("--out", out_dir, "output directory")->required();

  CLI::App* sweep = app.add_subcommand("sweep", "hyperparameter sweeps");
  sweep->require_subcommand(1);
  CLI::App* sk = sweep->add_subcommand("kdmd", "grid sweep over sigma x snapshot size");
  sk->add_option("--ra", ra, "Rayleigh number")->required();
  sk->add_option("--data", data_dir, "episode directory")->required();
  sk->add_option("--out", out_csv, "output CSV")->required();
  CLI::App* sl = sweep->add_subcommand("lran", "random search over LRAN hyperparameters");
  sl->add_option("--ra", ra, "Rayleigh number")->required();
  sl->add_option("--data", data_dir, "episode directory")->required();
  sl->add_option("--runs", runs, "number of sampled configurations");
  sl->add_option("--seed", seed, "sweep RNG seed");
  sl->add_option("--max-epochs", max_epochs, "override training epochs (0 = default 50)");
  sl->add_option("--out", out_csv, "output CSV")->required();

  CLI::App* cmp = app.add_subcommand("compare", "evaluate fixed KDMD and LRAN configs");
  cmp->add_option("--ra", ra, "Rayleigh number")->required();
  cmp->add_option("--data", data_dir, "episode directory")->required();
  cmp->add_option("--kdmd-config", kdmd_json, "KDMD JSON config (default: sweep optimum)");
  cmp->add_option("--lran-config", lran_json, "LRAN JSON config (default: sweep optimum for --ra)");
  cmp->add_option("--out", out_dir, "output directory")->required();

  CLI::App* ren = app.add_subcommand("render", "render one snapshot to PGM");
  ren->add_option("--episode", episode_file, "RBCE episode file")->required();
  ren->add_option("--index", index, "snapshot index");
  ren->add_option("--out", out_file, "output PGM path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(ra, episodes, seed, nx, ny, dt, out_dir);
    if (sk->parsed()) return cmd_sweep_kdmd(ra, data_dir, out_csv);
    if (sl->parsed()) return cmd_sweep_lran(ra, data_dir, runs, seed, max_epochs, out_csv);
    if (cmp->parsed()) return cmd_compare(ra, data_dir, kdmd_json, lran_json, out_dir);
    if (ren->parsed()) return cmd_render(episode_file, index, out_file);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return kExitError;
}
