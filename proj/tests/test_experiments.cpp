#include <catch2/catch.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "rbc/experiments.hpp"

using namespace rbc;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  return std::string((std::istreambuf_iterator<char>(is)), {});
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

LranConfig tiny_lran_config() {
  LranConfig cfg;
  cfg.latent_dim = 6;
  cfg.sequence_length = 3;
  cfg.channels = {2, 3, 2, 2};
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 16;
  cfg.max_epochs = 2;
  cfg.seed = 9;
  return cfg;
}

}  // namespace

TEST_CASE("ra_tag formats") {
  CHECK(ra_tag(1e5) == "1e5");
  CHECK(ra_tag(2e6) == "2e6");
  CHECK(ra_tag(5e6) == "5e6");
  CHECK(ra_tag(1.5e5) == "1.5e5");
  CHECK(ra_tag(900) == "900");
}

TEST_CASE("render_field writes scaled PGM with bounds sidecar") {
  Grid g(12, 8);
  const fs::path dir = fresh_dir("rbc_render_test");

  SECTION("constant fields map to zero") {
    ScalarField f(g);
    f.values.setConstant(4.2);
    render_field(f, dir / "const.pgm");
    const std::string data = slurp(dir / "const.pgm");
    const std::string header = "P5\n12 8\n255\n";
    REQUIRE(data.substr(0, header.size()) == header);
    REQUIRE(data.size() == header.size() + 12 * 8);
    for (size_t i = header.size(); i < data.size(); ++i)
      CHECK(data[i] == '\0');
  }
  SECTION("range endpoints hit 0 and 255") {
    ScalarField f(g);
    f.values.setZero();
    f.values(3, 4) = -1.0;
    f.values(5, 6) = 1.0;
    render_field(f, dir / "range.pgm");
    const std::string data = slurp(dir / "range.pgm");
    bool has0 = false, has255 = false;
    for (size_t i = data.size() - 12 * 8; i < data.size(); ++i) {
      has0 |= static_cast<unsigned char>(data[i]) == 0;
      has255 |= static_cast<unsigned char>(data[i]) == 255;
    }
    CHECK(has0);
    CHECK(has255);
    const std::string bounds = slurp(dir / "range.pgm.bounds.txt");
    CHECK(bounds == "min -1\nmax 1\n");
  }
  SECTION("reparse dimensions from the header") {
    ScalarField f = testing::random_field(g, 3);
    render_field(f, dir / "rand.pgm");
    std::ifstream is(dir / "rand.pgm", std::ios::binary);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    is >> magic >> w >> h >> maxval;
    CHECK(magic == "P5");
    CHECK(w == g.nx);
    CHECK(h == g.ny);
    CHECK(maxval == 255);
  }
}

TEST_CASE("run_simulate writes files and reruns byte-identically") {
  SimulationConfig base;
  base.ra = 1e4;
  base.grid = Grid(12, 8);
  base.cook_time = 1.0;
  base.episode_length = 3.0;
  base.seed = 5;

  const fs::path dir_a = fresh_dir("rbc_sim_a");
  const SimulateSummary a = run_simulate(base, 2, dir_a);
  REQUIRE(a.written.size() == 2);
  CHECK(a.failures.empty());
  CHECK(a.written[0].filename() == "ra1e4_ep0.rbce");
  CHECK(fs::exists(dir_a / "ra1e4_ep0.manifest.json"));
  CHECK(fs::exists(dir_a / "ra1e4_ep1.manifest.json"));

  const fs::path dir_b = fresh_dir("rbc_sim_b");
  run_simulate(base, 2, dir_b);
  CHECK(slurp(dir_a / "ra1e4_ep0.rbce") == slurp(dir_b / "ra1e4_ep0.rbce"));
  CHECK(slurp(dir_a / "ra1e4_ep1.rbce") == slurp(dir_b / "ra1e4_ep1.rbce"));

  // distinct seeds produce distinct data
  CHECK(slurp(dir_a / "ra1e4_ep0.rbce") != slurp(dir_a / "ra1e4_ep1.rbce"));

  const std::vector<Episode> eps = load_episodes(dir_a, 1e4);
  CHECK(eps.size() == 2);
  CHECK(load_episodes(dir_a, 2e6).empty());
}

TEST_CASE("run_simulate records blowups without aborting the batch") {
  SimulationConfig base;
  base.ra = 1e8;
  base.dt = 0.5;
  base.noise_amplitude = 0.5;
  base.grid = Grid(12, 8);
  base.cook_time = 10.0;
  base.episode_length = 2.0;
  const fs::path dir = fresh_dir("rbc_sim_blowup");
  const SimulateSummary s = run_simulate(base, 2, dir);
  CHECK(s.written.empty());
  REQUIRE(s.failures.size() == 2);
  CHECK(s.failures[0].first == 0);
  CHECK(s.failures[1].first == 1);
  CHECK(s.failures[0].second.find("reduce dt") != std::string::npos);
}

TEST_CASE("kdmd sweep covers the full grid and sorts by mean NSSE") {
  Grid g(12, 8);
  std::vector<Episode> episodes;
  episodes.push_back(testing::two_mode_episode(g, 500, 0.12));
  episodes.push_back(testing::two_mode_episode(g, 500, 0.12));
  const KdmdSweepResult result = run_sweep_kdmd(episodes);
  REQUIRE(result.rows.size() == 32);
  CHECK(result.failed_count() == 0);
  // each configuration exactly once
  for (double sigma : kdmd_sweep_sigmas())
    for (int size : kdmd_sweep_sizes()) {
      int found = 0;
      for (const auto& r : result.rows)
        found += (r.sigma == sigma && r.snapshot_size == size) ? 1 : 0;
      CHECK(found == 1);
    }
  for (size_t i = 1; i < result.rows.size(); ++i)
    CHECK(result.rows[i - 1].mean_nsse <= result.rows[i].mean_nsse);

  // snapshot sizes beyond 60 bring no meaningful change once the dynamics
  // are captured (absolute floor covers the saturated regime)
  double at_60 = -1.0;
  for (const auto& r : result.rows)
    if (r.sigma == 2.0 && r.snapshot_size == 60) at_60 = r.mean_nsse;
  REQUIRE(at_60 >= 0.0);
  for (const auto& r : result.rows)
    if (r.sigma == 2.0 && r.snapshot_size > 60)
      CHECK(std::abs(r.mean_nsse - at_60) <= std::max(0.1 * at_60, 1e-6));

  const fs::path dir = fresh_dir("rbc_sweep_csv");
  write_kdmd_sweep_csv(result, dir / "kdmd.csv");
  const std::string csv = slurp(dir / "kdmd.csv");
  CHECK(count_lines(csv) == 33);  // header + 32 rows
  CHECK(csv.rfind("sigma,snapshot_size,status,mean_nsse,nsse_h1", 0) == 0);
}

TEST_CASE("kdmd sweep records failures as data") {
  Grid g(12, 8);
  std::vector<Episode> episodes{testing::two_mode_episode(g, 140, 0.12)};
  SplitSpec split;
  split.train_end = 100;
  split.test_length = 30;
  const KdmdSweepResult result = run_sweep_kdmd(episodes, split);
  REQUIRE(result.rows.size() == 32);
  // only snapshot size 150 exceeds train_end = 100: 4 sigma rows fail
  int failed = 0;
  for (const auto& r : result.rows) {
    if (r.snapshot_size > 100) {
      CHECK_FALSE(r.ok);
      CHECK_FALSE(r.error.empty());
      ++failed;
    } else {
      CHECK(r.ok);
    }
  }
  CHECK(failed == 4);
  CHECK(result.failed_count() == 4);
  // failed rows sort after successful ones
  for (size_t i = 1; i < result.rows.size(); ++i)
    if (!result.rows[i - 1].ok) CHECK_FALSE(result.rows[i].ok);
}

TEST_CASE("lran sweep samples inside the search ranges") {
  Grid g(12, 8);
  std::vector<Episode> episodes;
  for (int e = 0; e < 3; ++e)
    episodes.push_back(testing::two_mode_episode(g, 500, 0.1 + 0.01 * e));
  LranConfig base = tiny_lran_config();
  base.max_epochs = 1;
  const LranSweepResult result = run_sweep_lran(episodes, 4, 77, base);
  REQUIRE(result.rows.size() == 4);
  std::set<std::uint64_t> seeds;
  for (const auto& r : result.rows) {
    CHECK(r.ok);
    CHECK(r.config.latent_dim >= 16);
    CHECK(r.config.latent_dim <= 1024);
    CHECK(r.config.delta >= 0.9);
    CHECK(r.config.delta <= 1.0);
    CHECK(r.config.beta >= 0.0);
    CHECK(r.config.beta <= 10.0);
    CHECK(r.config.sequence_length >= 2);
    CHECK(r.config.sequence_length <= 30);
    CHECK((r.config.learning_rate == 1e-4 || r.config.learning_rate == 1e-5));
    CHECK(r.episode_index >= 0);
    CHECK(r.episode_index < 3);
    seeds.insert(r.config.seed);
  }
  CHECK(seeds.size() == 4);

  const fs::path dir = fresh_dir("rbc_lran_sweep_csv");
  write_lran_sweep_csv(result, dir / "lran.csv");
  const std::string csv = slurp(dir / "lran.csv");
  CHECK(count_lines(csv) == 5);
  CHECK(csv.rfind("run,episode_index,latent_dim,sequence_length,delta,beta", 0) == 0);
}

TEST_CASE("compare emits curves, Nusselt trace, renders, and is deterministic") {
  Grid g(12, 8);
  std::vector<Episode> episodes;
  episodes.push_back(testing::two_mode_episode(g, 500, 0.12));
  episodes.push_back(testing::two_mode_episode(g, 500, 0.13));

  KdmdSettings kdmd;
  kdmd.snapshot_size = 40;
  LranConfig lran = tiny_lran_config();

  const fs::path dir_a = fresh_dir("rbc_compare_a");
  const CompareResult a = run_compare(episodes, 1e5, kdmd, lran, dir_a);
  CHECK(a.failures.empty());
  CHECK(a.kdmd.mean.size() == 30);
  CHECK(a.lran.mean.size() == 30);
  CHECK(a.kdmd.mean.minCoeff() >= 0.0);
  CHECK(a.lran.mean.minCoeff() >= 0.0);

  // the curve mean is recomputable from per-episode scores
  const Vector e0 = kdmd_eval_nsse(episodes[0], kdmd);
  const Vector e1 = kdmd_eval_nsse(episodes[1], kdmd);
  CHECK((a.kdmd.mean - 0.5 * (e0 + e1)).cwiseAbs().maxCoeff() < 1e-15);

  const std::string nsse_csv = slurp(dir_a / "nsse_ra1e5.csv");
  CHECK(count_lines(nsse_csv) == 31);
  CHECK(nsse_csv.rfind("horizon,kdmd_mean,kdmd_std,lran_mean,lran_std", 0) == 0);
  const std::string nu_csv = slurp(dir_a / "nusselt_ra1e5.csv");
  CHECK(count_lines(nu_csv) == 31);
  CHECK(nu_csv.rfind("horizon,nu_truth,nu_lran", 0) == 0);
  for (int tau : {1, 10, 25}) {
    CHECK(fs::exists(dir_a / ("truth_tau" + std::to_string(tau) + ".pgm")));
    CHECK(fs::exists(dir_a / ("kdmd_tau" + std::to_string(tau) + ".pgm")));
    CHECK(fs::exists(dir_a / ("lran_tau" + std::to_string(tau) + ".pgm")));
  }

  const fs::path dir_b = fresh_dir("rbc_compare_b");
  run_compare(episodes, 1e5, kdmd, lran, dir_b);
  for (const auto& entry : fs::directory_iterator(dir_a)) {
    const fs::path rel = entry.path().filename();
    INFO(rel.string());
    CHECK(slurp(entry.path()) == slurp(dir_b / rel));
  }
}

TEST_CASE("compare with a single episode has zero spread") {
  Grid g(12, 8);
  std::vector<Episode> episodes{testing::two_mode_episode(g, 500, 0.12)};
  KdmdSettings kdmd;
  kdmd.snapshot_size = 30;
  const fs::path dir = fresh_dir("rbc_compare_single");
  const CompareResult r = run_compare(episodes, 1e5, kdmd, tiny_lran_config(), dir);
  CHECK(r.kdmd.std_dev.cwiseAbs().maxCoeff() == 0.0);
  CHECK(r.lran.std_dev.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sweep-optimal configurations") {
  const KdmdSettings k = optimal_kdmd_settings();
  CHECK(k.snapshot_size == 60);
  CHECK(k.kernel.kind == KernelSpec::Kind::gaussian);
  CHECK(k.kernel.sigma == 2.0);

  const LranConfig at_1e5 = optimal_lran_config(1e5);
  CHECK(at_1e5.sequence_length == 18);
  CHECK(at_1e5.latent_dim == 200);
  CHECK(at_1e5.delta == 0.9);
  const LranConfig at_1e6 = optimal_lran_config(1e6);
  CHECK(at_1e6.sequence_length == 20);
  CHECK(at_1e6.latent_dim == 400);
  CHECK(at_1e6.delta == 0.9);
  const LranConfig at_2e6 = optimal_lran_config(2e6);
  CHECK(at_2e6.sequence_length == 20);
  CHECK(at_2e6.latent_dim == 400);
  const LranConfig at_5e6 = optimal_lran_config(5e6);
  CHECK(at_5e6.sequence_length == 25);
  CHECK(at_5e6.latent_dim == 500);
}

TEST_CASE("json config mirrors") {
  const nlohmann::json kj = {{"kind", "gaussian"}, {"sigma", 4.0}, {"snapshot_size", 80}};
  const KdmdSettings ks = kdmd_settings_from_json(kj);
  CHECK(ks.kernel.sigma == 4.0);
  CHECK(ks.snapshot_size == 80);
  CHECK_THROWS_AS(kdmd_settings_from_json({{"kind", "sinc"}}), FormatError);

  const nlohmann::json lj = {{"latent_dim", 12},
                             {"sequence_length", 7},
                             {"delta", 0.95},
                             {"channels", {2, 3, 2, 2}}};
  const LranConfig lc = lran_config_from_json(lj);
  CHECK(lc.latent_dim == 12);
  CHECK(lc.sequence_length == 7);
  CHECK(lc.delta == 0.95);
  CHECK(lc.channels == std::array<int, 4>{2, 3, 2, 2});
  CHECK_THROWS_AS(lran_config_from_json({{"channels", {2, 3}}}), FormatError);

  CHECK_THROWS_AS(load_json_config("/nonexistent/config.json"), MissingConfig);
}
