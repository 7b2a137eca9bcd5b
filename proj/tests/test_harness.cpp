#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "atscv/config.hpp"
#include "atscv/errors.hpp"
#include "atscv/harness.hpp"
#include "atscv/io.hpp"

using namespace atscv;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("atscv_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CampaignConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

// The no-cut-in path of one initial gap, walked with the naturalistic model.
double cut_in_mass(const SimConfig& cfg, double r1) {
  Scene scene = initial_scene(cfg.scenario.initial, r1);
  double survive = 1.0;
  for (int k = 0; !check_termination(scene.state(), k, cfg.scenario); ++k) {
    const auto dist = nde_action_dist(scene.state(), cfg.scenario, cfg.models);
    survive *= 1.0 - dist.prob(Action::right_lane_change());
    scene = step(scene, dist.entries().back().first, Action::accel(0.0), cfg.scenario);
  }
  return 1.0 - survive;
}

}  // namespace

TEST_CASE("reference config equals the built-in defaults") {
  const auto cfg = load_config(fs::path(ATSCV_SOURCE_DIR) / "configs" / "reference.ini");
  const CampaignConfig def;
  CHECK(cfg.seed == def.seed);
  CHECK(cfg.episodes == def.episodes);
  CHECK(cfg.env == def.env);
  CHECK(cfg.sim.num_surrogates() == 3);
  CHECK(cfg.sim.models.surrogates[2].name == "fvdm2");
  CHECK(std::get<FvdmParams>(cfg.sim.models.surrogates[2].params).max_decel == 3.5);
  CHECK(std::get<IdmParams>(cfg.sim.models.av.params).v0 == 14.0);
  CHECK(cfg.estimator.max_control_steps == 10);
  CHECK(brute_force_mu(cfg.sim).mu == brute_force_mu(def.sim).mu);
}

TEST_CASE("config parsing") {
  const auto cfg = parse(
      "[campaign]\nseed = 42\nepisodes = 7\nenv = nde\n"
      "[surrogates]\nmodels = fvdm2, idm\n"
      "[surrogate.idm]\nmax_decel = 1.5\n"
      "[estimator]\nrhw_threshold = 0.2\n");
  CHECK(cfg.seed == 42);
  CHECK(cfg.episodes == 7);
  CHECK(cfg.env == Environment::NDE);
  REQUIRE(cfg.sim.num_surrogates() == 2);
  CHECK(cfg.sim.models.surrogates[0].name == "fvdm2");
  CHECK(std::get<IdmParams>(cfg.sim.models.surrogates[1].params).max_decel == 1.5);
  CHECK(cfg.estimator.rhw_threshold == 0.2);

  CHECK_THROWS_WITH_AS(parse("[campaign]\nsead = 1\n"), doctest::Contains("campaign.sead"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse("[campaing]\nseed = 1\n"), doctest::Contains("campaing"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse("[scenario]\ndt = fast\n"), doctest::Contains("scenario.dt"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse("[campaign]\nepisodes = 0\n"), doctest::Contains("episodes"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse("[campaign]\nepisodes = -3\n"), doctest::Contains("episodes"),
                       ConfigError);
  CHECK_THROWS_AS(parse("[estimator]\nrhw_threshold = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(parse("[surrogates]\nmodels = idm, warp\n"), ConfigError);
  CHECK_THROWS_AS(parse("[campaign\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/x.ini"), ConfigError);
}

TEST_CASE("oracle without lane changes") {
  SimConfig cfg;
  cfg.models.mobil.gain = 0.0;
  const auto o = brute_force_mu(cfg, 16);
  CHECK(o.mu == 0.0);
  CHECK(o.open_after_cut_in_mass == 0.0);
}

TEST_CASE("oracle when every cut-in crashes") {
  SimConfig cfg;
  auto av = std::get<IdmParams>(cfg.models.av.params);
  av.max_decel = 1e-3;
  cfg.models.av.params = av;
  const std::size_t bins = 16;
  double expected = 0.0;
  for (std::size_t b = 0; b < bins; ++b)
    expected += cut_in_mass(cfg, 30.0 + (b + 0.5) / bins * 2.0) / bins;
  CHECK(expected > 0.0);
  CHECK(brute_force_mu(cfg, bins).mu == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("oracle at the reference configuration") {
  const SimConfig cfg;
  const auto o = brute_force_mu(cfg);
  CHECK(o.bins == 64);
  CHECK(o.mu > 1e-3);
  CHECK(o.mu < 1e-2);
  CHECK(o.no_cut_in_max_steps_mass == 0.0);
  CHECK(o.open_after_cut_in_mass < 1e-6);
  // Finer binning barely moves the answer.
  CHECK(std::abs(brute_force_mu(cfg, 1024).mu - o.mu) < 0.01 * o.mu);
  CHECK_THROWS_AS(brute_force_mu(cfg, 100000), BudgetExceededError);
}

TEST_CASE("acceleration factors and statistics") {
  CHECK(acceleration_factor(100, 4) == 25.0);
  CHECK_FALSE(acceleration_factor(std::nullopt, 4).has_value());
  CHECK_FALSE(acceleration_factor(100, std::nullopt).has_value());
  const auto st = factor_stats({1.0, 3.0, 2.0, 10.0});
  REQUIRE(st.has_value());
  CHECK(st->median == 2.5);
  CHECK(st->mean == 4.0);
  CHECK(st->sd == doctest::Approx(std::sqrt(((9.0 + 1.0 + 4.0 + 36.0) / 3.0))));
  CHECK_FALSE(factor_stats({}).has_value());
}

TEST_CASE("replication table uses consecutive seeds") {
  CampaignConfig cfg;
  cfg.seed = 40;
  cfg.episodes = 300;
  cfg.nde_episodes = 300;
  cfg.replications = 3;
  const auto study = run_replications(cfg);
  REQUIRE(study.rows.size() == 3);
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(study.rows[r].index == r + 1);
    CHECK(study.rows[r].seed == 41 + r);
    CHECK(study.rows[r].mu_nde.has_value());
  }
}

TEST_CASE("number formatting round-trips") {
  for (double x : {0.0, 1.0, 0.1, 1.0 / 3.0, 4.9815e-3, 1e-300, 123456789.125})
    CHECK(parse_double(format_double(x)) == x);
  CHECK(format_double(0.5) == "0.5");
  CHECK_THROWS_AS(parse_double("1,5"), IoError);
}

TEST_CASE("campaign outputs") {
  CampaignConfig cfg;
  cfg.episodes = 600;
  cfg.seed = 3;
  const auto result = run_campaign(cfg);
  const fs::path dir = scratch("outputs");
  const auto files = emit_outputs(result, cfg, dir);
  for (const auto& f : files) CHECK(fs::exists(dir / f));

  const auto summary = read_json(dir / "summary.json");
  CHECK_NOTHROW(validate_summary(summary));
  CHECK(summary["version"] == kSummaryVersion);
  CHECK(summary["estimates"].contains("nade"));
  CHECK(summary["estimates"].contains("atscv"));
  REQUIRE(result.oracle.has_value());
  CHECK(summary["oracle"]["mu"].get<double>() == result.oracle->mu);

  // One adjusted pair per record.
  std::ifstream adjusted(dir / "adjusted_points.csv");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(adjusted, line)) ++rows;
  CHECK(rows == cfg.episodes + 1);

  // Estimates recomputed from the files match the summary exactly.
  const auto records = read_records(dir);
  REQUIRE(records.size() == result.records.size());
  const auto again = analyze(Environment::NADE, cfg.seed, records, cfg);
  CHECK(estimates_json(again) == summary["estimates"]);
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(records[i].weight == result.records[i].weight);
    CHECK(records[i].control_steps() == result.records[i].control_steps());
  }
}

TEST_CASE("empty campaign writes header-only files") {
  CampaignConfig cfg;
  const auto result = analyze(Environment::NADE, 1, {}, cfg);
  const fs::path dir = scratch("empty");
  emit_outputs(result, cfg, dir);
  CHECK(slurp(dir / "records.csv") == "id,seed,env,accident,l,w\n");
  CHECK(slurp(dir / "critical_log.csv") == "record_id,moment,p,q_alpha,q_1,q_2,q_3,step,lane_change\n");
  CHECK(slurp(dir / "adjusted_points.csv") == "id,l,unadjusted,adjusted\n");
  CHECK(slurp(dir / "convergence_nade.csv") == "n,mu,rhw\n");
  CHECK(read_records(dir).empty());
  CHECK_NOTHROW(validate_summary(read_json(dir / "summary.json")));
}

TEST_CASE("summary validation rejects malformed documents") {
  CampaignConfig cfg;
  cfg.episodes = 50;
  const auto result = run_campaign(cfg);
  auto doc = summary_json(result, cfg, {"summary.json"});
  CHECK_NOTHROW(validate_summary(doc));
  auto broken = doc;
  broken.erase("version");
  CHECK_THROWS_AS(validate_summary(broken), Error);
  broken = doc;
  broken["estimates"]["nade"]["mu"] = "high";
  CHECK_THROWS_AS(validate_summary(broken), Error);
  broken = doc;
  broken["env"] = "sim";
  CHECK_THROWS_AS(validate_summary(broken), Error);
}

TEST_CASE("outputs are byte-identical across runs and worker counts") {
  CampaignConfig cfg;
  cfg.episodes = 500;
  cfg.seed = 9;
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  emit_outputs(run_campaign(cfg), cfg, a);
  cfg.workers = 4;
  const auto files = emit_outputs(run_campaign(cfg), cfg, b);
  for (const auto& f : files) CHECK(slurp(a / f) == slurp(b / f));
}
