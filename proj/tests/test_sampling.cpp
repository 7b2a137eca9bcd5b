#include <doctest.h>

#include <cmath>

#include "atscv/errors.hpp"
#include "atscv/sampling.hpp"

using namespace atscv;

namespace {

bool same_record(const TestRecord& a, const TestRecord& b) {
  if (a.id != b.id || a.seed != b.seed || a.env != b.env || a.accident != b.accident ||
      a.weight != b.weight || a.termination != b.termination || a.r1 != b.r1 ||
      a.log.size() != b.log.size())
    return false;
  for (std::size_t k = 0; k < a.log.size(); ++k) {
    const auto& x = a.log[k];
    const auto& y = b.log[k];
    if (x.step != y.step || x.lane_change != y.lane_change || x.p != y.p ||
        x.q_alpha != y.q_alpha || x.q != y.q)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("initial states follow the reference distribution") {
  const ScenarioConfig cfg;
  Rng rng(99);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto s = sample_initial_state(rng, cfg);
    CHECK(s.r1 >= 30.0);
    CHECK(s.r1 <= 32.0);
    CHECK(s.v_bv == 8.0);
    CHECK(s.r1_dot == -5.0);
    CHECK(s.r2 == 5.0);
    CHECK(s.r2_dot == -5.0);
    CHECK(s.phase == Phase::BeforeCutIn);
    sum += s.r1;
  }
  const double sd = 2.0 / std::sqrt(12.0) / std::sqrt(double(n));
  CHECK(std::abs(sum / n - 31.0) <= 3.0 * sd);

  Rng a(5), b(5);
  CHECK(sample_initial_r1(a, cfg) == sample_initial_r1(b, cfg));
}

TEST_CASE("episode seeds depend on root, environment and id only") {
  CHECK(episode_seed(1, Environment::NDE, 7) == episode_seed(1, Environment::NDE, 7));
  CHECK(episode_seed(1, Environment::NDE, 7) != episode_seed(1, Environment::NADE, 7));
  CHECK(episode_seed(1, Environment::NDE, 7) != episode_seed(2, Environment::NDE, 7));
  CHECK(episode_seed(1, Environment::NDE, 7) != episode_seed(1, Environment::NDE, 8));
}

TEST_CASE("NDE episodes carry no importance weights") {
  const SimConfig cfg;
  int accidents = 0;
  for (std::uint64_t i = 0; i < 3000; ++i) {
    const auto r = sample_nde_episode(i, episode_seed(3, Environment::NDE, i), cfg);
    CHECK(r.env == Environment::NDE);
    CHECK(r.control_steps() == 0);
    CHECK(r.weight == 1.0);
    CHECK(r.accident == (r.termination == Termination::Accident ? 1 : 0));
    accidents += r.accident;
  }
  CHECK(accidents < 100);
}

TEST_CASE("episodes are pure functions of (seed, config)") {
  const SimConfig cfg;
  for (std::uint64_t i = 0; i < 200; ++i) {
    const auto seed = episode_seed(8, Environment::NADE, i);
    CHECK(same_record(sample_nade_episode(i, seed, cfg), sample_nade_episode(i, seed, cfg)));
    CHECK(same_record(sample_nde_episode(i, seed, cfg), sample_nde_episode(i, seed, cfg)));
  }
}

TEST_CASE("without lane changes nobody crashes") {
  SimConfig cfg;
  cfg.models.mobil.gain = 0.0;
  for (std::uint64_t i = 0; i < 500; ++i) {
    const auto nde = sample_nde_episode(i, episode_seed(4, Environment::NDE, i), cfg);
    const auto nade = sample_nade_episode(i, episode_seed(4, Environment::NADE, i), cfg);
    CHECK(nde.accident == 0);
    CHECK(nade.accident == 0);
    CHECK(nade.log.empty());
    CHECK(nade.weight == 1.0);
  }
}

TEST_CASE("NADE logs are consistent with their weights") {
  const SimConfig cfg;
  int with_log = 0;
  int accidents = 0;
  for (std::uint64_t i = 0; i < 2000; ++i) {
    const auto r = sample_nade_episode(i, episode_seed(5, Environment::NADE, i), cfg);
    CHECK(r.env == Environment::NADE);
    double w = 1.0;
    for (const auto& m : r.log) {
      REQUIRE(m.q.size() == cfg.num_surrogates());
      CHECK(m.p > 0.0);
      CHECK(m.p <= 1.0);
      CHECK(m.q_alpha > 0.0);
      CHECK(m.q_alpha <= 1.0);
      double mixed = 0.0;
      for (double q : m.q) {
        CHECK(q > 0.0);
        CHECK(q <= 1.0);
        mixed += q / 3.0;
      }
      CHECK(std::abs(mixed - m.q_alpha) <= 1e-12);
      w *= m.p / m.q_alpha;
    }
    CHECK(w == r.weight);
    if (r.log.empty()) CHECK(r.weight == 1.0);
    // Only the final logged moment can be a cut-in.
    for (std::size_t k = 0; k + 1 < r.log.size(); ++k) CHECK_FALSE(r.log[k].lane_change);
    for (std::size_t k = 1; k < r.log.size(); ++k) CHECK(r.log[k].step > r.log[k - 1].step);
    with_log += !r.log.empty();
    accidents += r.accident;
  }
  CHECK(with_log > 1000);
  CHECK(accidents > 100);
}

TEST_CASE("the trace is a complete trajectory") {
  const SimConfig cfg;
  for (std::uint64_t i = 0; i < 100; ++i) {
    Trajectory t;
    const auto r = sample_nade_episode(i, episode_seed(6, Environment::NADE, i), cfg, &t);
    REQUIRE(t.termination.has_value());
    CHECK(*t.termination == r.termination);
    CHECK(is_accident(t) == r.accident);
    CHECK(t.states.size() == t.actions.size() + 1);
    CHECK(t.states.front().r1 == r.r1);
    CHECK(check_termination(t.states.back(), int(t.actions.size()), cfg.scenario) ==
          r.termination);
  }
}

TEST_CASE("campaign output does not depend on the worker count") {
  const SimConfig cfg;
  for (Environment env : {Environment::NDE, Environment::NADE}) {
    const auto one = sample_campaign(env, 12, 400, cfg, 1);
    const auto four = sample_campaign(env, 12, 400, cfg, 4);
    REQUIRE(one.size() == 400);
    REQUIRE(four.size() == 400);
    for (std::size_t i = 0; i < one.size(); ++i) {
      CHECK(one[i].id == i);
      CHECK(same_record(one[i], four[i]));
    }
  }
}

TEST_CASE("control steps stay small") {
  const SimConfig cfg;
  const auto records = sample_campaign(Environment::NADE, 21, 3000, cfg, 1);
  int max_l = 0;
  for (const auto& r : records) max_l = std::max(max_l, r.control_steps());
  CHECK(max_l >= 1);
  CHECK(max_l <= 10);
}

TEST_CASE("environment names") {
  CHECK(parse_environment("nde") == Environment::NDE);
  CHECK(parse_environment("nade") == Environment::NADE);
  CHECK_THROWS_AS(parse_environment("ndx"), ConfigError);
  CHECK(std::string(to_string(Environment::NADE)) == "nade");
}
