#include <doctest.h>

#include <functional>
#include <random>

#include "atscv/criticality.hpp"
#include "atscv/errors.hpp"

using namespace atscv;

namespace {

ScenarioState initial(double r1 = 30.0) {
  return {8.0, r1, -5.0, 5.0, -5.0, Phase::BeforeCutIn};
}

// Surrogate j drives the AV after a cut-in at `scene`; true on a rear-end.
bool oracle_crash(const Scene& scene, int k, std::size_t j, const SimConfig& cfg) {
  const auto& sc = cfg.scenario;
  Scene cur = step(scene, Action::right_lane_change(), Action::accel(0.0), sc);
  for (int i = k + 1; i <= sc.max_steps; ++i) {
    const ScenarioState s = cur.state();
    if (s.r2 - sc.vehicle_length <= sc.d_accid) return true;
    if (i == sc.max_steps) return false;
    const double a = cfg.models.surrogates[j].accel(s.v_av(), s.r2 - sc.vehicle_length, -s.r2_dot);
    cur = step(cur, Action::accel(0.0), Action::accel(a), sc);
  }
  return false;
}

// Recursion over the cut-in tree: every pre-cut-in node branches into its
// naturalistic actions; a cut-in leaf is resolved by simulation.
double oracle_challenge(const Scene& scene, int k, const Action& a, std::size_t j,
                        const SimConfig& cfg) {
  const ScenarioState s = scene.state();
  if (s.r2 < 0.0) return 0.0;
  if (a.is_lane_change()) return oracle_crash(scene, k, j, cfg) ? 1.0 : 0.0;
  const Scene next = step(scene, a, Action::accel(0.0), cfg.scenario);
  if (check_termination(next.state(), k + 1, cfg.scenario)) return 0.0;
  double total = 0.0;
  const auto dist = nde_action_dist(next.state(), cfg.scenario, cfg.models);
  for (const auto& [b, p] : dist.entries())
    total += p * oracle_challenge(next, k + 1, b, j, cfg);
  return total;
}

void check_distribution(const ActionDistribution& q, const ActionDistribution& p) {
  REQUIRE(q.support_size() == p.support_size());
  double sum = 0.0;
  for (std::size_t e = 0; e < q.support_size(); ++e) {
    CHECK(q.entries()[e].first == p.entries()[e].first);
    CHECK(q.entries()[e].second >= 0.0);
    if (p.entries()[e].second > 0.0) CHECK(q.entries()[e].second > 0.0);
    sum += q.entries()[e].second;
  }
  CHECK(std::abs(sum - 1.0) <= 1e-12);
}

}  // namespace

TEST_CASE("challenge is zero once the BV has fallen behind") {
  const SimConfig cfg;
  auto s = initial();
  s.r2 = -0.5;
  for (std::size_t j = 0; j < cfg.num_surrogates(); ++j) {
    CHECK(maneuver_challenge(s, Action::right_lane_change(), j, cfg) == 0.0);
    CHECK(maneuver_challenge(s, Action::accel(0.0), j, cfg) == 0.0);
  }
}

TEST_CASE("a cut-in into an immediate overlap always crashes") {
  const SimConfig cfg;
  auto s = initial();
  s.r2 = 0.3;  // gap after one step: 0.3 - 0.5 < 0
  for (std::size_t j = 0; j < cfg.num_surrogates(); ++j)
    CHECK(maneuver_challenge(s, Action::right_lane_change(), j, cfg) == 1.0);
}

TEST_CASE("follow challenge equals exhaustive enumeration of the cut-in tree") {
  SimConfig cfg;
  for (int horizon : {12, 40, 300}) {
    cfg.scenario.max_steps = horizon;
    for (double r1 : {30.0, 30.7, 31.4, 32.0}) {
      const Scene scene = embed(initial(r1));
      const auto dist = nde_action_dist(scene.state(), cfg.scenario, cfg.models);
      for (std::size_t j = 0; j < cfg.num_surrogates(); ++j) {
        for (const auto& [a, p] : dist.entries()) {
          const double expected = oracle_challenge(scene, 0, a, j, cfg);
          CHECK(maneuver_challenge(scene, 0, a, j, cfg) ==
                doctest::Approx(expected).epsilon(1e-14));
          CHECK(expected >= 0.0);
          CHECK(expected <= 1.0);
        }
      }
    }
  }
}

TEST_CASE("surrogates disagree at the reference initial state") {
  const SimConfig cfg;
  const Scene scene = embed(initial(31.0));
  std::vector<double> crash;
  for (std::size_t j = 0; j < cfg.num_surrogates(); ++j)
    crash.push_back(maneuver_challenge(scene, 0, Action::right_lane_change(), j, cfg));
  // The softest braker crashes where the hardest one does not.
  CHECK(crash.front() >= crash.back());
  double any = 0.0;
  for (std::size_t j = 0; j < cfg.num_surrogates(); ++j)
    any += criticality(scene, 0, j, cfg);
  CHECK(any > 0.0);
}

TEST_CASE("criticality is the exposure-weighted sum of challenges") {
  const SimConfig cfg;
  for (double r1 : {30.0, 31.0, 32.0}) {
    const Scene scene = embed(initial(r1));
    const auto dist = nde_action_dist(scene.state(), cfg.scenario, cfg.models);
    for (std::size_t j = 0; j < cfg.num_surrogates(); ++j) {
      double expected = 0.0;
      for (const auto& [a, p] : dist.entries())
        expected += p * maneuver_challenge(scene, 0, a, j, cfg);
      const double c = criticality(scene, 0, j, cfg);
      CHECK(c == doctest::Approx(expected).epsilon(1e-15));
      CHECK(c >= 0.0);
      CHECK(c <= 1.0);
    }
  }
}

TEST_CASE("exposure weighting hides an unreachable crash") {
  const ActionDistribution p({{Action::accel(0.5), 1.0}});
  const std::vector<double> challenge{0.0};
  double c = -1.0;
  const auto q = importance_from_challenges(p, challenge, 0.1, &c);
  CHECK(c == 0.0);
  CHECK(q.entries() == p.entries());
}

TEST_CASE("importance function arithmetic") {
  const ActionDistribution p({{Action::right_lane_change(), 0.1}, {Action::accel(0.3), 0.9}});
  const std::vector<double> crash_only{1.0, 0.0};
  double c = 0.0;
  const auto q = importance_from_challenges(p, crash_only, 0.1, &c);
  CHECK(c == doctest::Approx(0.1));
  CHECK(q.prob(Action::right_lane_change()) == doctest::Approx(0.91));
  CHECK(q.prob(Action::accel(0.3)) == doctest::Approx(0.09));

  const std::vector<double> none{0.0, 0.0};
  CHECK(importance_from_challenges(p, none, 0.1).entries() == p.entries());
}

TEST_CASE("mixture with one critical surrogate") {
  const ActionDistribution p({{Action::right_lane_change(), 0.1}, {Action::accel(0.3), 0.9}});
  const std::vector<double> crash_only{1.0, 0.0};
  const auto q1 = importance_from_challenges(p, crash_only, 0.1);
  const std::vector<ActionDistribution> parts{q1, p, p};
  const auto mixed = mix(parts);
  CHECK(mixed.prob(Action::right_lane_change()) ==
        doctest::Approx(0.91 / 3.0 + 2.0 * 0.1 / 3.0).epsilon(1e-15));
  CHECK(mixed.prob(Action::accel(0.3)) ==
        doctest::Approx(0.09 / 3.0 + 2.0 * 0.9 / 3.0).epsilon(1e-15));
}

TEST_CASE("quiet states leave the naturalistic distribution untouched") {
  const SimConfig cfg;
  auto s = initial();
  s.r2 = 0.5;  // cut-in vetoed, and the BV passes behind the AV at once
  const auto profile = mixture_importance(s, cfg);
  CHECK_FALSE(profile.is_critical);
  CHECK(profile.mixture.entries() == profile.naturalistic.entries());
  for (const auto& q : profile.importance) CHECK(q.entries() == profile.naturalistic.entries());
}

TEST_CASE("criticality needs the pre-cut-in phase") {
  const SimConfig cfg;
  auto s = initial();
  s.phase = Phase::AfterCutIn;
  CHECK_THROWS_AS(mixture_importance(s, cfg), WrongPhaseError);
  CHECK_THROWS_AS(criticality(s, 0, cfg), WrongPhaseError);
  CHECK_THROWS_AS(maneuver_challenge(s, Action::accel(0.0), 0, cfg), WrongPhaseError);
  CHECK_THROWS_AS(importance_fn(s, 0, cfg), WrongPhaseError);
}

TEST_CASE("the lookahead reproduces every per-state profile along the path") {
  const SimConfig cfg;
  for (double r1 : {30.0, 30.9, 31.8}) {
    const CutInLookahead ahead(embed(initial(r1)), 0, cfg);
    REQUIRE_FALSE(ahead.points().empty());
    for (std::size_t k = 0; k < ahead.points().size(); ++k) {
      const auto& point = ahead.points()[k];
      const auto from_path = ahead.profile(k, cfg);
      const auto direct = mixture_importance(point.scene, point.step_index, cfg);
      CHECK(from_path.is_critical == direct.is_critical);
      REQUIRE(from_path.mixture.support_size() == direct.mixture.support_size());
      for (std::size_t e = 0; e < direct.mixture.support_size(); ++e)
        CHECK(from_path.mixture.entries()[e].second == direct.mixture.entries()[e].second);
      for (std::size_t j = 0; j < cfg.num_surrogates(); ++j)
        for (std::size_t e = 0; e < direct.naturalistic.support_size(); ++e)
          CHECK(from_path.challenge[j][e] ==
                doctest::Approx(maneuver_challenge(point.scene, point.step_index,
                                                   direct.naturalistic.entries()[e].first, j,
                                                   cfg))
                    .epsilon(1e-15));
    }
  }
}

TEST_CASE("importance functions are valid, defensive distributions") {
  const SimConfig cfg;
  std::mt19937_64 gen(23);
  std::uniform_real_distribution<double> v(2.0, 14.0), r1(5.0, 40.0), r1d(-8.0, 4.0),
      r2(0.0, 12.0), r2d(-8.0, 1.0);
  int critical = 0;
  for (int i = 0; i < 500; ++i) {
    const ScenarioState s{v(gen), r1(gen), r1d(gen), r2(gen), r2d(gen), Phase::BeforeCutIn};
    const auto profile = mixture_importance(s, cfg);
    check_distribution(profile.naturalistic, profile.naturalistic);
    check_distribution(profile.mixture, profile.naturalistic);
    bool any = false;
    for (std::size_t j = 0; j < cfg.num_surrogates(); ++j) {
      const auto& q = profile.importance[j];
      check_distribution(q, profile.naturalistic);
      if (profile.criticality[j] > 0.0) {
        any = true;
        for (std::size_t e = 0; e < q.support_size(); ++e)
          CHECK(q.entries()[e].second >=
                cfg.epsilon * profile.naturalistic.entries()[e].second * (1.0 - 1e-12));
      }
    }
    CHECK(any == profile.is_critical);
    critical += profile.is_critical;
    for (std::size_t e = 0; e < profile.mixture.support_size(); ++e) {
      double avg = 0.0;
      for (const auto& q : profile.importance) avg += q.entries()[e].second / 3.0;
      CHECK(std::abs(avg - profile.mixture.entries()[e].second) <= 1e-12);
    }
  }
  CHECK(critical > 0);
}
