#include "atscv/sampling.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "atscv/errors.hpp"

namespace atscv {

const char* to_string(Environment env) { return env == Environment::NDE ? "nde" : "nade"; }

Environment parse_environment(std::string_view text) {
  if (text == "nde" || text == "NDE") return Environment::NDE;
  if (text == "nade" || text == "NADE") return Environment::NADE;
  throw ConfigError("unknown environment '" + std::string(text) + "' (expected nde or nade)");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t episode_seed(std::uint64_t root_seed, Environment env, std::uint64_t id) {
  const std::uint64_t stream = env == Environment::NDE ? 0x4e4445ULL : 0x4e414445ULL;
  return splitmix64(splitmix64(root_seed ^ (stream << 40)) + id);
}

double sample_initial_r1(Rng& rng, const ScenarioConfig& cfg) {
  return rng.uniform(cfg.initial.r1_min, cfg.initial.r1_max);
}

ScenarioState sample_initial_state(Rng& rng, const ScenarioConfig& cfg) {
  return initial_scene(cfg.initial, sample_initial_r1(rng, cfg)).state();
}

namespace {

void push_decision(Trajectory* trace, const ScenarioState& s, const Action& a) {
  if (!trace) return;
  trace->states.push_back(s);
  trace->actions.push_back(a);
}

// Performs the cut-in and lets the AV under test resolve the episode.
void finish_after_cut_in(TestRecord& rec, const Scene& scene, int k, const SimConfig& cfg,
                         Trajectory* trace) {
  push_decision(trace, scene.state(), Action::right_lane_change());
  const Scene after = step(scene, Action::right_lane_change(), Action::accel(0.0), cfg.scenario);
  rec.termination = follow_until_resolved(after, k + 1, cfg.models.av, cfg.scenario, trace);
  rec.accident = rec.termination == Termination::Accident ? 1 : 0;
}

void finish_without_cut_in(TestRecord& rec, const Scene& scene, Termination term,
                           Trajectory* trace) {
  if (trace) {
    trace->states.push_back(scene.state());
    trace->termination = term;
  }
  rec.termination = term;
  rec.accident = term == Termination::Accident ? 1 : 0;
}

}  // namespace

TestRecord sample_nde_episode(std::uint64_t id, std::uint64_t seed, const SimConfig& cfg,
                              Trajectory* trace) {
  Rng rng(seed);
  TestRecord rec;
  rec.id = id;
  rec.seed = seed;
  rec.env = Environment::NDE;
  rec.r1 = sample_initial_r1(rng, cfg.scenario);
  Scene scene = initial_scene(cfg.scenario.initial, rec.r1);

  for (int k = 0;; ++k) {
    const ScenarioState s = scene.state();
    if (const auto term = check_termination(s, k, cfg.scenario)) {
      finish_without_cut_in(rec, scene, *term, trace);
      return rec;
    }
    const ActionDistribution dist = nde_action_dist(s, cfg.scenario, cfg.models);
    const double p_r = p_lane_change(dist);
    if (p_r > 0.0 && rng.uniform() < p_r) {
      finish_after_cut_in(rec, scene, k, cfg, trace);
      return rec;
    }
    const Action follow = dist.entries().back().first;
    push_decision(trace, s, follow);
    scene = step(scene, follow, Action::accel(0.0), cfg.scenario);
  }
}

TestRecord sample_nade_episode(std::uint64_t id, std::uint64_t seed, const SimConfig& cfg,
                               Trajectory* trace) {
  Rng rng(seed);
  TestRecord rec;
  rec.id = id;
  rec.seed = seed;
  rec.env = Environment::NADE;
  rec.r1 = sample_initial_r1(rng, cfg.scenario);
  const CutInLookahead ahead(initial_scene(cfg.scenario.initial, rec.r1), 0, cfg);

  for (std::size_t k = 0; k < ahead.points().size(); ++k) {
    const auto& point = ahead.points()[k];
    const double p_r = p_lane_change(point.naturalistic);
    if (p_r <= 0.0) {
      push_decision(trace, point.scene.state(), point.naturalistic.entries().back().first);
      continue;
    }

    const CriticalityProfile profile = ahead.profile(k, cfg);
    bool cut_in = false;
    if (profile.is_critical) {
      const double q_lc = profile.mixture.entries().front().second;
      cut_in = rng.uniform() < q_lc;
      const std::size_t e = cut_in ? 0 : 1;
      CriticalMoment moment{.step = point.step_index, .lane_change = cut_in,
                            .p = point.naturalistic.entries()[e].second,
                            .q_alpha = profile.mixture.entries()[e].second, .q = {}};
      if (!(moment.q_alpha > 0.0))
        throw ZeroDensityError("sampled an action with zero mixture density");
      for (const auto& q : profile.importance) moment.q.push_back(q.entries()[e].second);
      rec.weight *= moment.p / moment.q_alpha;
      rec.log.push_back(std::move(moment));
    } else {
      cut_in = rng.uniform() < p_r;
    }

    if (cut_in) {
      finish_after_cut_in(rec, point.scene, point.step_index, cfg, trace);
      return rec;
    }
    push_decision(trace, point.scene.state(), point.naturalistic.entries().back().first);
  }

  // Reconstruct the terminal scene of the no-cut-in path.
  Scene last = initial_scene(cfg.scenario.initial, rec.r1);
  if (!ahead.points().empty()) {
    const auto& tail = ahead.points().back();
    last = step(tail.scene, tail.naturalistic.entries().back().first, Action::accel(0.0),
                cfg.scenario);
  }
  finish_without_cut_in(rec, last, ahead.end(), trace);
  return rec;
}

std::vector<TestRecord> sample_campaign(Environment env, std::uint64_t root_seed, std::size_t n,
                                        const SimConfig& cfg, unsigned workers) {
  std::vector<TestRecord> records(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    try {
      for (std::size_t i = next++; i < n; i = next++) {
        const std::uint64_t seed = episode_seed(root_seed, env, i);
        records[i] = env == Environment::NDE ? sample_nde_episode(i, seed, cfg)
                                             : sample_nade_episode(i, seed, cfg);
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = n;
    }
  };

  workers = std::max(1u, workers);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return records;
}

}  // namespace atscv
