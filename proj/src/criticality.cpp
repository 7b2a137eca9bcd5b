#include "atscv/criticality.hpp"

#include <algorithm>

#include "atscv/errors.hpp"

namespace atscv {

void SimConfig::validate() const {
  scenario.validate();
  models.validate();
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ConfigError("nade.epsilon must be in (0, 1]");
}

Termination follow_until_resolved(Scene scene, int step_index, const CarFollowingModel& follower,
                                  const ScenarioConfig& cfg, Trajectory* trace) {
  for (;;) {
    const ScenarioState s = scene.state();
    if (trace) trace->states.push_back(s);
    if (const auto term = check_termination(s, step_index, cfg)) {
      if (trace) trace->termination = term;
      return *term;
    }
    const Action a_av = Action::accel(follower_accel(s, cfg, follower));
    const Action a_bv = Action::accel(0.0);
    if (trace) trace->actions.push_back(a_bv);
    scene = step(scene, a_bv, a_av, cfg);
    ++step_index;
  }
}

bool cut_in_crashes(const Scene& scene, int step_index, const CarFollowingModel& follower,
                    const ScenarioConfig& cfg) {
  const Scene after = step(scene, Action::right_lane_change(), Action::accel(0.0), cfg);
  return follow_until_resolved(after, step_index + 1, follower, cfg) == Termination::Accident;
}

double accumulate_cut_in_risk(std::span<const double> p_cut_in,
                              std::span<const std::uint8_t> crash) {
  double survival = 1.0;
  double risk = 0.0;
  for (std::size_t i = 0; i < p_cut_in.size(); ++i) {
    if (crash[i]) risk += survival * p_cut_in[i];
    survival *= 1.0 - p_cut_in[i];
  }
  return risk;
}

double p_lane_change(const ActionDistribution& naturalistic) {
  return naturalistic.prob(Action::right_lane_change());
}

CutInLookahead::CutInLookahead(const Scene& start, int step_index, const SimConfig& cfg)
    : crash_by_surrogate_(cfg.num_surrogates()) {
  if (start.phase != Phase::BeforeCutIn) throw WrongPhaseError("lookahead needs a pre-cut-in scene");
  const auto& sc = cfg.scenario;
  Scene scene = start;
  for (int k = step_index;; ++k) {
    const ScenarioState s = scene.state();
    if (const auto term = check_termination(s, k, sc)) {
      end_ = *term;
      break;
    }
    Point point{scene, k, nde_action_dist(s, sc, cfg.models), {}};
    const double p = p_lane_change(point.naturalistic);
    point.crash.assign(cfg.num_surrogates(), 0);
    if (p > 0.0) {
      for (std::size_t j = 0; j < cfg.num_surrogates(); ++j)
        point.crash[j] = cut_in_crashes(scene, k, cfg.models.surrogates[j], sc) ? 1 : 0;
    }
    for (std::size_t j = 0; j < cfg.num_surrogates(); ++j)
      crash_by_surrogate_[j].push_back(point.crash[j]);
    p_cut_in_.push_back(p);

    const Action follow = point.naturalistic.entries().back().first;
    points_.push_back(std::move(point));
    scene = step(scene, follow, Action::accel(0.0), sc);
  }
}

double CutInLookahead::risk_from(std::size_t k, std::size_t j) const {
  const std::size_t from = std::min(k, p_cut_in_.size());
  return accumulate_cut_in_risk(std::span(p_cut_in_).subspan(from),
                                std::span(crash_by_surrogate_[j]).subspan(from));
}

ActionDistribution importance_from_challenges(const ActionDistribution& naturalistic,
                                              std::span<const double> challenge,
                                              double epsilon, double* criticality_out) {
  const auto& entries = naturalistic.entries();
  std::vector<double> maneuver(entries.size());
  double c = 0.0;
  for (std::size_t e = 0; e < entries.size(); ++e) {
    maneuver[e] = challenge[e] * entries[e].second;
    c += maneuver[e];
  }
  if (criticality_out) *criticality_out = c;
  if (!(c > 0.0)) return naturalistic;

  std::vector<std::pair<Action, double>> q;
  q.reserve(entries.size());
  for (std::size_t e = 0; e < entries.size(); ++e)
    q.emplace_back(entries[e].first,
                   std::min(1.0, epsilon * entries[e].second + (1.0 - epsilon) * maneuver[e] / c));
  return ActionDistribution(std::move(q));
}

ActionDistribution mix(std::span<const ActionDistribution> components) {
  const double alpha = 1.0 / static_cast<double>(components.size());
  const auto& first = components.front().entries();
  std::vector<std::pair<Action, double>> q;
  q.reserve(first.size());
  for (std::size_t e = 0; e < first.size(); ++e) {
    double mass = 0.0;
    for (const auto& component : components) mass += alpha * component.entries()[e].second;
    q.emplace_back(first[e].first, std::min(1.0, mass));
  }
  return ActionDistribution(std::move(q));
}

namespace {

CriticalityProfile assemble_profile(ActionDistribution naturalistic,
                                    std::vector<std::vector<double>> challenge,
                                    const SimConfig& cfg) {
  CriticalityProfile profile;
  profile.naturalistic = std::move(naturalistic);
  profile.challenge = std::move(challenge);
  for (const auto& ch : profile.challenge) {
    double c = 0.0;
    profile.importance.push_back(
        importance_from_challenges(profile.naturalistic, ch, cfg.epsilon, &c));
    profile.criticality.push_back(c);
    if (c > 0.0) profile.is_critical = true;
  }
  profile.mixture = mix(profile.importance);
  return profile;
}

void require_pre_cut_in(const Scene& scene) {
  if (scene.phase != Phase::BeforeCutIn)
    throw WrongPhaseError("criticality is only defined before the cut-in");
}

}  // namespace

CriticalityProfile CutInLookahead::profile(std::size_t k, const SimConfig& cfg) const {
  return profile(k, points_.at(k).naturalistic, cfg);
}

CriticalityProfile CutInLookahead::profile(std::size_t k, const ActionDistribution& naturalistic,
                                           const SimConfig& cfg) const {
  const Point& point = points_.at(k);
  // Crash flags are only simulated where the lookahead itself saw a cut-in chance.
  const bool have_crash = p_cut_in_[k] > 0.0;
  std::vector<std::vector<double>> challenge(cfg.num_surrogates());
  for (std::size_t j = 0; j < cfg.num_surrogates(); ++j) {
    for (const auto& [action, mass] : naturalistic.entries()) {
      (void)mass;
      if (!action.is_lane_change()) {
        challenge[j].push_back(follow_challenge(k, j));
      } else if (have_crash) {
        challenge[j].push_back(double(point.crash[j]));
      } else {
        const auto& follower = cfg.models.surrogates[j];
        challenge[j].push_back(
            cut_in_crashes(point.scene, point.step_index, follower, cfg.scenario) ? 1.0 : 0.0);
      }
    }
  }
  return assemble_profile(naturalistic, std::move(challenge), cfg);
}

double maneuver_challenge(const Scene& scene, int step_index, const Action& a, std::size_t j,
                          const SimConfig& cfg) {
  require_pre_cut_in(scene);
  if (scene.state().r2 < 0.0) return 0.0;
  const auto& follower = cfg.models.surrogates.at(j);
  if (a.is_lane_change())
    return cut_in_crashes(scene, step_index, follower, cfg.scenario) ? 1.0 : 0.0;

  const Scene next = step(scene, a, Action::accel(0.0), cfg.scenario);
  return CutInLookahead(next, step_index + 1, cfg).risk_from(0, j);
}

double maneuver_challenge(const ScenarioState& s, const Action& a, std::size_t j,
                          const SimConfig& cfg, int step_index) {
  return maneuver_challenge(embed(s), step_index, a, j, cfg);
}

double criticality(const Scene& scene, int step_index, std::size_t j, const SimConfig& cfg) {
  require_pre_cut_in(scene);
  const auto dist = nde_action_dist(scene.state(), cfg.scenario, cfg.models);
  double c = 0.0;
  for (const auto& [action, mass] : dist.entries())
    c += maneuver_challenge(scene, step_index, action, j, cfg) * mass;
  return c;
}

double criticality(const ScenarioState& s, std::size_t j, const SimConfig& cfg, int step_index) {
  const Scene scene = embed(s);
  require_pre_cut_in(scene);
  const auto dist = nde_action_dist(s, cfg.scenario, cfg.models);
  double c = 0.0;
  for (const auto& [action, mass] : dist.entries())
    c += maneuver_challenge(scene, step_index, action, j, cfg) * mass;
  return c;
}

namespace {

CriticalityProfile quiet_profile(ActionDistribution dist, const SimConfig& cfg) {
  std::vector<std::vector<double>> challenge(cfg.num_surrogates(),
                                             std::vector<double>(dist.support_size(), 0.0));
  return assemble_profile(std::move(dist), std::move(challenge), cfg);
}

}  // namespace

CriticalityProfile mixture_importance(const Scene& scene, int step_index, const SimConfig& cfg) {
  require_pre_cut_in(scene);
  const CutInLookahead ahead(scene, step_index, cfg);
  // A terminal state offers no decision; it is never critical.
  if (ahead.points().empty())
    return quiet_profile(nde_action_dist(scene.state(), cfg.scenario, cfg.models), cfg);
  return ahead.profile(0, cfg);
}

// The embedding does not reproduce relative velocities bit for bit, so the
// naturalistic distribution is taken from the caller's state directly.
CriticalityProfile mixture_importance(const ScenarioState& s, const SimConfig& cfg,
                                      int step_index) {
  const Scene scene = embed(s);
  require_pre_cut_in(scene);
  auto dist = nde_action_dist(s, cfg.scenario, cfg.models);
  const CutInLookahead ahead(scene, step_index, cfg);
  if (ahead.points().empty()) return quiet_profile(std::move(dist), cfg);
  return ahead.profile(0, dist, cfg);
}

ActionDistribution importance_fn(const Scene& scene, int step_index, std::size_t j,
                                 const SimConfig& cfg) {
  return mixture_importance(scene, step_index, cfg).importance.at(j);
}

ActionDistribution importance_fn(const ScenarioState& s, std::size_t j, const SimConfig& cfg,
                                 int step_index) {
  return mixture_importance(s, cfg, step_index).importance.at(j);
}

}  // namespace atscv
