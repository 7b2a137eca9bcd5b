#include "atscv/driver_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "atscv/errors.hpp"

namespace atscv {

namespace {

void require_positive(double value, std::string_view where, std::string_view field) {
  if (!(value > 0.0) || !std::isfinite(value))
    throw ConfigError(std::string(where) + "." + std::string(field) + " must be positive");
}

}  // namespace

void IdmParams::validate(std::string_view where) const {
  require_positive(v0, where, "v0");
  require_positive(time_headway, where, "time_headway");
  require_positive(a_max, where, "a_max");
  require_positive(b_comf, where, "b_comf");
  require_positive(s0, where, "s0");
  require_positive(delta, where, "delta");
  require_positive(max_decel, where, "max_decel");
}

void FvdmParams::validate(std::string_view where) const {
  require_positive(kappa, where, "kappa");
  if (!(lambda >= 0.0)) throw ConfigError(std::string(where) + ".lambda must be >= 0");
  require_positive(v_cap, where, "v_cap");
  require_positive(b_f, where, "b_f");
  require_positive(a_max, where, "a_max");
  require_positive(max_decel, where, "max_decel");
}

void MobilParams::validate() const {
  if (!(p_max > 0.0 && p_max <= 1.0)) throw ConfigError("mobil.p_max must be in (0, 1]");
  require_positive(b_safe, "mobil", "b_safe");
  if (!(gain >= 0.0)) throw ConfigError("mobil.gain must be >= 0");
  if (!(politeness >= 0.0)) throw ConfigError("mobil.politeness must be >= 0");
}

void DriverModels::validate() const {
  bv.validate("bv");
  mobil.validate();
  auto check = [](const CarFollowingModel& m, std::string_view where) {
    std::visit([&](const auto& p) { p.validate(where); }, m.params);
  };
  check(av, "av");
  if (surrogates.empty()) throw ConfigError("surrogates must name at least one model");
  for (const auto& sm : surrogates) check(sm, sm.name);
}

double idm_desired_gap(double v, double dv, const IdmParams& p) {
  const double dynamic = v * p.time_headway + v * dv / (2.0 * std::sqrt(p.a_max * p.b_comf));
  return p.s0 + std::max(0.0, dynamic);
}

double idm_accel(double v, double gap, double dv, const IdmParams& p) {
  if (!(gap > 0.0)) throw NonPositiveGapError("IDM called with gap " + std::to_string(gap));
  const double ratio = idm_desired_gap(v, dv, p) / gap;
  const double a = p.a_max * (1.0 - std::pow(v / p.v0, p.delta) - ratio * ratio);
  return std::clamp(a, -p.max_decel, p.a_max);
}

double idm_free_accel(double v, const IdmParams& p) {
  const double a = p.a_max * (1.0 - std::pow(v / p.v0, p.delta));
  return std::clamp(a, -p.max_decel, p.a_max);
}

double fvdm_optimal_velocity(double gap, const FvdmParams& p) {
  return 0.5 * p.v_cap * (std::tanh(gap / p.b_f - p.c_f) + std::tanh(p.c_f));
}

double fvdm_accel_unclipped(double v, double gap, double dv, const FvdmParams& p) {
  if (!(gap > 0.0)) throw NonPositiveGapError("FVDM called with gap " + std::to_string(gap));
  return p.kappa * (fvdm_optimal_velocity(gap, p) - v) - p.lambda * dv;
}

double fvdm_accel(double v, double gap, double dv, const FvdmParams& p) {
  return std::clamp(fvdm_accel_unclipped(v, gap, dv, p), -p.max_decel, p.a_max);
}

double CarFollowingModel::accel(double v, double gap, double dv) const {
  if (const auto* idm = std::get_if<IdmParams>(&params)) return idm_accel(v, gap, dv, *idm);
  return fvdm_accel(v, gap, dv, std::get<FvdmParams>(params));
}

CarFollowingModel make_model(std::string_view name) {
  // Surrogates differ mostly in braking capability, which is what decides a
  // cut-in crash at the short gaps of this scenario.
  if (name == "idm") {
    IdmParams p;
    p.max_decel = 2.5;
    return {"idm", p};
  }
  if (name == "fvdm1") return {"fvdm1", FvdmParams{.kappa = 2.0, .lambda = 0.5, .max_decel = 3.0}};
  if (name == "fvdm2") return {"fvdm2", FvdmParams{.kappa = 6.0, .lambda = 0.5, .max_decel = 3.5}};
  if (name == "av") {
    return {"av", IdmParams{.v0 = 14.0, .time_headway = 1.2, .a_max = 1.5, .b_comf = 2.5,
                            .s0 = 2.5, .delta = 4.0, .max_decel = 3.2}};
  }
  throw ConfigError("unknown car-following model '" + std::string(name) +
                    "' (expected idm, fvdm1, fvdm2 or av)");
}

double required_braking(double gap, double closing_speed) {
  if (!(gap > 0.0)) return std::numeric_limits<double>::infinity();
  if (closing_speed <= 0.0) return 0.0;
  return closing_speed * closing_speed / (2.0 * gap);
}

double bv_follow_accel(const ScenarioState& s, const ScenarioConfig& cfg, const IdmParams& bv) {
  // The LV is not part of the accident definition; a BV that has closed the
  // gap to it simply brakes as hard as it can.
  const double gap = lv_gap(s, cfg);
  if (!(gap > 0.0)) return -bv.max_decel;
  return idm_accel(s.v_bv, gap, -s.r1_dot, bv);
}

double follower_accel(const ScenarioState& s, const ScenarioConfig& cfg,
                      const CarFollowingModel& follower) {
  return follower.accel(s.v_av(), av_gap(s, cfg), -s.r2_dot);
}

double mobil_right_lc_prob(const ScenarioState& s, const ScenarioConfig& cfg,
                           const IdmParams& bv, const MobilParams& p) {
  if (s.phase != Phase::BeforeCutIn)
    throw WrongPhaseError("lane-change probability requested after the cut-in");

  // Safety: the AV must be able to stop behind the BV with at most b_safe.
  const double braking = required_braking(av_gap(s, cfg), -s.r2_dot);
  if (!(braking <= p.b_safe)) return 0.0;

  const double own_gain = idm_free_accel(s.v_bv, bv) - bv_follow_accel(s, cfg, bv);
  const double incentive = own_gain - p.politeness * braking + p.right_bias - p.threshold;
  return std::clamp(p.gain * incentive, 0.0, p.p_max);
}

double ActionDistribution::prob(const Action& a) const {
  for (const auto& [action, mass] : entries_)
    if (action == a) return mass;
  return 0.0;
}

double ActionDistribution::total() const {
  double sum = 0.0;
  for (const auto& entry : entries_) sum += entry.second;
  return sum;
}

ActionDistribution nde_action_dist(const ScenarioState& s, const ScenarioConfig& cfg,
                                   const DriverModels& models) {
  const double p_r = mobil_right_lc_prob(s, cfg, models.bv, models.mobil);
  const Action follow = Action::accel(bv_follow_accel(s, cfg, models.bv));
  if (p_r > 0.0)
    return ActionDistribution({{Action::right_lane_change(), p_r}, {follow, 1.0 - p_r}});
  return ActionDistribution({{follow, 1.0}});
}

}  // namespace atscv
