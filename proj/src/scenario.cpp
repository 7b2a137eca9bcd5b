#include "atscv/scenario.hpp"

#include <algorithm>
#include <string>

#include "atscv/errors.hpp"

namespace atscv {

const char* to_string(Phase phase) {
  return phase == Phase::BeforeCutIn ? "before_cut_in" : "after_cut_in";
}

const char* to_string(Termination termination) {
  switch (termination) {
    case Termination::Accident: return "accident";
    case Termination::Passed: return "passed";
    case Termination::MaxSteps: return "max_steps";
  }
  return "unknown";
}

void ScenarioConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("scenario.dt must be > 0");
  if (max_steps < 1) throw ConfigError("scenario.max_steps must be >= 1");
  if (!(d_accid >= 0.0)) throw ConfigError("scenario.d_accid must be >= 0");
  if (!(vehicle_length >= 0.0)) throw ConfigError("scenario.vehicle_length must be >= 0");
  if (!(initial.r1_max >= initial.r1_min))
    throw ConfigError("scenario.r1_max must be >= scenario.r1_min");
  if (!(initial.v_bv >= 0.0)) throw ConfigError("scenario.v_bv must be >= 0");
  if (initial.v_bv + initial.r1_dot < 0.0)
    throw ConfigError("scenario.r1_dot implies a negative LV velocity");
  if (initial.v_bv - initial.r2_dot < 0.0)
    throw ConfigError("scenario.r2_dot implies a negative AV velocity");
}

ScenarioState derive_state(const VehicleState& lv, const VehicleState& bv,
                           const VehicleState& av, Phase phase) {
  return ScenarioState{
      .v_bv = bv.v,
      .r1 = lv.x - bv.x,
      .r1_dot = lv.v - bv.v,
      .r2 = bv.x - av.x,
      .r2_dot = bv.v - av.v,
      .phase = phase,
  };
}

ScenarioState Scene::state() const { return derive_state(lv, bv, av, phase); }

Scene embed(const ScenarioState& s) {
  const Lane bv_lane = s.phase == Phase::BeforeCutIn ? Lane::Left : Lane::Right;
  return Scene{
      .lv = {s.r1, Lane::Left, s.v_lv()},
      .bv = {0.0, bv_lane, s.v_bv},
      .av = {-s.r2, Lane::Right, s.v_av()},
      .phase = s.phase,
  };
}

Scene initial_scene(const InitialStateDistribution& dist, double r1) {
  return embed(ScenarioState{dist.v_bv, r1, dist.r1_dot, dist.r2, dist.r2_dot,
                             Phase::BeforeCutIn});
}

double av_gap(const ScenarioState& s, const ScenarioConfig& cfg) {
  return s.r2 - cfg.vehicle_length;
}

double lv_gap(const ScenarioState& s, const ScenarioConfig& cfg) {
  return s.r1 - cfg.vehicle_length;
}

namespace {

// Constant acceleration over one step; a vehicle that would reverse stops
// exactly instead.
VehicleState advance(VehicleState veh, double a, double dt) {
  const double a_eff = std::max(a, -veh.v / dt);
  veh.x += veh.v * dt + 0.5 * a_eff * dt * dt;
  veh.v = std::max(0.0, veh.v + a_eff * dt);
  return veh;
}

}  // namespace

Scene step(const Scene& scene, const Action& a_bv, const Action& a_av,
           const ScenarioConfig& cfg) {
  if (a_av.is_lane_change()) throw IllegalActionError("AV cannot change lanes");
  if (a_bv.is_lane_change() && scene.phase == Phase::AfterCutIn)
    throw IllegalActionError("BV has already cut in");

  Scene next = scene;
  next.lv = advance(scene.lv, 0.0, cfg.dt);
  next.bv = advance(scene.bv, a_bv.acceleration(), cfg.dt);
  next.av = advance(scene.av, a_av.acceleration(), cfg.dt);
  if (a_bv.is_lane_change()) {
    next.bv.lane = Lane::Right;
    next.phase = Phase::AfterCutIn;
  }
  return next;
}

ScenarioState step(const ScenarioState& s, const Action& a_bv, const Action& a_av,
                   const ScenarioConfig& cfg) {
  return step(embed(s), a_bv, a_av, cfg).state();
}

std::optional<Termination> check_termination(const ScenarioState& s, int step_index,
                                             const ScenarioConfig& cfg) {
  if (s.phase == Phase::AfterCutIn && av_gap(s, cfg) <= cfg.d_accid)
    return Termination::Accident;
  if (s.phase == Phase::BeforeCutIn && s.r2 < 0.0) return Termination::Passed;
  if (step_index >= cfg.max_steps) return Termination::MaxSteps;
  return std::nullopt;
}

int is_accident(const Trajectory& t) {
  if (!t.termination) throw NotTerminatedError("trajectory has not terminated");
  return *t.termination == Termination::Accident ? 1 : 0;
}

}  // namespace atscv
