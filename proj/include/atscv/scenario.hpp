#pragma once

// Overtaking scenario: a leading vehicle (LV) cruising in the left lane, a
// background vehicle (BV) following it, and the automated vehicle under test
// (AV) approaching from behind in the right lane. The only decision maker
// before the cut-in is the BV; afterwards the AV reacts to the BV in front.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace atscv {

enum class Lane : std::uint8_t { Right = 0, Left = 1 };
enum class Phase : std::uint8_t { BeforeCutIn, AfterCutIn };
enum class Termination : std::uint8_t { Accident, Passed, MaxSteps };

const char* to_string(Phase phase);
const char* to_string(Termination termination);

struct VehicleState {
  double x = 0.0;  // longitudinal position (m)
  Lane lane = Lane::Right;
  double v = 0.0;  // longitudinal velocity (m/s), never negative

  bool operator==(const VehicleState&) const = default;
};

/// Relative state (v_BV, R1, R1_dot, R2, R2_dot) plus the cut-in phase.
struct ScenarioState {
  double v_bv = 0.0;
  double r1 = 0.0;      // x_LV - x_BV
  double r1_dot = 0.0;  // v_LV - v_BV
  double r2 = 0.0;      // x_BV - x_AV
  double r2_dot = 0.0;  // v_BV - v_AV
  Phase phase = Phase::BeforeCutIn;

  double v_lv() const { return v_bv + r1_dot; }
  double v_av() const { return v_bv - r2_dot; }

  bool operator==(const ScenarioState&) const = default;
};

class Action {
 public:
  enum class Kind : std::uint8_t { Accel, RightLaneChange };

  static Action accel(double a) { return Action(Kind::Accel, a); }
  static Action right_lane_change() { return Action(Kind::RightLaneChange, 0.0); }

  Kind kind() const { return kind_; }
  bool is_lane_change() const { return kind_ == Kind::RightLaneChange; }
  /// Longitudinal acceleration applied during the step (0 for a lane change).
  double acceleration() const { return accel_; }

  bool operator==(const Action&) const = default;

 private:
  Action(Kind kind, double a) : kind_(kind), accel_(a) {}

  Kind kind_;
  double accel_;
};

struct InitialStateDistribution {
  double v_bv = 8.0;
  double r1_min = 30.0;
  double r1_max = 32.0;
  double r1_dot = -5.0;
  double r2 = 5.0;
  double r2_dot = -5.0;
};

struct ScenarioConfig {
  double dt = 0.1;
  int max_steps = 300;
  double d_accid = 0.0;
  /// Subtracted from R1 and R2 to obtain bumper-to-bumper gaps. Zero means
  /// positions are already measured bumper to bumper.
  double vehicle_length = 0.0;
  InitialStateDistribution initial;

  void validate() const;
};

/// Absolute three-vehicle configuration. This is the state that is actually
/// integrated; ScenarioState is always derived from it.
struct Scene {
  VehicleState lv;
  VehicleState bv;
  VehicleState av;
  Phase phase = Phase::BeforeCutIn;

  ScenarioState state() const;
  bool operator==(const Scene&) const = default;
};

ScenarioState derive_state(const VehicleState& lv, const VehicleState& bv,
                           const VehicleState& av, Phase phase);

/// Places BV at the origin and reconstructs LV and AV from the relative state.
Scene embed(const ScenarioState& s);

/// Scene for the initial relative state with the given leader gap R1.
Scene initial_scene(const InitialStateDistribution& dist, double r1);

/// Bumper gap between AV and BV.
double av_gap(const ScenarioState& s, const ScenarioConfig& cfg);
/// Bumper gap between BV and LV.
double lv_gap(const ScenarioState& s, const ScenarioConfig& cfg);

/// Advances every vehicle by one time step. LV always cruises. A right lane
/// change moves BV to the right lane within the step at constant speed.
Scene step(const Scene& scene, const Action& a_bv, const Action& a_av,
           const ScenarioConfig& cfg);
ScenarioState step(const ScenarioState& s, const Action& a_bv, const Action& a_av,
                   const ScenarioConfig& cfg);

/// Checked in order Accident, Passed, MaxSteps; nullopt means the episode goes on.
std::optional<Termination> check_termination(const ScenarioState& s, int step_index,
                                             const ScenarioConfig& cfg);

/// x = (s_0, a_0, ..., s_m). `actions` holds the BV action taken at each
/// non-terminal state, so states.size() == actions.size() + 1.
struct Trajectory {
  std::vector<ScenarioState> states;
  std::vector<Action> actions;
  std::optional<Termination> termination;
};

int is_accident(const Trajectory& t);

}  // namespace atscv
