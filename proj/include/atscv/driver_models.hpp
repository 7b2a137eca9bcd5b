#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "atscv/scenario.hpp"

namespace atscv {

/// Intelligent driver model.
struct IdmParams {
  double v0 = 15.0;            // desired speed (m/s)
  double time_headway = 1.0;   // T (s)
  double a_max = 2.0;          // maximum acceleration (m/s^2)
  double b_comf = 2.0;         // comfortable deceleration (m/s^2)
  double s0 = 2.0;             // jam distance (m)
  double delta = 4.0;          // acceleration exponent
  double max_decel = 4.0;      // braking capability used to clip the output (m/s^2)

  void validate(std::string_view where) const;
};

/// Full velocity difference model with a tanh optimal-velocity function
/// V(gap) = v_cap/2 * (tanh(gap/b_f - c_f) + tanh(c_f)).
struct FvdmParams {
  double kappa = 2.0;      // sensitivity (1/s)
  double lambda = 0.5;     // velocity-difference gain (1/s)
  double v_cap = 15.0;     // (m/s)
  double b_f = 10.0;       // (m)
  double c_f = 2.0;
  double a_max = 2.0;      // (m/s^2)
  double max_decel = 4.0;  // (m/s^2)

  void validate(std::string_view where) const;
};

/// Stochastic MOBIL for the BV's right lane change.
struct MobilParams {
  double politeness = 0.5;
  double threshold = 0.1;     // switching threshold (m/s^2)
  double right_bias = 0.65;   // keep-right bias favouring the right lane (m/s^2)
  double b_safe = 4.0;        // braking the AV may be asked for (m/s^2)
  double gain = 0.05;         // incentive to probability gain (s^2/m)
  double p_max = 0.1;

  void validate() const;
};

double idm_desired_gap(double v, double dv, const IdmParams& p);

/// `dv` is the closing speed v - v_leader. Throws NonPositiveGapError for gap <= 0.
double idm_accel(double v, double gap, double dv, const IdmParams& p);

/// IDM on an empty road.
double idm_free_accel(double v, const IdmParams& p);

double fvdm_optimal_velocity(double gap, const FvdmParams& p);
double fvdm_accel_unclipped(double v, double gap, double dv, const FvdmParams& p);
double fvdm_accel(double v, double gap, double dv, const FvdmParams& p);

/// A named car-following law. Used both for the AV under test and for the
/// surrogate models that stand in for it.
struct CarFollowingModel {
  std::string name;
  std::variant<IdmParams, FvdmParams> params;

  double accel(double v, double gap, double dv) const;
};

/// Presets: "idm", "fvdm1", "fvdm2" (surrogates) and "av" (default AV).
CarFollowingModel make_model(std::string_view name);

/// Everything that drives the behaviour of the three vehicles.
struct DriverModels {
  IdmParams bv = {};  // naturalistic BV car following
  MobilParams mobil = {};
  CarFollowingModel av = make_model("av");
  std::vector<CarFollowingModel> surrogates = {make_model("idm"), make_model("fvdm1"),
                                               make_model("fvdm2")};

  void validate() const;
};

/// Constant deceleration the AV needs to avoid hitting a BV that cuts in at
/// `gap` while the AV closes in at `closing_speed`.
double required_braking(double gap, double closing_speed);

/// BV's car-following acceleration behind LV.
double bv_follow_accel(const ScenarioState& s, const ScenarioConfig& cfg, const IdmParams& bv);

/// AV acceleration when following BV after the cut-in.
double follower_accel(const ScenarioState& s, const ScenarioConfig& cfg,
                      const CarFollowingModel& follower);

/// Probability p_R that the BV cuts in at state s.
double mobil_right_lc_prob(const ScenarioState& s, const ScenarioConfig& cfg,
                           const IdmParams& bv, const MobilParams& p);

/// Probability mass over at most two actions.
class ActionDistribution {
 public:
  ActionDistribution() = default;
  explicit ActionDistribution(std::vector<std::pair<Action, double>> entries)
      : entries_(std::move(entries)) {}

  const std::vector<std::pair<Action, double>>& entries() const { return entries_; }
  std::size_t support_size() const { return entries_.size(); }
  double prob(const Action& a) const;
  double total() const;

 private:
  std::vector<std::pair<Action, double>> entries_;
};

/// Naturalistic BV behaviour: cut in with p_R, otherwise follow LV by IDM.
/// The lane change, when possible, is always the first entry.
ActionDistribution nde_action_dist(const ScenarioState& s, const ScenarioConfig& cfg,
                                   const DriverModels& models);

}  // namespace atscv
