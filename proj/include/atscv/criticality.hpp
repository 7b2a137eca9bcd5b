#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "atscv/driver_models.hpp"
#include "atscv/scenario.hpp"
#include "atscv/sim_config.hpp"

namespace atscv {

/// Continues a post-cut-in scene with `follower` driving the AV (LV and BV at
/// constant speed) until the episode terminates. Appends to `trace` if given.
Termination follow_until_resolved(Scene scene, int step_index, const CarFollowingModel& follower,
                                  const ScenarioConfig& cfg, Trajectory* trace = nullptr);

/// Whether a cut-in at decision step `step_index` ends in a rear-end crash
/// when the AV is driven by `follower`.
bool cut_in_crashes(const Scene& scene, int step_index, const CarFollowingModel& follower,
                    const ScenarioConfig& cfg);

/// Sum over cut-in times of P(no cut-in before) * p_R * crash.
double accumulate_cut_in_risk(std::span<const double> p_cut_in,
                              std::span<const std::uint8_t> crash);

struct CriticalityProfile {
  ActionDistribution naturalistic;
  /// challenge[j][e]: P(S_j | s, a) for the e-th naturalistic support entry.
  std::vector<std::vector<double>> challenge;
  std::vector<double> criticality;              // C_j(s)
  std::vector<ActionDistribution> importance;   // q_j(.|s)
  ActionDistribution mixture;                   // q_alpha(.|s)
  bool is_critical = false;
};

/// The deterministic no-cut-in future of a pre-cut-in scene. Each decision
/// point carries its naturalistic distribution and, where a cut-in is
/// possible, the crash verdict of every surrogate. All criticality quantities
/// of the decision points are finite sums over this single path.
class CutInLookahead {
 public:
  struct Point {
    Scene scene;
    int step_index = 0;
    ActionDistribution naturalistic;
    std::vector<std::uint8_t> crash;  // per surrogate; all zero when p_R == 0
  };

  CutInLookahead(const Scene& start, int step_index, const SimConfig& cfg);

  std::span<const Point> points() const { return points_; }
  /// How the no-cut-in path ends (Passed or MaxSteps).
  Termination end() const { return end_; }

  /// Crash probability under surrogate j from decision point k onwards,
  /// cut-in at k included.
  double risk_from(std::size_t k, std::size_t j) const;
  /// P(S_j | s_k, follow) where follow is the BV's car-following action.
  double follow_challenge(std::size_t k, std::size_t j) const { return risk_from(k + 1, j); }
  CriticalityProfile profile(std::size_t k, const SimConfig& cfg) const;
  /// Same challenges, attached to a caller-supplied naturalistic distribution
  /// for the state at point k (e.g. computed from an unembedded relative state).
  CriticalityProfile profile(std::size_t k, const ActionDistribution& naturalistic,
                             const SimConfig& cfg) const;

 private:
  std::vector<Point> points_;
  std::vector<double> p_cut_in_;
  std::vector<std::vector<std::uint8_t>> crash_by_surrogate_;
  Termination end_ = Termination::Passed;
};

double p_lane_change(const ActionDistribution& naturalistic);

double maneuver_challenge(const Scene& scene, int step_index, const Action& a, std::size_t j,
                          const SimConfig& cfg);
double maneuver_challenge(const ScenarioState& s, const Action& a, std::size_t j,
                          const SimConfig& cfg, int step_index = 0);

double criticality(const Scene& scene, int step_index, std::size_t j, const SimConfig& cfg);
double criticality(const ScenarioState& s, std::size_t j, const SimConfig& cfg,
                   int step_index = 0);

/// Defensive importance function q_j built from the challenges of one surrogate.
ActionDistribution importance_from_challenges(const ActionDistribution& naturalistic,
                                              std::span<const double> challenge,
                                              double epsilon, double* criticality_out = nullptr);

ActionDistribution importance_fn(const Scene& scene, int step_index, std::size_t j,
                                 const SimConfig& cfg);
ActionDistribution importance_fn(const ScenarioState& s, std::size_t j, const SimConfig& cfg,
                                 int step_index = 0);

/// Equal-weight mixture of the importance functions of all surrogates.
ActionDistribution mix(std::span<const ActionDistribution> components);

CriticalityProfile mixture_importance(const Scene& scene, int step_index, const SimConfig& cfg);
CriticalityProfile mixture_importance(const ScenarioState& s, const SimConfig& cfg,
                                      int step_index = 0);

}  // namespace atscv
