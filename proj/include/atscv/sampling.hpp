#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "atscv/criticality.hpp"
#include "atscv/scenario.hpp"
#include "atscv/sim_config.hpp"

namespace atscv {

enum class Environment : std::uint8_t { NDE, NADE };

const char* to_string(Environment env);
Environment parse_environment(std::string_view text);

/// One BV decision taken from the mixture importance function.
struct CriticalMoment {
  int step = 0;
  bool lane_change = false;
  double p = 1.0;        // naturalistic density of the chosen action
  double q_alpha = 1.0;  // mixture density of the chosen action
  std::vector<double> q; // per-surrogate densities of the chosen action
};

struct TestRecord {
  std::uint64_t id = 0;
  std::uint64_t seed = 0;
  Environment env = Environment::NDE;
  int accident = 0;
  std::vector<CriticalMoment> log;
  double weight = 1.0;  // product of p / q_alpha over the log
  Termination termination = Termination::MaxSteps;
  double r1 = 0.0;      // initial leader gap

  int control_steps() const { return static_cast<int>(log.size()); }
  /// P(A|X) p(X_c) / q_alpha(X_c).
  double weighted_outcome() const { return accident ? weight : 0.0; }
};

/// Per-episode generator. 53-bit uniforms are taken directly from the engine
/// so draws do not depend on the standard library's distribution code.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::mt19937_64 engine_;
};

/// Counter-based per-episode seed; independent of scheduling.
std::uint64_t episode_seed(std::uint64_t root_seed, Environment env, std::uint64_t id);

double sample_initial_r1(Rng& rng, const ScenarioConfig& cfg);
ScenarioState sample_initial_state(Rng& rng, const ScenarioConfig& cfg);

TestRecord sample_nde_episode(std::uint64_t id, std::uint64_t seed, const SimConfig& cfg,
                              Trajectory* trace = nullptr);
TestRecord sample_nade_episode(std::uint64_t id, std::uint64_t seed, const SimConfig& cfg,
                               Trajectory* trace = nullptr);

/// Episodes 0..n-1 of one environment, fanned out over `workers` threads.
/// The output is ordered by id and does not depend on `workers`.
std::vector<TestRecord> sample_campaign(Environment env, std::uint64_t root_seed, std::size_t n,
                                        const SimConfig& cfg, unsigned workers = 1);

}  // namespace atscv
