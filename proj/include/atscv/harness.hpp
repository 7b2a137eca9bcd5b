#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "atscv/config.hpp"
#include "atscv/estimators.hpp"
#include "atscv/sampling.hpp"

namespace atscv {

struct OracleResult {
  double mu = 0.0;
  /// Probability that the BV never cuts in and the episode hits MaxSteps.
  double no_cut_in_max_steps_mass = 0.0;
  /// Probability of a cut-in after which the AV is still closing in on the
  /// BV when MaxSteps is reached.
  double open_after_cut_in_mass = 0.0;
  std::size_t leaves = 0;
  std::size_t bins = 0;
};

inline constexpr std::size_t kOracleLeafBudget = 10'000'000;

/// Exact accident rate by enumerating the cut-in tree for every initial-gap
/// bin (midpoint rule over equal-mass bins). Throws BudgetExceededError when
/// bins * (max_steps + 1) exceeds `max_leaves`.
OracleResult brute_force_mu(const SimConfig& cfg, std::size_t bins = 64,
                            std::size_t max_leaves = kOracleLeafBudget);

struct MethodResult {
  Method method = Method::NDE;
  Estimate estimate;
  std::optional<double> rhw;
  std::optional<std::size_t> tests_to_threshold;
  std::vector<ConvergencePoint> convergence;
};

struct OracleCheck {
  Method method = Method::NDE;
  double std_errors = 0.0;  // |mu_hat - mu| / se
  bool within_3se = false;
};

struct CampaignResult {
  Environment env = Environment::NADE;
  std::uint64_t seed = 0;
  std::size_t num_surrogates = 0;
  std::vector<TestRecord> records;
  std::vector<MethodResult> methods;
  std::vector<AdjustedPoint> adjusted;  // NADE campaigns only
  std::optional<OracleResult> oracle;
  std::vector<OracleCheck> oracle_checks;
  std::optional<double> nade_over_atscv;

  const MethodResult* find(Method method) const;
};

/// Runs every estimator that applies to `env` on the records.
CampaignResult analyze(Environment env, std::uint64_t seed, std::vector<TestRecord> records,
                       const CampaignConfig& cfg);

/// Samples cfg.env with its episode budget and analyzes the records.
CampaignResult run_campaign(const CampaignConfig& cfg);

/// a / b, when both counts exist.
std::optional<double> acceleration_factor(std::optional<std::size_t> slow,
                                          std::optional<std::size_t> fast);

struct ReplicationRow {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::optional<std::size_t> nde;
  std::optional<std::size_t> nade;
  std::optional<std::size_t> atscv;
  std::optional<double> mu_nde;
  double mu_nade = 0.0;
  double mu_atscv = 0.0;
};

struct FactorStats {
  std::size_t count = 0;  // replications where both counts exist
  double median = 0.0;
  double mean = 0.0;
  double sd = 0.0;
};

struct ReplicationStudy {
  std::vector<ReplicationRow> rows;
  std::optional<FactorStats> nde_over_nade;
  std::optional<FactorStats> nade_over_atscv;
  /// Replications where ATSCV reached the threshold and NADE needed more
  /// tests (or never reached it).
  std::size_t atscv_fewer = 0;
};

std::optional<FactorStats> factor_stats(const std::vector<double>& factors);

/// Replication r = 1..R uses root seed cfg.seed + r for its campaigns.
ReplicationStudy run_replications(const CampaignConfig& cfg);

}  // namespace atscv
