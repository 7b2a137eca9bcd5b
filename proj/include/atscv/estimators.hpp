#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "atscv/sampling.hpp"

namespace atscv {

enum class Method : std::uint8_t { NDE, NADE, ATSCV };

const char* to_string(Method method);
Method parse_method(std::string_view text);

struct GroupContribution {
  int control_steps = 0;
  bool overflow = false;   // holds every record with more than L control steps
  bool adjusted = false;   // control variates were actually fitted
  std::size_t count = 0;
  std::size_t regressors = 0;
  double mu = 0.0;         // count * eta / n
  double variance = 0.0;   // (count/n)^2 * s^2 / count
  double y_variance = 0.0;         // sample variance of the responses
  double adjusted_variance = 0.0;  // sample variance of eta + residual
};

struct Estimate {
  Method method = Method::NDE;
  double mu = 0.0;
  double variance = 0.0;
  std::size_t n = 0;
  std::vector<GroupContribution> groups;
};

struct AtscvOptions {
  int max_control_steps = 10;  // L
  bool force_zero_beta = false;
};

Estimate estimate_nde(std::span<const TestRecord> records);
Estimate estimate_nade(std::span<const TestRecord> records, const AtscvOptions& opts = {});

/// Responses and centered sparse-control-variate design of one group.
struct GroupedRegression {
  int control_steps = 0;
  Eigen::VectorXd y;
  Eigen::MatrixXd z;  // (J-1)^l columns, each centered
  std::vector<std::uint64_t> ids;
};

/// (J-1)^l; throws Error if the count would not fit in memory.
std::size_t regressor_count(std::size_t num_surrogates, int control_steps);

/// Uncentered regressors prod_k q_{j_k}/q_alpha over the log, multi-indices
/// in lexicographic order with j_1 most significant.
Eigen::RowVectorXd design_row(const TestRecord& record, std::size_t num_surrogates);

GroupedRegression build_group(std::span<const TestRecord> records, int control_steps,
                              std::size_t num_surrogates);

struct RegressionFit {
  Eigen::VectorXd beta;
  double intercept = 0.0;
  Eigen::VectorXd residuals;
  bool fallback = false;  // too few rows: beta fixed at zero
};

RegressionFit mlr_fit(const GroupedRegression& g);

struct AdjustedPoint {
  std::uint64_t id = 0;
  int control_steps = 0;
  double unadjusted = 0.0;
  double adjusted = 0.0;
};

struct AtscvResult {
  Estimate estimate;
  std::vector<AdjustedPoint> points;  // same order as the input records
};

AtscvResult atscv_fit(std::span<const TestRecord> records, const AtscvOptions& opts = {});
Estimate estimate_atscv(std::span<const TestRecord> records, const AtscvOptions& opts = {});

Estimate estimate(Method method, std::span<const TestRecord> records,
                  const AtscvOptions& opts = {});

/// z_gamma = Phi^{-1}(1 - gamma/2).
double z_quantile(double gamma);

/// Relative half-width; throws ZeroEstimateError when mu is 0.
double rhw(const Estimate& e, double gamma);

struct ConvergencePoint {
  std::size_t n = 0;
  double mu = 0.0;
  double variance = 0.0;
  std::optional<double> rhw;  // undefined for n < 2 or mu == 0
};

/// The method's estimate on every prefix of the record stream.
std::vector<ConvergencePoint> convergence_series(std::span<const TestRecord> records,
                                                 Method method, double gamma,
                                                 const AtscvOptions& opts = {});

/// Smallest n whose RHW stays <= threshold for `window` consecutive prefixes.
std::optional<std::size_t> first_sustained(std::span<const ConvergencePoint> series,
                                           double threshold, std::size_t window);

std::optional<std::size_t> tests_to_threshold(std::span<const TestRecord> records,
                                              double threshold, double gamma, Method method,
                                              std::size_t window = 50,
                                              const AtscvOptions& opts = {});

}  // namespace atscv
