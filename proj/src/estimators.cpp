#include "atscv/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include <boost/math/distributions/normal.hpp>

#include "atscv/errors.hpp"

namespace atscv {

const char* to_string(Method method) {
  switch (method) {
    case Method::NDE: return "nde";
    case Method::NADE: return "nade";
    case Method::ATSCV: return "atscv";
  }
  return "unknown";
}

Method parse_method(std::string_view text) {
  if (text == "nde") return Method::NDE;
  if (text == "nade") return Method::NADE;
  if (text == "atscv") return Method::ATSCV;
  throw ConfigError("unknown method '" + std::string(text) + "'");
}

namespace {

double sequential_mean(std::span<const double> y) {
  double sum = 0.0;
  for (double v : y) sum += v;
  return sum / static_cast<double>(y.size());
}

double sample_variance(std::span<const double> y, double mean) {
  if (y.size() < 2) return 0.0;
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(y.size() - 1);
}

void require_env(std::span<const TestRecord> records, Environment env) {
  if (records.empty()) throw EmptyInputError("no records to estimate from");
  for (const auto& r : records)
    if (r.env != env)
      throw Error(std::string("record ") + std::to_string(r.id) + " is not from " + to_string(env));
}

// Records grouped by number of control steps; everything above L shares one
// overflow group. Members keep their input order.
struct Grouping {
  std::map<int, std::vector<std::size_t>> members;
  int overflow_key = 0;
};

Grouping group_records(std::span<const TestRecord> records, int max_control_steps) {
  Grouping g;
  g.overflow_key = max_control_steps + 1;
  for (std::size_t i = 0; i < records.size(); ++i)
    g.members[std::min(records[i].control_steps(), g.overflow_key)].push_back(i);
  return g;
}

// Regression adjustment of one group. beta stays zero for l = 0, the overflow
// group, and groups too small to fit.
struct GroupFit {
  double eta = 0.0;
  double rss = 0.0;
  double y_var = 0.0;
  bool adjusted = false;
  std::size_t regressors = 0;
  Eigen::VectorXd values;  // eta + residual
};

GroupFit fit_group(const std::vector<double>& y, const Eigen::MatrixXd& z_raw, bool use_cv) {
  GroupFit fit;
  const std::size_t count = y.size();
  const double mean = sequential_mean(y);
  fit.y_var = sample_variance(y, mean);
  fit.regressors = static_cast<std::size_t>(z_raw.cols());

  const bool fit_beta = use_cv && z_raw.cols() > 0 && count > fit.regressors + 1;
  if (!fit_beta) {
    fit.eta = mean;
    fit.values.resize(static_cast<Eigen::Index>(count));
    for (std::size_t i = 0; i < count; ++i) {
      fit.values[static_cast<Eigen::Index>(i)] = y[i];
      fit.rss += (y[i] - mean) * (y[i] - mean);
    }
    return fit;
  }

  GroupedRegression g;
  g.y = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(count));
  g.z = z_raw.rowwise() - z_raw.colwise().mean();
  const RegressionFit reg = mlr_fit(g);
  fit.adjusted = !reg.fallback;
  fit.eta = reg.intercept;
  fit.rss = reg.residuals.squaredNorm();
  fit.values = reg.residuals.array() + reg.intercept;
  return fit;
}

GroupContribution contribution(int key, bool overflow, const GroupFit& fit, std::size_t count,
                               std::size_t n) {
  GroupContribution c;
  c.control_steps = key;
  c.overflow = overflow;
  c.adjusted = fit.adjusted;
  c.count = count;
  c.regressors = fit.regressors;
  const double nd = static_cast<double>(n);
  const double cd = static_cast<double>(count);
  c.mu = cd * fit.eta / nd;
  const double s2 = count > 1 ? fit.rss / (cd - 1.0) : 0.0;
  c.variance = (cd / nd) * (cd / nd) * s2 / cd;
  c.y_variance = fit.y_var;
  c.adjusted_variance = s2;
  return c;
}

double total(const std::vector<GroupContribution>& groups) {
  double mu = 0.0;
  for (const auto& g : groups) mu += g.mu;
  return mu;
}

std::size_t num_surrogates_of(std::span<const TestRecord> records) {
  for (const auto& r : records)
    if (!r.log.empty()) return r.log.front().q.size();
  return 0;
}

}  // namespace

Estimate estimate_nde(std::span<const TestRecord> records) {
  require_env(records, Environment::NDE);
  std::vector<double> y;
  y.reserve(records.size());
  for (const auto& r : records) y.push_back(static_cast<double>(r.accident));
  Estimate e;
  e.method = Method::NDE;
  e.n = records.size();
  e.mu = sequential_mean(y);
  e.variance = sample_variance(y, e.mu) / static_cast<double>(y.size());
  GroupFit fit;
  fit.eta = e.mu;
  fit.y_var = sample_variance(y, e.mu);
  fit.rss = fit.y_var * static_cast<double>(y.size() > 1 ? y.size() - 1 : 0);
  e.groups.push_back(contribution(0, false, fit, y.size(), y.size()));
  return e;
}

Estimate estimate_nade(std::span<const TestRecord> records, const AtscvOptions& opts) {
  AtscvOptions plain = opts;
  plain.force_zero_beta = true;
  Estimate e = atscv_fit(records, plain).estimate;
  e.method = Method::NADE;

  std::vector<double> y;
  y.reserve(records.size());
  for (const auto& r : records) y.push_back(r.weighted_outcome());
  e.variance = sample_variance(y, sequential_mean(y)) / static_cast<double>(y.size());
  return e;
}

std::size_t regressor_count(std::size_t num_surrogates, int control_steps) {
  constexpr std::size_t kMaxColumns = std::size_t{1} << 24;
  if (control_steps <= 0 || num_surrogates < 2) return 0;
  std::size_t cols = 1;
  for (int k = 0; k < control_steps; ++k) {
    cols *= num_surrogates - 1;
    if (cols > kMaxColumns)
      throw Error("sparse control variates for " + std::to_string(control_steps) +
                  " control steps exceed " + std::to_string(kMaxColumns) + " columns");
  }
  return cols;
}

Eigen::RowVectorXd design_row(const TestRecord& record, std::size_t num_surrogates) {
  const int l = record.control_steps();
  const std::size_t cols = regressor_count(num_surrogates, l);
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(cols));
  if (cols == 0) return row;

  // ratio[k][j] = q_j / q_alpha at moment k, for j < J-1.
  const std::size_t base = num_surrogates - 1;
  std::vector<std::vector<double>> ratio(static_cast<std::size_t>(l));
  for (int k = 0; k < l; ++k) {
    const auto& m = record.log[static_cast<std::size_t>(k)];
    for (std::size_t j = 0; j < base; ++j) ratio[k].push_back(m.q.at(j) / m.q_alpha);
  }
  std::vector<std::size_t> digits(static_cast<std::size_t>(l), 0);
  for (std::size_t c = 0; c < cols; ++c) {
    double prod = 1.0;
    for (int k = 0; k < l; ++k) prod *= ratio[k][digits[k]];
    row[static_cast<Eigen::Index>(c)] = prod;
    for (int k = l - 1; k >= 0; --k) {
      if (++digits[k] < base) break;
      digits[k] = 0;
    }
  }
  return row;
}

GroupedRegression build_group(std::span<const TestRecord> records, int control_steps,
                              std::size_t num_surrogates) {
  GroupedRegression g;
  g.control_steps = control_steps;
  std::vector<const TestRecord*> members;
  for (const auto& r : records)
    if (r.control_steps() == control_steps) members.push_back(&r);

  const auto rows = static_cast<Eigen::Index>(members.size());
  const auto cols = static_cast<Eigen::Index>(regressor_count(num_surrogates, control_steps));
  g.y.resize(rows);
  g.z.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const TestRecord& r = *members[static_cast<std::size_t>(i)];
    g.y[i] = r.weighted_outcome();
    if (cols > 0) g.z.row(i) = design_row(r, num_surrogates);
    g.ids.push_back(r.id);
  }
  if (rows > 0 && cols > 0) g.z.rowwise() -= g.z.colwise().mean();
  return g;
}

RegressionFit mlr_fit(const GroupedRegression& g) {
  const Eigen::Index rows = g.y.size();
  if (rows == 0) throw EmptyGroupError("cannot fit an empty group");
  const Eigen::Index cols = g.z.cols();

  RegressionFit fit;
  const double mean = sequential_mean(std::span<const double>(g.y.data(), static_cast<std::size_t>(rows)));
  fit.beta = Eigen::VectorXd::Zero(cols);
  if (cols == 0 || rows <= cols + 1) {
    fit.fallback = true;
    fit.intercept = mean;
    fit.residuals = g.y.array() - mean;
    return fit;
  }

  // Regression with intercept on the centered design; the minimum-norm
  // solution covers collinear control variates.
  const Eigen::RowVectorXd z_mean = g.z.colwise().mean();
  const Eigen::MatrixXd zc = g.z.rowwise() - z_mean;
  const Eigen::VectorXd yc = g.y.array() - mean;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  cod.setThreshold(1e-10);
  cod.compute(zc);
  fit.beta = cod.solve(yc);
  fit.intercept = mean - z_mean.dot(fit.beta);
  fit.residuals = yc - zc * fit.beta;
  return fit;
}

AtscvResult atscv_fit(std::span<const TestRecord> records, const AtscvOptions& opts) {
  if (records.empty()) throw EmptyInputError("no records to estimate from");
  const std::size_t n = records.size();
  const std::size_t num_sm = num_surrogates_of(records);
  const Grouping grouping = group_records(records, opts.max_control_steps);

  AtscvResult result;
  result.estimate.method = Method::ATSCV;
  result.estimate.n = n;
  result.points.resize(n);

  for (const auto& [key, members] : grouping.members) {
    const bool overflow = key == grouping.overflow_key;
    const bool use_cv = !opts.force_zero_beta && !overflow && key > 0;
    std::vector<double> y;
    y.reserve(members.size());
    for (std::size_t i : members) y.push_back(records[i].weighted_outcome());

    Eigen::MatrixXd z;
    if (use_cv && members.size() > regressor_count(num_sm, key) + 1) {
      z.resize(static_cast<Eigen::Index>(members.size()),
               static_cast<Eigen::Index>(regressor_count(num_sm, key)));
      for (std::size_t r = 0; r < members.size(); ++r)
        z.row(static_cast<Eigen::Index>(r)) = design_row(records[members[r]], num_sm);
    }
    const GroupFit fit = fit_group(y, z, use_cv);
    GroupContribution c = contribution(key, overflow, fit, members.size(), n);
    if (use_cv) c.regressors = regressor_count(num_sm, key);
    result.estimate.groups.push_back(c);
    result.estimate.variance += c.variance;

    for (std::size_t r = 0; r < members.size(); ++r) {
      const TestRecord& rec = records[members[r]];
      result.points[members[r]] = AdjustedPoint{rec.id, rec.control_steps(), y[r],
                                                fit.values[static_cast<Eigen::Index>(r)]};
    }
  }
  result.estimate.mu = total(result.estimate.groups);
  return result;
}

Estimate estimate_atscv(std::span<const TestRecord> records, const AtscvOptions& opts) {
  return atscv_fit(records, opts).estimate;
}

Estimate estimate(Method method, std::span<const TestRecord> records, const AtscvOptions& opts) {
  switch (method) {
    case Method::NDE: return estimate_nde(records);
    case Method::NADE: return estimate_nade(records, opts);
    case Method::ATSCV: return estimate_atscv(records, opts);
  }
  throw Error("unknown method");
}

double z_quantile(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must be in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0),
                               1.0 - gamma / 2.0);
}

double rhw(const Estimate& e, double gamma) {
  if (!(e.mu > 0.0)) throw ZeroEstimateError("relative half-width is undefined for a zero estimate");
  return z_quantile(gamma) * std::sqrt(std::max(0.0, e.variance)) / e.mu;
}

namespace {

std::optional<double> rhw_or_none(std::size_t n, double mu, double variance, double z) {
  if (n < 2 || !(mu > 0.0)) return std::nullopt;
  return z * std::sqrt(std::max(0.0, variance)) / mu;
}

std::vector<ConvergencePoint> running_mean_series(std::span<const TestRecord> records,
                                                  double z, bool weighted) {
  std::vector<ConvergencePoint> series;
  series.reserve(records.size());
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const double y = weighted ? records[i].weighted_outcome() : double(records[i].accident);
    const double n = static_cast<double>(i + 1);
    const double delta = y - mean;
    mean += delta / n;
    m2 += delta * (y - mean);
    const double variance = i == 0 ? 0.0 : m2 / (n - 1.0) / n;
    series.push_back({i + 1, mean, variance, rhw_or_none(i + 1, mean, variance, z)});
  }
  return series;
}

std::vector<ConvergencePoint> atscv_series(std::span<const TestRecord> records, double z,
                                           const AtscvOptions& opts) {
  struct GroupState {
    std::vector<double> y;
    std::vector<Eigen::RowVectorXd> rows;
    double weighted_eta = 0.0;  // count * eta
    double s2_over_count = 0.0;
  };
  const std::size_t num_sm = num_surrogates_of(records);
  const int overflow_key = opts.max_control_steps + 1;
  std::map<int, GroupState> groups;

  std::vector<ConvergencePoint> series;
  series.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const TestRecord& rec = records[i];
    const int key = std::min(rec.control_steps(), overflow_key);
    const bool use_cv = !opts.force_zero_beta && key != overflow_key && key > 0;
    GroupState& g = groups[key];
    g.y.push_back(rec.weighted_outcome());
    if (use_cv) g.rows.push_back(design_row(rec, num_sm));

    Eigen::MatrixXd z_raw;
    const std::size_t cols = use_cv ? regressor_count(num_sm, key) : 0;
    if (use_cv && g.y.size() > cols + 1) {
      z_raw.resize(static_cast<Eigen::Index>(g.rows.size()), static_cast<Eigen::Index>(cols));
      for (std::size_t r = 0; r < g.rows.size(); ++r) z_raw.row(static_cast<Eigen::Index>(r)) = g.rows[r];
    }
    const GroupFit fit = fit_group(g.y, z_raw, use_cv);
    const double count = static_cast<double>(g.y.size());
    g.weighted_eta = count * fit.eta;
    g.s2_over_count = g.y.size() > 1 ? fit.rss / (count - 1.0) / count : 0.0;

    const double n = static_cast<double>(i + 1);
    double mu = 0.0;
    double variance = 0.0;
    for (const auto& [k, state] : groups) {
      const double c = static_cast<double>(state.y.size());
      mu += state.weighted_eta / n;
      variance += (c / n) * (c / n) * state.s2_over_count;
    }
    series.push_back({i + 1, mu, variance, rhw_or_none(i + 1, mu, variance, z)});
  }
  return series;
}

}  // namespace

std::vector<ConvergencePoint> convergence_series(std::span<const TestRecord> records,
                                                 Method method, double gamma,
                                                 const AtscvOptions& opts) {
  const double z = z_quantile(gamma);
  switch (method) {
    case Method::NDE: return running_mean_series(records, z, false);
    case Method::NADE: return running_mean_series(records, z, true);
    case Method::ATSCV: return atscv_series(records, z, opts);
  }
  return {};
}

std::optional<std::size_t> first_sustained(std::span<const ConvergencePoint> series,
                                           double threshold, std::size_t window) {
  window = std::max<std::size_t>(window, 1);
  std::size_t run = 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series[i].rhw && *series[i].rhw <= threshold) {
      if (++run == window) return series[i + 1 - window].n;
    } else {
      run = 0;
    }
  }
  return std::nullopt;
}

std::optional<std::size_t> tests_to_threshold(std::span<const TestRecord> records,
                                              double threshold, double gamma, Method method,
                                              std::size_t window, const AtscvOptions& opts) {
  if (!(threshold > 0.0)) throw ConfigError("RHW threshold must be > 0");
  const auto series = convergence_series(records, method, gamma, opts);
  return first_sustained(series, threshold, window);
}

}  // namespace atscv
