#include "atscv/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "atscv/errors.hpp"

namespace atscv {

namespace {

struct CutInOutcome {
  bool crash = false;
  bool open = false;  // MaxSteps while still closing in
};

CutInOutcome simulate_cut_in(const Scene& scene, int k, const SimConfig& cfg) {
  const auto& sc = cfg.scenario;
  Scene cur = step(scene, Action::right_lane_change(), Action::accel(0.0), sc);
  for (int i = k + 1;; ++i) {
    const ScenarioState s = cur.state();
    const auto term = check_termination(s, i, sc);
    if (term == Termination::Accident) return {true, false};
    if (term) return {false, s.r2_dot < 0.0};
    const double a_av = cfg.models.av.accel(s.v_av(), av_gap(s, sc), -s.r2_dot);
    cur = step(cur, Action::accel(0.0), Action::accel(a_av), sc);
  }
}

}  // namespace

OracleResult brute_force_mu(const SimConfig& cfg, std::size_t bins, std::size_t max_leaves) {
  if (bins == 0) throw ConfigError("oracle.bins must be >= 1");
  const auto& sc = cfg.scenario;
  const double per_bin = static_cast<double>(sc.max_steps) + 1.0;
  if (static_cast<double>(bins) * per_bin > static_cast<double>(max_leaves))
    throw BudgetExceededError("oracle needs up to " + std::to_string(bins) + " x " +
                              std::to_string(sc.max_steps + 1) + " leaf evaluations, budget is " +
                              std::to_string(max_leaves));

  OracleResult out;
  out.bins = bins;
  const double mass = 1.0 / static_cast<double>(bins);
  const double width = sc.initial.r1_max - sc.initial.r1_min;
  for (std::size_t b = 0; b < bins; ++b) {
    const double r1 = sc.initial.r1_min + (static_cast<double>(b) + 0.5) / bins * width;
    Scene scene = initial_scene(sc.initial, r1);
    double survival = 1.0;
    double mu = 0.0;
    for (int k = 0;; ++k) {
      const ScenarioState s = scene.state();
      if (const auto term = check_termination(s, k, sc)) {
        ++out.leaves;
        if (*term == Termination::MaxSteps) out.no_cut_in_max_steps_mass += mass * survival;
        break;
      }
      const double p = mobil_right_lc_prob(s, sc, cfg.models.bv, cfg.models.mobil);
      if (p > 0.0) {
        ++out.leaves;
        const CutInOutcome o = simulate_cut_in(scene, k, cfg);
        if (o.crash) mu += survival * p;
        if (o.open) out.open_after_cut_in_mass += mass * survival * p;
        survival *= 1.0 - p;
      }
      const double gap = lv_gap(s, sc);
      const double a_bv = gap > 0.0 ? idm_accel(s.v_bv, gap, -s.r1_dot, cfg.models.bv)
                                    : -cfg.models.bv.max_decel;
      scene = step(scene, Action::accel(a_bv), Action::accel(0.0), sc);
    }
    out.mu += mass * mu;
  }
  return out;
}

const MethodResult* CampaignResult::find(Method method) const {
  for (const auto& m : methods)
    if (m.method == method) return &m;
  return nullptr;
}

std::optional<double> acceleration_factor(std::optional<std::size_t> slow,
                                          std::optional<std::size_t> fast) {
  if (!slow || !fast || *fast == 0) return std::nullopt;
  return static_cast<double>(*slow) / static_cast<double>(*fast);
}

CampaignResult analyze(Environment env, std::uint64_t seed, std::vector<TestRecord> records,
                       const CampaignConfig& cfg) {
  CampaignResult result;
  result.env = env;
  result.seed = seed;
  result.num_surrogates = cfg.sim.num_surrogates();
  result.records = std::move(records);
  const auto& est = cfg.estimator;
  const AtscvOptions opts = est.atscv();

  std::vector<Method> methods;
  if (env == Environment::NDE) methods = {Method::NDE};
  else methods = {Method::NADE, Method::ATSCV};

  for (Method method : methods) {
    MethodResult m;
    m.method = method;
    if (!result.records.empty()) {
      if (method == Method::ATSCV) {
        AtscvResult fit = atscv_fit(result.records, opts);
        m.estimate = std::move(fit.estimate);
        result.adjusted = std::move(fit.points);
      } else {
        m.estimate = estimate(method, result.records, opts);
      }
      if (m.estimate.mu > 0.0) m.rhw = rhw(m.estimate, est.gamma);
      m.convergence = convergence_series(result.records, method, est.gamma, opts);
      m.tests_to_threshold = first_sustained(m.convergence, est.rhw_threshold,
                                             est.confirmation_window);
    } else {
      m.estimate.method = method;
    }
    result.methods.push_back(std::move(m));
  }

  if (env == Environment::NADE)
    result.nade_over_atscv = acceleration_factor(result.methods[0].tests_to_threshold,
                                                 result.methods[1].tests_to_threshold);

  if (cfg.oracle_gate && !result.records.empty()) {
    try {
      result.oracle = brute_force_mu(cfg.sim, cfg.oracle_bins);
    } catch (const BudgetExceededError&) {
      result.oracle.reset();
    }
    if (result.oracle) {
      for (const auto& m : result.methods) {
        const double diff = std::abs(m.estimate.mu - result.oracle->mu);
        const double se = std::sqrt(m.estimate.variance);
        OracleCheck check{m.method, se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : INFINITY),
                          false};
        check.within_3se = diff <= 3.0 * se;
        result.oracle_checks.push_back(check);
      }
    }
  }
  return result;
}

CampaignResult run_campaign(const CampaignConfig& cfg) {
  cfg.validate();
  auto records = sample_campaign(cfg.env, cfg.seed, cfg.budget(cfg.env), cfg.sim, cfg.workers);
  return analyze(cfg.env, cfg.seed, std::move(records), cfg);
}

std::optional<FactorStats> factor_stats(const std::vector<double>& factors) {
  if (factors.empty()) return std::nullopt;
  FactorStats st;
  st.count = factors.size();
  std::vector<double> sorted = factors;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  st.median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  st.mean = std::accumulate(factors.begin(), factors.end(), 0.0) / static_cast<double>(st.count);
  if (st.count > 1) {
    double ss = 0.0;
    for (double f : factors) ss += (f - st.mean) * (f - st.mean);
    st.sd = std::sqrt(ss / static_cast<double>(st.count - 1));
  }
  return st;
}

ReplicationStudy run_replications(const CampaignConfig& cfg) {
  cfg.validate();
  const auto& est = cfg.estimator;
  const AtscvOptions opts = est.atscv();
  auto count = [&](std::span<const TestRecord> records, Method method) {
    return tests_to_threshold(records, est.rhw_threshold, est.gamma, method,
                              est.confirmation_window, opts);
  };

  ReplicationStudy study;
  std::vector<double> nde_over_nade;
  std::vector<double> nade_over_atscv;
  for (std::size_t r = 1; r <= cfg.replications; ++r) {
    ReplicationRow row;
    row.index = r;
    row.seed = cfg.seed + r;
    const auto nade = sample_campaign(Environment::NADE, row.seed, cfg.episodes, cfg.sim,
                                      cfg.workers);
    row.nade = count(nade, Method::NADE);
    row.atscv = count(nade, Method::ATSCV);
    row.mu_nade = estimate_nade(nade, opts).mu;
    row.mu_atscv = estimate_atscv(nade, opts).mu;
    if (cfg.replicate_nde) {
      const auto nde = sample_campaign(Environment::NDE, row.seed, cfg.nde_episodes, cfg.sim,
                                       cfg.workers);
      row.nde = count(nde, Method::NDE);
      row.mu_nde = estimate_nde(nde).mu;
      if (auto f = acceleration_factor(row.nde, row.nade)) nde_over_nade.push_back(*f);
    }
    if (auto f = acceleration_factor(row.nade, row.atscv)) nade_over_atscv.push_back(*f);
    if (row.atscv && (!row.nade || *row.atscv < *row.nade)) ++study.atscv_fewer;
    study.rows.push_back(row);
  }
  study.nde_over_nade = factor_stats(nde_over_nade);
  study.nade_over_atscv = factor_stats(nade_over_atscv);
  return study;
}

}  // namespace atscv
