#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "atscv/config.hpp"
#include "atscv/errors.hpp"
#include "atscv/harness.hpp"
#include "atscv/io.hpp"

namespace fs = std::filesystem;
using namespace atscv;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitBudget = 3;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> episodes;
  std::optional<std::string> env;
  std::optional<std::string> out;
  std::optional<unsigned> workers;
  std::optional<std::size_t> replications;
  std::optional<double> rhw_threshold;
  std::optional<double> gamma;
  std::optional<std::size_t> bins;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "INI configuration file");
  cmd->add_option("--seed", o.seed, "root seed");
  cmd->add_option("--episodes", o.episodes, "episode budget of the selected environment");
  cmd->add_option("--env", o.env, "environment")->check(CLI::IsMember({"nde", "nade"}));
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--workers", o.workers, "worker threads");
  cmd->add_option("--replications", o.replications, "number of replications");
  cmd->add_option("--rhw-threshold", o.rhw_threshold, "RHW stopping threshold");
  cmd->add_option("--gamma", o.gamma, "confidence complement");
}

CampaignConfig resolve(const Overrides& o) {
  CampaignConfig cfg = o.config.empty() ? CampaignConfig{} : load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.env) cfg.env = parse_environment(*o.env);
  if (o.episodes) (cfg.env == Environment::NDE ? cfg.nde_episodes : cfg.episodes) = *o.episodes;
  if (o.out) cfg.out = *o.out;
  if (o.workers) cfg.workers = *o.workers;
  if (o.replications) cfg.replications = *o.replications;
  if (o.rhw_threshold) cfg.estimator.rhw_threshold = *o.rhw_threshold;
  if (o.gamma) cfg.estimator.gamma = *o.gamma;
  if (o.bins) cfg.oracle_bins = *o.bins;
  cfg.validate();
  return cfg;
}

std::string show(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string("-");
}

std::string show(const std::optional<std::size_t>& v) {
  return v ? std::to_string(*v) : std::string("not reached");
}

void print_campaign(const CampaignResult& r) {
  std::printf("%s campaign, %zu episodes, seed %llu\n", to_string(r.env), r.records.size(),
              static_cast<unsigned long long>(r.seed));
  for (const auto& m : r.methods)
    std::printf("  %-5s mu=%s se=%s rhw=%s tests_to_threshold=%s\n", to_string(m.method),
                format_double(m.estimate.mu).c_str(),
                format_double(std::sqrt(m.estimate.variance)).c_str(), show(m.rhw).c_str(),
                show(m.tests_to_threshold).c_str());
  if (r.oracle) {
    std::printf("  oracle mu=%s\n", format_double(r.oracle->mu).c_str());
    for (const auto& c : r.oracle_checks)
      std::printf("  %-5s %s (%s standard errors from oracle)\n", to_string(c.method),
                  c.within_3se ? "consistent" : "INCONSISTENT",
                  format_double(c.std_errors).c_str());
  }
}

int cmd_simulate(const Overrides& o) {
  const CampaignConfig cfg = resolve(o);
  const CampaignResult result = run_campaign(cfg);
  emit_outputs(result, cfg, cfg.out);
  print_campaign(result);
  std::printf("outputs written to %s\n", cfg.out.c_str());
  return 0;
}

int cmd_estimate(const Overrides& o) {
  const CampaignConfig cfg = resolve(o);
  auto records = read_records(cfg.out);
  if (records.empty()) throw EmptyInputError("no records in " + cfg.out);
  const Environment env = records.front().env;
  const CampaignResult result = analyze(env, cfg.seed, std::move(records), cfg);
  write_json(fs::path(cfg.out) / "estimate.json", estimates_json(result));
  print_campaign(result);
  return 0;
}

int cmd_oracle(const Overrides& o) {
  const CampaignConfig cfg = resolve(o);
  const OracleResult oracle = brute_force_mu(cfg.sim, cfg.oracle_bins);
  std::cout << oracle_json(oracle).dump(2) << '\n';
  return 0;
}

int cmd_replicate(const Overrides& o) {
  const CampaignConfig cfg = resolve(o);
  const ReplicationStudy study = run_replications(cfg);
  fs::create_directories(cfg.out);
  write_replications_csv(fs::path(cfg.out) / "replications.csv", study);
  const auto doc = replication_json(study, cfg);
  write_json(fs::path(cfg.out) / "replications.json", doc);
  std::cout << doc.dump(2) << '\n';
  return 0;
}

int cmd_report(const Overrides& o) {
  const CampaignConfig cfg = resolve(o);
  const fs::path dir = cfg.out;
  bool any = false;
  if (fs::exists(dir / "summary.json")) {
    const auto s = read_json(dir / "summary.json");
    validate_summary(s);
    any = true;
    std::cout << s["env"].get<std::string>() << " campaign, " << s["episodes"] << " episodes, seed "
              << s["seed"] << '\n';
    for (const auto& [name, e] : s["estimates"].items()) {
      std::cout << "  " << name << ": mu=" << e["mu"] << " variance=" << e["variance"]
                << " rhw=" << e["rhw"] << " tests_to_threshold=" << e["tests_to_threshold"]
                << '\n';
      for (const auto& g : e["groups"])
        std::cout << "    l=" << g["l"] << (g["overflow"].get<bool>() ? " (overflow)" : "")
                  << " count=" << g["count"] << " mu_l=" << g["mu"] << '\n';
    }
    std::cout << "  acceleration NADE/ATSCV: " << s["acceleration_factors"]["nade_over_atscv"]
              << '\n';
    if (!s["oracle"].is_null()) std::cout << "  oracle mu: " << s["oracle"]["mu"] << '\n';
  }
  if (fs::exists(dir / "replications.json")) {
    const auto r = read_json(dir / "replications.json");
    any = true;
    std::cout << r["replications"] << " replications from seed " << r["seed"] << '\n'
              << "  NDE/NADE:   " << r["acceleration_factors"]["nde_over_nade"] << '\n'
              << "  NADE/ATSCV: " << r["acceleration_factors"]["nade_over_atscv"] << '\n'
              << "  ATSCV needed fewer tests in " << r["atscv_fewer_tests"] << " replications\n";
  }
  if (!any) throw IoError("nothing to report in " + dir.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rare-event evaluation of an automated vehicle in cut-in scenarios"};
  app.require_subcommand(1);
  Overrides o;

  auto* simulate = app.add_subcommand("simulate", "run a campaign and write all outputs");
  auto* estimate = app.add_subcommand("estimate", "re-run the estimators on written records");
  auto* oracle = app.add_subcommand("oracle", "exact accident rate by enumeration");
  auto* replicate = app.add_subcommand("replicate", "tests-to-threshold over seeded replications");
  auto* report = app.add_subcommand("report", "print a written summary");
  for (auto* cmd : {simulate, estimate, oracle, replicate, report}) add_common(cmd, o);
  oracle->add_option("--bins", o.bins, "initial-gap bins");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*simulate) return cmd_simulate(o);
    if (*estimate) return cmd_estimate(o);
    if (*oracle) return cmd_oracle(o);
    if (*replicate) return cmd_replicate(o);
    return cmd_report(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const BudgetExceededError& e) {
    std::cerr << "oracle budget exceeded: " << e.what() << '\n';
    return kExitBudget;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}
