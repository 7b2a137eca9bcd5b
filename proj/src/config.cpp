#include "atscv/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "atscv/errors.hpp"

namespace atscv {

namespace pt = boost::property_tree;

namespace {

class Section {
 public:
  Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  template <typename T>
  void read(const std::string& key, T& target) {
    used_.insert(key);
    if (!tree_) return;
    const auto value = tree_->get_optional<std::string>(key);
    if (!value) return;
    target = convert<T>(key, boost::algorithm::trim_copy(*value));
  }

  void reject_unknown() const {
    if (!tree_) return;
    for (const auto& [key, child] : *tree_)
      if (!used_.count(key)) throw ConfigError("unknown key '" + name_ + "." + key + "'");
  }

 private:
  template <typename T>
  T convert(const std::string& key, const std::string& text) const {
    const std::string field = name_ + "." + key;
    if constexpr (std::is_same_v<T, std::string>) {
      return text;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (text == "true" || text == "1" || text == "yes") return true;
      if (text == "false" || text == "0" || text == "no") return false;
      throw ConfigError(field + ": expected a boolean, got '" + text + "'");
    } else {
      std::istringstream in(text);
      in.imbue(std::locale::classic());
      T value{};
      if constexpr (std::is_unsigned_v<T>) {
        if (!text.empty() && text.front() == '-')
          throw ConfigError(field + ": expected a non-negative integer, got '" + text + "'");
      }
      in >> value;
      if (in.fail() || !(in >> std::ws).eof())
        throw ConfigError(field + ": cannot parse '" + text + "'");
      return value;
    }
  }

  const pt::ptree* tree_;
  std::string name_;
  std::set<std::string> used_;
};

void read_idm(Section& s, IdmParams& p) {
  s.read("v0", p.v0);
  s.read("time_headway", p.time_headway);
  s.read("a_max", p.a_max);
  s.read("b_comf", p.b_comf);
  s.read("s0", p.s0);
  s.read("delta", p.delta);
  s.read("max_decel", p.max_decel);
}

void read_fvdm(Section& s, FvdmParams& p) {
  s.read("kappa", p.kappa);
  s.read("lambda", p.lambda);
  s.read("v_cap", p.v_cap);
  s.read("b_f", p.b_f);
  s.read("c_f", p.c_f);
  s.read("a_max", p.a_max);
  s.read("max_decel", p.max_decel);
}

CarFollowingModel read_model(Section& s, std::string preset, const std::string& where) {
  s.read("model", preset);
  CarFollowingModel model;
  try {
    model = make_model(preset);
  } catch (const Error&) {
    throw ConfigError(where + ".model: unknown model '" + preset + "'");
  }
  std::visit(
      [&](auto& p) {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, IdmParams>)
          read_idm(s, p);
        else
          read_fvdm(s, p);
      },
      model.params);
  return model;
}

}  // namespace

void CampaignConfig::validate() const {
  sim.validate();
  if (episodes < 1) throw ConfigError("campaign.episodes must be >= 1");
  if (nde_episodes < 1) throw ConfigError("campaign.nde_episodes must be >= 1");
  if (replications < 1) throw ConfigError("campaign.replications must be >= 1");
  if (workers < 1) throw ConfigError("campaign.workers must be >= 1");
  if (oracle_bins < 1) throw ConfigError("oracle.bins must be >= 1");
  if (!(estimator.rhw_threshold > 0.0 && estimator.rhw_threshold < 1.0))
    throw ConfigError("estimator.rhw_threshold must be in (0, 1)");
  if (!(estimator.gamma > 0.0 && estimator.gamma < 1.0))
    throw ConfigError("estimator.gamma must be in (0, 1)");
  if (estimator.max_control_steps < 0)
    throw ConfigError("estimator.max_control_steps must be >= 0");
  if (estimator.confirmation_window < 1)
    throw ConfigError("estimator.confirmation_window must be >= 1");
}

CampaignConfig parse_config(std::istream& in, std::string_view source) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string(source) + ": " + e.message() + " (line " +
                      std::to_string(e.line()) + ")");
  }

  CampaignConfig cfg;
  std::map<std::string, Section> sections;
  auto section = [&](const std::string& name) -> Section& {
    auto it = sections.find(name);
    if (it == sections.end()) {
      const auto child = tree.get_child_optional(pt::ptree::path_type(name, '\0'));
      it = sections.emplace(name, Section(child ? &*child : nullptr, name)).first;
    }
    return it->second;
  };

  auto& sc = cfg.sim.scenario;
  Section& scenario = section("scenario");
  scenario.read("dt", sc.dt);
  scenario.read("max_steps", sc.max_steps);
  scenario.read("d_accid", sc.d_accid);
  scenario.read("vehicle_length", sc.vehicle_length);
  scenario.read("v_bv", sc.initial.v_bv);
  scenario.read("r1_min", sc.initial.r1_min);
  scenario.read("r1_max", sc.initial.r1_max);
  scenario.read("r1_dot", sc.initial.r1_dot);
  scenario.read("r2", sc.initial.r2);
  scenario.read("r2_dot", sc.initial.r2_dot);

  Section& bv = section("bv");
  read_idm(bv, cfg.sim.models.bv);

  Section& mobil = section("mobil");
  auto& mp = cfg.sim.models.mobil;
  mobil.read("politeness", mp.politeness);
  mobil.read("threshold", mp.threshold);
  mobil.read("right_bias", mp.right_bias);
  mobil.read("b_safe", mp.b_safe);
  mobil.read("gain", mp.gain);
  mobil.read("p_max", mp.p_max);

  cfg.sim.models.av = read_model(section("av"), "av", "av");

  Section& surrogates = section("surrogates");
  std::string names = "idm, fvdm1, fvdm2";
  surrogates.read("models", names);
  std::vector<std::string> list;
  boost::algorithm::split(list, names, boost::is_any_of(","));
  cfg.sim.models.surrogates.clear();
  for (auto& name : list) {
    boost::algorithm::trim(name);
    if (name.empty()) continue;
    const std::string where = "surrogate." + name;
    cfg.sim.models.surrogates.push_back(read_model(section(where), name, where));
  }

  Section& nade = section("nade");
  nade.read("epsilon", cfg.sim.epsilon);

  Section& est = section("estimator");
  est.read("gamma", cfg.estimator.gamma);
  est.read("rhw_threshold", cfg.estimator.rhw_threshold);
  est.read("max_control_steps", cfg.estimator.max_control_steps);
  est.read("confirmation_window", cfg.estimator.confirmation_window);

  Section& campaign = section("campaign");
  std::string env = to_string(cfg.env);
  campaign.read("seed", cfg.seed);
  campaign.read("episodes", cfg.episodes);
  campaign.read("nde_episodes", cfg.nde_episodes);
  campaign.read("env", env);
  campaign.read("replications", cfg.replications);
  campaign.read("replicate_nde", cfg.replicate_nde);
  campaign.read("workers", cfg.workers);
  campaign.read("out", cfg.out);
  cfg.env = parse_environment(env);

  Section& oracle = section("oracle");
  oracle.read("bins", cfg.oracle_bins);
  oracle.read("gate", cfg.oracle_gate);

  for (const auto& [name, child] : tree) {
    if (!child.data().empty() && child.empty())
      throw ConfigError(std::string(source) + ": key '" + name + "' outside any section");
    if (!sections.count(name)) throw ConfigError("unknown section [" + name + "]");
  }
  for (const auto& [name, s] : sections) s.reject_unknown();

  cfg.validate();
  return cfg;
}

CampaignConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in, path.string());
}

}  // namespace atscv
