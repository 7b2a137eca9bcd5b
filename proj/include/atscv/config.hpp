#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "atscv/estimators.hpp"
#include "atscv/sampling.hpp"
#include "atscv/sim_config.hpp"

namespace atscv {

struct EstimatorOptions {
  double gamma = 0.1;
  double rhw_threshold = 0.1;
  int max_control_steps = 10;
  std::size_t confirmation_window = 50;

  AtscvOptions atscv() const { return AtscvOptions{max_control_steps, false}; }
};

struct CampaignConfig {
  SimConfig sim;
  EstimatorOptions estimator;
  std::uint64_t seed = 1;
  std::size_t episodes = 10000;       // NADE campaign size
  std::size_t nde_episodes = 100000;  // NDE campaign size
  Environment env = Environment::NADE;
  std::size_t replications = 1;
  bool replicate_nde = true;
  unsigned workers = 1;
  std::string out = "out";
  std::size_t oracle_bins = 64;
  bool oracle_gate = true;

  /// Episode budget of the campaign for `env`.
  std::size_t budget(Environment e) const { return e == Environment::NDE ? nde_episodes : episodes; }
  void validate() const;
};

/// Parses an INI document. Sections and keys are documented in
/// configs/reference.ini; unknown sections or keys are rejected.
CampaignConfig parse_config(std::istream& in, std::string_view source = "<config>");
CampaignConfig load_config(const std::filesystem::path& path);

}  // namespace atscv
