#pragma once

#include "atscv/driver_models.hpp"
#include "atscv/scenario.hpp"

namespace atscv {

/// Scenario, behaviour models, and the defensive weight of the importance
/// functions. Surrogates are mixed with equal weights.
struct SimConfig {
  ScenarioConfig scenario;
  DriverModels models;
  double epsilon = 0.1;

  std::size_t num_surrogates() const { return models.surrogates.size(); }
  void validate() const;
};

}  // namespace atscv
