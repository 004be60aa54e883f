#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgxk/baselines.hpp"
#include "kgxk/explainer.hpp"
#include "kgxk/model.hpp"
#include "kgxk/ppr.hpp"
#include "kgxk/synthetic.hpp"

namespace kgxk {

struct EvaluatorSettings {
  DropSchedule schedule = DropSchedule::distance_decay();
  TrainConfig train;
};

struct ExplainerSettings {
  MaskNetConfig mask;
  ExplainerTrainConfig train;
  std::size_t max_train_queries = 0;  // 0 = every training query
};

struct ProtocolSettings {
  std::vector<int> budgets = {25, 50, 75, 100, 300, 500};
  std::vector<std::string> explainers = {"raw", "instance_mask", "param_mask", "full", "empty"};
  TrainConfig fine_tune;
  std::size_t max_valid_queries = 0;  // 0 = all
  std::size_t max_test_queries = 0;
};

struct SweepSettings {
  std::vector<double> drop_probs = {0.0, 0.1, 0.3, 0.5, 0.7, 0.9};
  std::vector<int> radii = {1, 2, 3, 4, 5};
  std::size_t max_queries = 0;
};

// Every field has a default. An empty data_dir selects the planted synthetic
// graph described by `synthetic`.
struct RunConfig {
  std::string data_dir;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string run_id;
  BackboneConfig backbone;
  EvaluatorSettings evaluator;
  ExplainerSettings explainer;
  InstanceMaskConfig instance_mask;
  PPRConfig ppr;
  ProtocolSettings protocol;
  SweepSettings sweep;
  PlantedKgConfig synthetic;

  void validate() const;
};

// Unknown keys anywhere in the tree raise ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& c);
RunConfig load_run_config(const std::filesystem::path& path);

// Propagates the top-level seed into every sub-block and the embedding width
// into the mask network.
void apply_seed(RunConfig& c);

}  // namespace kgxk
