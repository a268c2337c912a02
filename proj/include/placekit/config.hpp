#pragma once

#include <string>

#include "json.hpp"
#include "placekit/model.hpp"
#include "placekit/synthworld.hpp"
#include "placekit/trainer.hpp"

namespace placekit {

// Run configuration shared by the CLI subcommands. JSON keys mirror the
// struct fields; command-line flags override individual values.
struct RunConfig {
  std::string dataset;
  std::string eval_dataset;
  std::string checkpoint;
  std::string out_dir = ".";
  ModelConfig model;
  TrainConfig train;
  OracleParams oracle;
  ScaleGrid grid = ScaleGrid::make_default();
};

nlohmann::json to_json(const ModelConfig& m);
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrainConfig& t);
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const OracleParams& p);
OracleParams oracle_params_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j);

// The checkpointed config snapshot: model + train + grid.
std::string config_snapshot_json(const ModelConfig& m, const TrainConfig& t,
                                 const ScaleGrid& grid);

}  // namespace placekit
