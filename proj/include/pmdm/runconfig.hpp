#pragma once

#include <string>

#include "pmdm/dataset.hpp"
#include "pmdm/model.hpp"
#include "pmdm/training.hpp"

namespace pmdm {

// One flat document driving a run: model architecture plus training settings,
// dataset location, split ratios and output directory. Node count, channel
// count and sampling interval always come from the dataset itself.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::string dataset;
  SplitSpec split;
  std::string out_dir = "out";

  static RunConfig from_json_text(const std::string& text);
  static RunConfig from_json_file(const std::string& path);
  std::string to_json_text() const;
};

// ModelConfig alone, as stored next to each checkpoint.
std::string model_config_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& text);
ModelConfig model_config_from_file(const std::string& path);

}  // namespace pmdm
