#pragma once

#include <memory>
#include <string>

#include "hoi/model.hpp"

namespace hoi {

std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& text);

// Versioned binary checkpoint: the serialized ModelConfig plus every named
// parameter tensor as (name, shape, float32 payload). Loading rebuilds the
// model from the embedded config and verifies name/shape agreement.
void save_checkpoint(const std::string& path, const HoiModel& model);
std::unique_ptr<HoiModel> load_checkpoint(const std::string& path);

}  // namespace hoi
