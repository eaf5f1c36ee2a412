#pragma once

#include <string>

#include "cfield/field.hpp"
#include "cfield/trainer.hpp"

namespace cfield {

std::string to_json(const FieldConfig& config);
std::string to_json(const TrainConfig& config);

// Parses a JSON object and overwrites the fields it names; unknown keys
// raise ConfigError.
FieldConfig field_config_from_json(const std::string& json, FieldConfig base = {});
TrainConfig train_config_from_json(const std::string& json, TrainConfig base = {});

}  // namespace cfield
