#pragma once

// TOML training configuration. Keys may sit at the top level or under [train]
// and [model]; unknown keys and ill-typed values are Usage errors.

#include <string>
#include <string_view>

#include "tdq/trainer.hpp"

namespace tdq::config {

void apply_toml(std::string_view document, train::TrainConfig& config,
                std::string_view source = "config");
void apply_toml_file(const std::string& path, train::TrainConfig& config);

// Every field except the checkpoint directory, parseable by apply_toml.
std::string to_toml(const train::TrainConfig& config);

}  // namespace tdq::config
