#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "knitwork/trainer.hpp"

namespace knitwork {

using Settings = std::map<std::string, std::string>;

// Every TrainConfig field as (key, value) with keys named like the CLI flags
// (without the leading dashes). Doubles use the shortest exact round-trip form.
std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& config);
// "key = value" lines.
std::string config_text(const TrainConfig& config);
std::uint64_t config_digest(const TrainConfig& config);

// Applies settings over `config`. Throws ConfigError on unknown keys or
// malformed values. "scales" and "patch-size" are applied first and reset the
// per-scale blur and weights to their defaults.
void apply_settings(TrainConfig& config, const Settings& settings);
bool is_config_key(const std::string& key);

// Flat "key = value" text with '#' comments and blank lines.
Settings parse_settings(const std::string& text, const std::string& origin = "config");
Settings read_settings_file(const std::string& path);

std::vector<std::size_t> parse_size_list(const std::string& text, const std::string& key);
std::vector<double> parse_double_list(const std::string& text, const std::string& key);

}  // namespace knitwork
