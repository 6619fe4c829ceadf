#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "modpair/training.hpp"
#include "modpair/world.hpp"

namespace modpair {

/// Flat `key=value` configuration text ('#' starts a comment). Unknown keys
/// are rejected by the typed converters below.
struct KeyValueConfig {
  std::map<std::string, std::string> values;

  static KeyValueConfig parse_text(const std::string& text);
  static KeyValueConfig parse_file(const std::string& path);

  bool has(const std::string& key) const { return values.count(key) > 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  int get_int(const std::string& key, int fallback) const;
  double get_real(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
};

/// Throws ConfigError on unknown keys or out-of-range values. The keys are
/// listed in the README.
GenConfig gen_config_from(const KeyValueConfig& kv);
TrainConfig train_config_from(const KeyValueConfig& kv);

}  // namespace modpair
