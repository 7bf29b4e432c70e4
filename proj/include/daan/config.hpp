// Flat `key = value` configuration files ('#' starts a comment).

#pragma once

#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "daan/synth.hpp"
#include "daan/trainer.hpp"

namespace daan {

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text, const std::string& source_name);
  static KeyValueConfig load(const std::string& path);

  std::optional<std::string> get(std::string_view key) const;
  void set(const std::string& key, const std::string& value);
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  const std::string& source() const { return source_; }

 private:
  std::string source_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Overwrites the TrainConfig fields named in `kv`. Keys that are neither
/// TrainConfig fields nor listed in `extra_keys` are rejected.
void apply_train_config(const KeyValueConfig& kv, TrainConfig& config,
                        std::initializer_list<std::string_view> extra_keys = {});
std::string to_config_text(const TrainConfig& config);

void apply_synth_config(const KeyValueConfig& kv, SynthConfig& config,
                        std::initializer_list<std::string_view> extra_keys = {});
std::string to_config_text(const SynthConfig& config);

bool parse_bool(std::string_view v);

}  // namespace daan
