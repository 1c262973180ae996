#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bayesg/exec_sim.hpp"
#include "bayesg/traffic_env.hpp"
#include "bayesg/train_config.hpp"

namespace bayesg::harness {

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(int line, const std::string& what)
      : std::invalid_argument(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct ExperimentConfig {
  std::string graph = "grid:3x3";  // "grid:RxC" or "file:<path>"
  env::EnvConfig env;
  train::TrainConfig train;
  exec::Schedule schedule;
  exec::ChannelConfig channel;
  int exec_episodes = 1;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "runs";
  int checkpoint_every = 0;  // updates; 0 keeps only the final checkpoint
  bool plot = true;          // write returns.svg

  // Builds the environment graph from `graph` and checks every section.
  void resolve();
  bool operator==(const ExperimentConfig& o) const;
};

// Sections [env] [train] [mask] [exec] [experiment]; `key = value` lines;
// '#' comments; strings in double quotes; seeds as [a, b, ...].
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config_file(const std::string& path);
// Every key, in a fixed order; parse(serialize(c)) == c.
std::string serialize_config(const ExperimentConfig& config);
// FNV-1a over the serialized text.
std::uint64_t config_hash(const ExperimentConfig& config);

// Key listing for documentation: section, key, default value.
struct KeyInfo {
  std::string section;
  std::string key;
  std::string default_value;
};
std::vector<KeyInfo> config_keys();

}  // namespace bayesg::harness
