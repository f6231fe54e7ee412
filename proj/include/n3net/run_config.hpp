#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "n3net/ablate.hpp"
#include "n3net/config_text.hpp"
#include "n3net/data.hpp"
#include "n3net/n3_block.hpp"
#include "n3net/train.hpp"

namespace n3net {

/// Everything a command needs, read from a `[section] key = value` file.
///
/// Sections: [net] (see N3NetConfig::write), [train], [noise], [data],
/// [ablate], [output]. Keys missing from a file keep their defaults;
/// unknown keys are rejected.
struct RunConfig {
  N3NetConfig net = N3NetConfig::desk_default(2);
  /// train.sigma is not serialised; training() fills it from sigma_8bit.
  TrainConfig train;
  /// Noise standard deviation on the 0..255 scale.
  double sigma_8bit = 25.0;
  std::uint64_t noise_seed = 0;
  SyntheticSpec data;
  /// Dataset cache written by `gen-data`; empty means generate in memory.
  std::string data_dir;
  std::vector<std::string> variants{"local", "knn", "n3"};
  std::vector<std::size_t> k_sweep{1, 2, 3, 4};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::size_t workers = 1;
  std::string out_dir = "out";

  ConfigText to_text() const;
  static RunConfig from_text(const ConfigText& text);
  static RunConfig from_file(const std::string& path);

  double sigma() const { return sigma_8bit / 255.0; }
  TrainConfig training() const;
  AblationConfig ablation() const;
  void validate() const;

  bool operator==(const RunConfig&) const = default;
};

}  // namespace n3net
