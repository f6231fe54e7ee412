#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace n3net {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

struct AdamState {
  std::size_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// One bias-corrected Adam update of every params[i] from grads[i]. The
/// state is sized on the first call. Throws std::invalid_argument on
/// mismatched sizes.
void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state,
               double lr, const AdamConfig& cfg = {});

}  // namespace n3net
