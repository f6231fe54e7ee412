#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

// Randomised property checks of the selection rules, shared by the
// command-line tool and the test suites.
namespace n3net {

struct CheckOutcome {
  std::string name;
  /// Worst observed value of the checked quantity.
  double worst = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string detail;
};

/// Rows of relaxed weights sum to 1 and lie in [0,1]. `worst` is the larger
/// of the max row-sum error and the max range violation.
CheckOutcome check_simplex(std::size_t instances, std::uint64_t seed,
                           double tolerance = 1e-9);

/// k = 1 relaxed weights against softmax(-d / t).
CheckOutcome check_attention_limit(std::size_t instances, std::uint64_t seed,
                                   double tolerance = 1e-12);

/// Relaxed weights at small temperature against the one-hot stack of
/// knn_select, on rows whose sorted distances are at least `min_gap` apart.
CheckOutcome check_hard_limit(std::size_t instances, std::uint64_t seed,
                              double temperature = 1e-3, double min_gap = 0.1,
                              double tolerance = 1e-6);

/// First-pick frequencies of the stochastic sampler against the first row
/// of relaxed weights. `worst` is the largest |z| with z in standard errors.
CheckOutcome check_sampler_marginals(std::size_t instances, std::size_t samples,
                                     std::uint64_t seed, double max_z = 3.0);

}  // namespace n3net
