#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "n3net/data.hpp"
#include "n3net/n3_block.hpp"
#include "n3net/train.hpp"

namespace n3net {

/// Variant names: "local" (conv stack only, parameter-matched), "knn" (hard
/// KNN block matching on the noisy input), "n3" (relaxed selection on a
/// learned embedding).
struct AblationConfig {
  N3NetConfig base = N3NetConfig::desk_default(2);
  std::vector<std::string> variants{"local", "knn", "n3"};
  /// Extra k values trained for the n3 variant.
  std::vector<std::size_t> k_sweep{1, 2, 3, 4};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  TrainConfig train;
  SyntheticSpec data;
  std::size_t workers = 1;

  void validate() const;
  bool operator==(const AblationConfig&) const = default;
};

struct AblationRun {
  std::string variant;
  std::size_t k = 0;  // 0 for the local variant
  std::uint64_t seed = 0;
};

struct AblationRow {
  AblationRun run;
  std::size_t parameters = 0;
  double val_mse = 0.0;
  double val_psnr_db = 0.0;
  /// max_weight[block][neighbour], averaged over validation images.
  std::vector<std::vector<double>> max_weight;
  std::vector<EpochLog> log;
};

/// Network for one variant. `k` is ignored for "local".
N3NetConfig variant_config(const std::string& variant, const N3NetConfig& base,
                           std::size_t k);
/// Single conv stack with the summed depth of `base`, its width chosen to
/// match base's parameter count as closely as possible.
N3NetConfig local_baseline(const N3NetConfig& base);

/// Runs in a fixed order: variants as listed, n3 over base k then the sweep,
/// seeds innermost. Duplicates are dropped.
std::vector<AblationRun> plan_ablation(const AblationConfig& cfg);

AblationRow run_ablation_case(const AblationConfig& cfg, const Dataset& data,
                              const AblationRun& run);
/// Rows in plan order regardless of worker count.
std::vector<AblationRow> ablate(const AblationConfig& cfg, std::ostream* progress = nullptr);

struct VariantMean {
  std::string variant;
  std::size_t k = 0;
  double val_mse = 0.0;
  double val_psnr_db = 0.0;
  std::size_t seeds = 0;
};
/// Means over seeds, one entry per (variant, k) in first-seen order.
std::vector<VariantMean> summarize(const std::vector<AblationRow>& rows);

inline constexpr const char* kAblationCsvHeader = "variant,k,seed,val_mse,val_psnr_db";
inline constexpr const char* kDiagnosticsCsvHeader =
    "variant,k,seed,block,neighbor,max_weight";
void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);
void write_diagnostics_csv(std::ostream& out, const std::vector<AblationRow>& rows);

}  // namespace n3net
