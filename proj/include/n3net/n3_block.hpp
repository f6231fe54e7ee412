#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "n3net/config_text.hpp"
#include "n3net/patch_ops.hpp"
#include "n3net/tensor.hpp"

namespace n3net {

enum class DistanceKind { kSquaredEuclidean, kEuclidean };
/// kRelaxed: continuous nearest neighbours. kHard: one-hot KNN weights
/// (no gradient through the selection).
enum class Selection { kRelaxed, kHard };
/// Where distances are measured: learned embedding of the block input, or
/// the network's input image.
enum class MatchSource { kEmbedding, kInputImage };

struct N3BlockConfig {
  std::size_t k = 7;
  std::size_t patch = 10;
  std::size_t stride = 5;
  std::size_t region = 80;
  std::vector<std::size_t> embed_layers{64, 64, 8};
  std::vector<std::size_t> temp_layers{64, 64, 1};
  DistanceKind distance = DistanceKind::kSquaredEuclidean;
  Selection selection = Selection::kRelaxed;
  MatchSource match = MatchSource::kEmbedding;
  /// Replaces the temperature network with a constant when set.
  std::optional<double> fixed_temperature;

  bool has_embedding() const { return match == MatchSource::kEmbedding; }
  bool has_temperature_net() const {
    return selection == Selection::kRelaxed && !fixed_temperature;
  }
  void validate() const;
  bool operator==(const N3BlockConfig&) const = default;
};

/// Local conv stacks interleaved with N3 blocks: stack, block, stack, ...
struct N3NetConfig {
  std::vector<N3BlockConfig> blocks;
  std::vector<std::size_t> local_depths;
  std::size_t feature_width = 64;
  std::size_t interface_width = 8;

  /// Three 6-layer stacks and two k=7 blocks on 10x10 patches, stride 5,
  /// 80x80 matching region, 64 features with an 8-channel interface.
  static N3NetConfig full_scale();
  /// CPU-sized variant: three 3-layer stacks, two blocks on 8x8 patches with
  /// stride 4 and a 24x24 region, 16 features, 4-channel interface.
  static N3NetConfig desk_default(std::size_t k = 2);

  void validate() const;
  /// Input channels of local stack i.
  std::size_t stack_in_channels(std::size_t i) const;
  std::size_t stack_out_channels(std::size_t i) const;

  /// Writes the config as [net] keys. Blocks must share one configuration.
  void write(ConfigText& text) const;
  static N3NetConfig read(const ConfigText& text);

  bool operator==(const N3NetConfig&) const = default;
};

struct ConvLayer {
  ad::Tensor kernels;  // [Cout, Cin, 3, 3]
  ad::Tensor bias;     // [Cout]
};

/// 3x3 convolutions with ReLU between layers and a linear last layer.
struct ConvStack {
  std::vector<ConvLayer> layers;
  ad::Tensor forward(ad::Tape& tape, const ad::Tensor& x) const;
};

struct N3BlockParams {
  ConvStack embed;        // empty unless the block matches on an embedding
  ConvStack temperature;  // empty unless the block learns its temperature
};

struct NamedTensor {
  std::string name;
  ad::Tensor tensor;
};

/// Deterministic 64-bit generator for parameter init.
using Rng = std::mt19937_64;
/// Uniform double in [0, 1) built from the top 53 bits of one draw.
double uniform01(Rng& rng);

/// He-uniform conv stack: widths[i] output channels for layer i.
ConvStack init_conv_stack(std::size_t in_channels,
                          const std::vector<std::size_t>& widths, Rng& rng);
N3BlockParams init_block_params(const N3BlockConfig& cfg,
                                std::size_t in_channels, Rng& rng);

/// E = f_E(O).
ad::Tensor embed(ad::Tape& tape, const ad::Tensor& input,
                 const N3BlockParams& params, const N3BlockConfig& cfg);
/// T = t_min + softplus(f_T(O)), shape [1,H,W].
ad::Tensor temperature_map(ad::Tape& tape, const ad::Tensor& input,
                           const N3BlockParams& params, const N3BlockConfig& cfg);

// Patch-domain ops of the block. `table` lists each query's candidates.

/// [N,D] patches -> [N, table.width] distances; unused slots are 0.
ad::Tensor window_distances(ad::Tape& tape, const ad::Tensor& patches,
                            const CandidateTable& table, DistanceKind kind);
/// Relaxed weights per query -> [k, N, table.width]; backward uses the fused
/// VJP of the relaxation.
ad::Tensor neighbor_weights(ad::Tape& tape, const ad::Tensor& distances,
                            const ad::Tensor& temperatures,
                            const CandidateTable& table, std::size_t k);
/// One-hot KNN weights as a constant [k, N, table.width] tensor.
ad::Tensor hard_neighbor_weights(const ad::Tensor& distances,
                                 const CandidateTable& table, std::size_t k);
/// out[j, q] = sum_m w[j, q, m] * items[candidate(q, m)] -> [k, N, F].
ad::Tensor aggregate_neighbors(ad::Tape& tape, const ad::Tensor& weights,
                               const ad::Tensor& items,
                               const CandidateTable& table);

struct BlockDiagnostics {
  /// Mean over query patches of max_i w[j, q, i], one entry per neighbour.
  std::vector<double> max_weight;
};

/// One N3 block: [C,H,W] -> [C*(k+1),H,W], the input followed by k
/// neighbour volumes. `match_image` ([Cm,H,W]) is required when the block
/// matches on the input image.
ad::Tensor n3_forward(ad::Tape& tape, const ad::Tensor& input,
                      const N3BlockParams& params, const N3BlockConfig& cfg,
                      const ad::Tensor* match_image = nullptr,
                      BlockDiagnostics* diagnostics = nullptr);

/// The last conv of every local stack starts at zero, so a freshly built
/// network maps its input to itself.
class N3Net {
 public:
  N3Net(N3NetConfig config, std::uint64_t seed);

  const N3NetConfig& config() const { return config_; }

  /// image [1,H,W] -> [1,H,W]. Inputs whose size does not fit the patch
  /// grids are reflect-padded and the output is cropped back.
  ad::Tensor forward(ad::Tape& tape, const ad::Tensor& image,
                     std::vector<BlockDiagnostics>* diagnostics = nullptr) const;

  /// Stable names, e.g. "stack0.conv2.kernels", "block1.temp.conv0.bias".
  std::vector<NamedTensor> parameters() const;
  std::size_t parameter_count() const;
  void zero_grad();
  void fill_parameters(double value);

 private:
  N3NetConfig config_;
  std::vector<ConvStack> stacks_;
  std::vector<N3BlockParams> blocks_;
};

ad::Tensor n3net_forward(ad::Tape& tape, const ad::Tensor& image,
                         const N3Net& net);

}  // namespace n3net
