#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "n3net/tensor.hpp"

// Nearest-neighbour selection: the hard KNN rule, the stochastic sampler it
// is the zero-temperature limit of, and the continuous deterministic
// relaxation with its exact vector-Jacobian product.
namespace n3net {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Logit assigned to candidates that can never be chosen.
inline constexpr double kMaskedLogit = -1e30;
/// Lower bound of learned temperatures (t = kMinTemperature + softplus(raw)).
inline constexpr double kMinTemperature = 1e-4;

/// Distances from one query to its M candidates.
struct DistanceRow {
  std::vector<double> values;
  /// Candidate that is the query itself; never selected.
  std::optional<std::size_t> self_index;

  std::size_t size() const { return values.size(); }
  std::size_t eligible_count() const;
  bool eligible(std::size_t i) const { return !self_index || *self_index != i; }
  /// Throws std::invalid_argument unless values are finite, nonnegative and
  /// non-empty and self_index is in range.
  void validate() const;
};

struct Temperature {
  double value;
};

/// Logits of one selection step (1-based `step`), masked entries at
/// kMaskedLogit.
struct LogitState {
  std::vector<double> logits;
  int step = 1;
};

LogitState initial_logits(const DistanceRow& d);

/// k x M stack of weight vectors; row j selects the (j+1)-th neighbour.
struct NeighborWeights {
  RowMatrix w;

  std::size_t k() const { return static_cast<std::size_t>(w.rows()); }
  std::size_t m() const { return static_cast<std::size_t>(w.cols()); }
};

struct RelaxedGradient {
  std::vector<double> distances;
  double temperature = 0.0;
};

/// Indices of the k nearest eligible candidates, ascending by distance,
/// ties to the lower index.
std::vector<std::size_t> knn_select(const DistanceRow& d, std::size_t k);

/// Continuous nearest-neighbour weights: row j is softmax(a_j / t) with
/// a_1 = -d and a_{j+1} = a_j + log(1 - w_j).
NeighborWeights relaxed_weights(const DistanceRow& d, Temperature t,
                                std::size_t k);

/// Draws k distinct candidates sequentially; each draw masks the chosen
/// logit before the next categorical.
std::vector<std::size_t> sample_stochastic_neighbors(const DistanceRow& d,
                                                     Temperature t,
                                                     std::size_t k,
                                                     std::uint64_t rng_seed);

/// k x F matrix whose row j is the w-weighted sum of the item rows.
RowMatrix continuous_aggregate(const NeighborWeights& w, const RowMatrix& items);

/// Exact VJP of relaxed_weights with respect to distances and temperature.
/// Masked candidates receive zero gradient.
RelaxedGradient relaxed_weights_backward(const DistanceRow& d, Temperature t,
                                         std::size_t k,
                                         const RowMatrix& upstream);

/// Largest weight of every row.
std::vector<double> max_weight_diagnostic(const NeighborWeights& w);

/// The same relaxation built from tape primitives (masked_fill, div_scalar,
/// softmax, log1m, add). Gradients come from the tape; used as the reference
/// for the fused backward. Returns a [k, M] tensor.
ad::Tensor relaxed_weights_taped(ad::Tape& tape, const ad::Tensor& distances,
                                 const ad::Tensor& temperature, std::size_t k,
                                 std::optional<std::size_t> self_index = {});

// Dense kernels over rows that contain only eligible candidates. Used by the
// public API above and by the neighbour-volume op of the block.
namespace kernels {

/// Writes k rows of weights into `out`, row j starting at out[j * stride].
void relax_forward(std::span<const double> d, double t, std::size_t k,
                   std::span<double> out, std::size_t stride);

/// Accumulates the VJP of relax_forward into grad_d and grad_t.
void relax_backward(std::span<const double> d, double t, std::size_t k,
                    std::span<const double> upstream, std::size_t stride,
                    std::span<double> grad_d, double& grad_t);

}  // namespace kernels

}  // namespace n3net
