#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "n3net/tensor.hpp"

// Differentiable primitives. Every op computes its forward value eagerly and,
// when the tape is recording and some input requires grad, records an exact
// backward rule. Shape mismatches throw std::invalid_argument.
namespace n3net::ad {

Tensor add(Tape& tape, const Tensor& x, const Tensor& y);
Tensor sub(Tape& tape, const Tensor& x, const Tensor& y);
Tensor mul(Tape& tape, const Tensor& x, const Tensor& y);
Tensor neg(Tape& tape, const Tensor& x);
Tensor scale(Tape& tape, const Tensor& x, double factor);
Tensor add_scalar(Tape& tape, const Tensor& x, double value);
/// x / t for a one-element tensor t.
Tensor div_scalar(Tape& tape, const Tensor& x, const Tensor& t);
Tensor sum(Tape& tape, const Tensor& x);

Tensor relu(Tape& tape, const Tensor& x);

/// Pins ReLU activation patterns on the current thread. kRecord stores the
/// x > 0 mask of every relu call in order; kReplay makes relu calls reuse
/// those masks, which turns a ReLU network into a smooth function of its
/// parameters around the recorded point.
class ReluPatternScope {
 public:
  enum class Mode { kRecord, kReplay };
  ReluPatternScope(Mode mode, std::vector<std::vector<bool>>& patterns);
  ~ReluPatternScope();
  ReluPatternScope(const ReluPatternScope&) = delete;
  ReluPatternScope& operator=(const ReluPatternScope&) = delete;

 private:
  void* previous_;
};
/// log(1 + exp(x)), computed without overflow.
Tensor softplus(Tape& tape, const Tensor& x);

/// Softmax over the last axis.
Tensor softmax(Tape& tape, const Tensor& x);
/// log(1 - x) with x clamped to at most 1 - 1e-7. Clamped entries are
/// constants for the backward pass.
Tensor log1m(Tape& tape, const Tensor& x);
/// Copy of x with masked entries replaced by `value`; masked entries get no
/// gradient.
Tensor masked_fill(Tape& tape, const Tensor& x, const std::vector<bool>& mask,
                   double value);

/// y = x W + b for x [N,Fin], W [Fin,Fout], b [Fout].
Tensor linear(Tape& tape, const Tensor& x, const Tensor& weight,
              const Tensor& bias);

/// Same-size 3x3 convolution (stride 1, zero padding 1).
/// x [C,H,W], kernels [Cout,C,3,3], bias [Cout] -> [Cout,H,W].
Tensor conv2d_3x3(Tape& tape, const Tensor& x, const Tensor& kernels,
                  const Tensor& bias);

/// Concatenates [Ci,H,W] tensors along the channel axis.
Tensor concat_channels(Tape& tape, std::span<const Tensor> xs);

/// Stacks equally shaped tensors along a new leading axis.
Tensor stack(Tape& tape, std::span<const Tensor> xs);
/// x[index] along the leading axis.
Tensor select(Tape& tape, const Tensor& x, std::size_t index);

/// out + in on the first min(Cout, Cin) channels of two [C,H,W] tensors;
/// remaining output channels pass through unchanged.
Tensor residual_add(Tape& tape, const Tensor& out, const Tensor& in);

/// Reflect-pads [C,H,W] at the bottom and right edge (no edge repeat).
Tensor pad_reflect(Tape& tape, const Tensor& x, std::size_t pad_bottom,
                   std::size_t pad_right);
/// Top-left crop of [C,H,W] to [C,height,width].
Tensor crop(Tape& tape, const Tensor& x, std::size_t height, std::size_t width);

/// Mean of squared differences, as a one-element tensor.
Tensor mse_loss(Tape& tape, const Tensor& pred, const Tensor& target);

}  // namespace n3net::ad
