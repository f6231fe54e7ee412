#include "n3net/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace n3net::ad {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

constexpr double kLog1mClamp = 1.0 - 1e-7;

void require_same_shape(const Tensor& x, const Tensor& y, const char* op) {
  if (x.shape() != y.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(x.shape()) + " vs " +
                                shape_str(y.shape()));
  }
}

void require_rank(const Tensor& x, std::size_t rank, const char* op) {
  if (x.rank() != rank) {
    throw std::invalid_argument(std::string(op) + ": expected rank " +
                                std::to_string(rank) + ", got shape " +
                                shape_str(x.shape()));
  }
}

// Backward for ops whose input gradient is upstream * local derivative.
template <typename Deriv>
void record_unary(Tape& tape, const Tensor& x, const Tensor& y, Deriv deriv) {
  if (!tape.wants({&x})) return;
  tape.record(y, [x, y, deriv]() mutable {
    auto gy = y.grad();
    auto gx = x.grad();
    auto xv = x.data();
    auto yv = y.data();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      gx[i] += gy[i] * deriv(xv[i], yv[i]);
    }
  });
}

}  // namespace

Tensor add(Tape& tape, const Tensor& x, const Tensor& y) {
  require_same_shape(x, y, "add");
  Tensor out(x.shape());
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x.data()[i] + y.data()[i];
  if (tape.wants({&x, &y})) {
    tape.record(out, [x, y, out]() mutable {
      auto g = out.grad();
      if (x.requires_grad()) {
        auto gx = x.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (y.requires_grad()) {
        auto gy = y.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gy[i] += g[i];
      }
    });
  }
  return out;
}

Tensor sub(Tape& tape, const Tensor& x, const Tensor& y) {
  require_same_shape(x, y, "sub");
  Tensor out(x.shape());
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x.data()[i] - y.data()[i];
  if (tape.wants({&x, &y})) {
    tape.record(out, [x, y, out]() mutable {
      auto g = out.grad();
      if (x.requires_grad()) {
        auto gx = x.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (y.requires_grad()) {
        auto gy = y.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gy[i] -= g[i];
      }
    });
  }
  return out;
}

Tensor mul(Tape& tape, const Tensor& x, const Tensor& y) {
  require_same_shape(x, y, "mul");
  Tensor out(x.shape());
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x.data()[i] * y.data()[i];
  if (tape.wants({&x, &y})) {
    tape.record(out, [x, y, out]() mutable {
      auto g = out.grad();
      if (x.requires_grad()) {
        auto gx = x.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y.data()[i];
      }
      if (y.requires_grad()) {
        auto gy = y.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gy[i] += g[i] * x.data()[i];
      }
    });
  }
  return out;
}

Tensor neg(Tape& tape, const Tensor& x) { return scale(tape, x, -1.0); }

Tensor scale(Tape& tape, const Tensor& x, double factor) {
  Tensor out(x.shape());
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = factor * x.data()[i];
  record_unary(tape, x, out, [factor](double, double) { return factor; });
  return out;
}

Tensor add_scalar(Tape& tape, const Tensor& x, double value) {
  Tensor out(x.shape());
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x.data()[i] + value;
  record_unary(tape, x, out, [](double, double) { return 1.0; });
  return out;
}

Tensor div_scalar(Tape& tape, const Tensor& x, const Tensor& t) {
  if (t.size() != 1) {
    throw std::invalid_argument("div_scalar: divisor must have one element, got " +
                                shape_str(t.shape()));
  }
  const double tv = t.item();
  Tensor out(x.shape());
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x.data()[i] / tv;
  if (tape.wants({&x, &t})) {
    tape.record(out, [x, t, out]() mutable {
      auto g = out.grad();
      const double tv = t.data()[0];
      if (x.requires_grad()) {
        auto gx = x.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / tv;
      }
      if (t.requires_grad()) {
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * out.data()[i];
        t.grad()[0] -= acc / tv;
      }
    });
  }
  return out;
}

Tensor sum(Tape& tape, const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor out = Tensor::scalar(acc);
  if (tape.wants({&x})) {
    tape.record(out, [x, out]() mutable {
      const double g = out.grad()[0];
      for (double& gx : x.grad()) gx += g;
    });
  }
  return out;
}

namespace {

struct ReluPins {
  ReluPatternScope::Mode mode;
  std::vector<std::vector<bool>>* patterns;
  std::size_t next = 0;
};
thread_local ReluPins* active_pins = nullptr;

}  // namespace

ReluPatternScope::ReluPatternScope(Mode mode, std::vector<std::vector<bool>>& patterns)
    : previous_(active_pins) {
  if (mode == Mode::kRecord) patterns.clear();
  active_pins = new ReluPins{mode, &patterns, 0};
}

ReluPatternScope::~ReluPatternScope() {
  delete active_pins;
  active_pins = static_cast<ReluPins*>(previous_);
}

Tensor relu(Tape& tape, const Tensor& x) {
  auto xv = x.data();
  std::vector<bool> mask(xv.size());
  if (active_pins && active_pins->mode == ReluPatternScope::Mode::kReplay) {
    auto& patterns = *active_pins->patterns;
    if (active_pins->next >= patterns.size() ||
        patterns[active_pins->next].size() != xv.size()) {
      throw std::logic_error("relu: pinned activation pattern does not match this call");
    }
    mask = patterns[active_pins->next++];
  } else {
    for (std::size_t i = 0; i < xv.size(); ++i) mask[i] = xv[i] > 0.0;
    if (active_pins) active_pins->patterns->push_back(mask);
  }
  Tensor out(x.shape());
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = mask[i] ? xv[i] : 0.0;
  if (tape.wants({&x})) {
    tape.record(out, [x, out, mask = std::move(mask)]() {
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) {
        if (mask[i]) gx[i] += g[i];
      }
    });
  }
  return out;
}

Tensor softplus(Tape& tape, const Tensor& x) {
  Tensor out(x.shape());
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double v = x.data()[i];
    o[i] = std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
  }
  record_unary(tape, x, out, [](double xv, double) {
    return xv >= 0.0 ? 1.0 / (1.0 + std::exp(-xv))
                     : std::exp(xv) / (1.0 + std::exp(xv));
  });
  return out;
}

Tensor softmax(Tape& tape, const Tensor& x) {
  if (x.rank() == 0) throw std::invalid_argument("softmax: empty shape");
  const std::size_t cols = x.shape().back();
  const std::size_t rows = x.size() / cols;
  Tensor out(x.shape());
  auto xv = x.data();
  auto o = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * cols;
    double* orow = o.data() + r * cols;
    const double m = *std::max_element(xr, xr + cols);
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += (orow[c] = std::exp(xr[c] - m));
    for (std::size_t c = 0; c < cols; ++c) orow[c] /= s;
  }
  if (tape.wants({&x})) {
    tape.record(out, [x, out, rows, cols]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      auto w = out.data();
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) dot += w[r * cols + c] * g[r * cols + c];
        for (std::size_t c = 0; c < cols; ++c) {
          const std::size_t i = r * cols + c;
          gx[i] += w[i] * (g[i] - dot);
        }
      }
    });
  }
  return out;
}

Tensor log1m(Tape& tape, const Tensor& x) {
  Tensor out(x.shape());
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = std::log1p(-std::min(x.data()[i], kLog1mClamp));
  }
  record_unary(tape, x, out, [](double xv, double) {
    return xv > kLog1mClamp ? 0.0 : -1.0 / (1.0 - xv);
  });
  return out;
}

Tensor masked_fill(Tape& tape, const Tensor& x, const std::vector<bool>& mask,
                   double value) {
  if (mask.size() != x.size()) {
    throw std::invalid_argument("masked_fill: mask length " +
                                std::to_string(mask.size()) +
                                " does not match shape " + shape_str(x.shape()));
  }
  Tensor out(x.shape());
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = mask[i] ? value : x.data()[i];
  if (tape.wants({&x})) {
    tape.record(out, [x, out, mask]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!mask[i]) gx[i] += g[i];
      }
    });
  }
  return out;
}

Tensor linear(Tape& tape, const Tensor& x, const Tensor& weight,
              const Tensor& bias) {
  require_rank(x, 2, "linear");
  require_rank(weight, 2, "linear");
  require_rank(bias, 1, "linear");
  const std::size_t n = x.dim(0), fin = x.dim(1), fout = weight.dim(1);
  if (weight.dim(0) != fin || bias.dim(0) != fout) {
    throw std::invalid_argument("linear: incompatible shapes x" +
                                shape_str(x.shape()) + " W" +
                                shape_str(weight.shape()) + " b" +
                                shape_str(bias.shape()));
  }
  Tensor out({n, fout});
  ConstMapMat xm(x.data().data(), n, fin);
  ConstMapMat wm(weight.data().data(), fin, fout);
  Eigen::Map<const Eigen::RowVectorXd> bv(bias.data().data(), fout);
  MapMat om(out.data().data(), n, fout);
  om.noalias() = xm * wm;
  om.rowwise() += bv;
  if (tape.wants({&x, &weight, &bias})) {
    tape.record(out, [x, weight, bias, out, n, fin, fout]() mutable {
      ConstMapMat g(out.grad().data(), n, fout);
      if (x.requires_grad()) {
        MapMat gx(x.grad().data(), n, fin);
        gx.noalias() += g * ConstMapMat(weight.data().data(), fin, fout).transpose();
      }
      if (weight.requires_grad()) {
        MapMat gw(weight.grad().data(), fin, fout);
        gw.noalias() += ConstMapMat(x.data().data(), n, fin).transpose() * g;
      }
      if (bias.requires_grad()) {
        Eigen::Map<Eigen::RowVectorXd> gb(bias.grad().data(), fout);
        gb += g.colwise().sum();
      }
    });
  }
  return out;
}

namespace {

// Unfolds x [C,H,W] into a [C*9, H*W] matrix of zero-padded 3x3 neighbourhoods.
RowMat unfold3x3(std::span<const double> x, std::size_t c, std::size_t h,
                 std::size_t w) {
  RowMat cols = RowMat::Zero(static_cast<Eigen::Index>(c * 9),
                             static_cast<Eigen::Index>(h * w));
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        double* row = cols.row(static_cast<Eigen::Index>(ch * 9 + ky * 3 + kx)).data();
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y) + ky - 1;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          const double* src = x.data() + (ch * h + sy) * w;
          for (std::size_t xx = 0; xx < w; ++xx) {
            const long sx = static_cast<long>(xx) + kx - 1;
            if (sx < 0 || sx >= static_cast<long>(w)) continue;
            row[y * w + xx] = src[sx];
          }
        }
      }
    }
  }
  return cols;
}

void fold3x3_add(const RowMat& cols, std::span<double> gx, std::size_t c,
                 std::size_t h, std::size_t w) {
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double* row = cols.row(static_cast<Eigen::Index>(ch * 9 + ky * 3 + kx)).data();
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y) + ky - 1;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          double* dst = gx.data() + (ch * h + sy) * w;
          for (std::size_t xx = 0; xx < w; ++xx) {
            const long sx = static_cast<long>(xx) + kx - 1;
            if (sx < 0 || sx >= static_cast<long>(w)) continue;
            dst[sx] += row[y * w + xx];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d_3x3(Tape& tape, const Tensor& x, const Tensor& kernels,
                  const Tensor& bias) {
  require_rank(x, 3, "conv2d_3x3");
  require_rank(kernels, 4, "conv2d_3x3");
  require_rank(bias, 1, "conv2d_3x3");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t cout = kernels.dim(0);
  if (kernels.dim(1) != c || kernels.dim(2) != 3 || kernels.dim(3) != 3 ||
      bias.dim(0) != cout || h == 0 || w == 0) {
    throw std::invalid_argument("conv2d_3x3: incompatible shapes x" +
                                shape_str(x.shape()) + " kernels" +
                                shape_str(kernels.shape()) + " bias" +
                                shape_str(bias.shape()));
  }
  const auto hw = static_cast<Eigen::Index>(h * w);
  const auto k9 = static_cast<Eigen::Index>(c * 9);
  const auto co = static_cast<Eigen::Index>(cout);
  RowMat cols = unfold3x3(x.data(), c, h, w);
  Tensor out({cout, h, w});
  MapMat om(out.data().data(), co, hw);
  om.noalias() = ConstMapMat(kernels.data().data(), co, k9) * cols;
  om.colwise() += Eigen::Map<const Eigen::VectorXd>(bias.data().data(), co);
  if (tape.wants({&x, &kernels, &bias})) {
    tape.record(out, [x, kernels, bias, out, cols = std::move(cols), c, h, w, co,
                      k9, hw]() mutable {
      ConstMapMat g(out.grad().data(), co, hw);
      if (kernels.requires_grad()) {
        MapMat gk(kernels.grad().data(), co, k9);
        gk.noalias() += g * cols.transpose();
      }
      if (bias.requires_grad()) {
        Eigen::Map<Eigen::VectorXd> gb(bias.grad().data(), co);
        gb += g.rowwise().sum();
      }
      if (x.requires_grad()) {
        RowMat gcols(k9, hw);
        gcols.noalias() = ConstMapMat(kernels.data().data(), co, k9).transpose() * g;
        fold3x3_add(gcols, x.grad(), c, h, w);
      }
    });
  }
  return out;
}

Tensor concat_channels(Tape& tape, std::span<const Tensor> xs) {
  if (xs.empty()) throw std::invalid_argument("concat_channels: no inputs");
  const std::size_t h = xs[0].rank() == 3 ? xs[0].dim(1) : 0;
  const std::size_t w = xs[0].rank() == 3 ? xs[0].dim(2) : 0;
  std::size_t channels = 0;
  for (const auto& x : xs) {
    if (x.rank() != 3 || x.dim(1) != h || x.dim(2) != w) {
      throw std::invalid_argument("concat_channels: incompatible shape " +
                                  shape_str(x.shape()) + " vs " +
                                  shape_str(xs[0].shape()));
    }
    channels += x.dim(0);
  }
  Tensor out({channels, h, w});
  std::size_t offset = 0;
  for (const auto& x : xs) {
    std::copy(x.data().begin(), x.data().end(), out.data().begin() + offset);
    offset += x.size();
  }
  if (tape.wants(xs)) {
    std::vector<Tensor> inputs(xs.begin(), xs.end());
    tape.record(out, [inputs, out]() mutable {
      auto g = out.grad();
      std::size_t offset = 0;
      for (auto& x : inputs) {
        if (x.requires_grad()) {
          auto gx = x.grad();
          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[offset + i];
        }
        offset += x.size();
      }
    });
  }
  return out;
}

Tensor stack(Tape& tape, std::span<const Tensor> xs) {
  if (xs.empty()) throw std::invalid_argument("stack: no inputs");
  Shape shape = xs[0].shape();
  for (const auto& x : xs) require_same_shape(x, xs[0], "stack");
  shape.insert(shape.begin(), xs.size());
  Tensor out(shape);
  const std::size_t block = xs[0].size();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::copy(xs[i].data().begin(), xs[i].data().end(),
              out.data().begin() + i * block);
  }
  if (tape.wants(xs)) {
    std::vector<Tensor> inputs(xs.begin(), xs.end());
    tape.record(out, [inputs, out, block]() mutable {
      auto g = out.grad();
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (!inputs[i].requires_grad()) continue;
        auto gx = inputs[i].grad();
        for (std::size_t j = 0; j < block; ++j) gx[j] += g[i * block + j];
      }
    });
  }
  return out;
}

Tensor select(Tape& tape, const Tensor& x, std::size_t index) {
  if (x.rank() < 2 || index >= x.dim(0)) {
    throw std::invalid_argument("select: index " + std::to_string(index) +
                                " invalid for shape " + shape_str(x.shape()));
  }
  Shape shape(x.shape().begin() + 1, x.shape().end());
  const std::size_t block = numel(shape);
  Tensor out(shape);
  std::copy_n(x.data().begin() + index * block, block, out.data().begin());
  if (tape.wants({&x})) {
    tape.record(out, [x, out, index, block]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t j = 0; j < block; ++j) gx[index * block + j] += g[j];
    });
  }
  return out;
}

Tensor residual_add(Tape& tape, const Tensor& out_in, const Tensor& skip) {
  require_rank(out_in, 3, "residual_add");
  require_rank(skip, 3, "residual_add");
  if (out_in.dim(1) != skip.dim(1) || out_in.dim(2) != skip.dim(2)) {
    throw std::invalid_argument("residual_add: spatial mismatch " +
                                shape_str(out_in.shape()) + " vs " +
                                shape_str(skip.shape()));
  }
  const std::size_t shared =
      std::min(out_in.dim(0), skip.dim(0)) * out_in.dim(1) * out_in.dim(2);
  Tensor out = out_in.clone();
  out.set_requires_grad(false);
  for (std::size_t i = 0; i < shared; ++i) out.data()[i] += skip.data()[i];
  if (tape.wants({&out_in, &skip})) {
    tape.record(out, [out_in, skip, out, shared]() mutable {
      auto g = out.grad();
      if (out_in.requires_grad()) {
        auto gx = out_in.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (skip.requires_grad()) {
        auto gs = skip.grad();
        for (std::size_t i = 0; i < shared; ++i) gs[i] += g[i];
      }
    });
  }
  return out;
}

namespace {
std::size_t reflect_index(std::size_t i, std::size_t n) {
  return i < n ? i : 2 * (n - 1) - i;
}
}  // namespace

Tensor pad_reflect(Tape& tape, const Tensor& x, std::size_t pad_bottom,
                   std::size_t pad_right) {
  require_rank(x, 3, "pad_reflect");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (pad_bottom >= h || pad_right >= w) {
    throw std::invalid_argument("pad_reflect: padding exceeds image size " +
                                shape_str(x.shape()));
  }
  const std::size_t ho = h + pad_bottom, wo = w + pad_right;
  Tensor out({c, ho, wo});
  auto src_index = [=](std::size_t ch, std::size_t y, std::size_t xx) {
    return (ch * h + reflect_index(y, h)) * w + reflect_index(xx, w);
  };
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < ho; ++y)
      for (std::size_t xx = 0; xx < wo; ++xx)
        out.data()[(ch * ho + y) * wo + xx] = x.data()[src_index(ch, y, xx)];
  if (tape.wants({&x})) {
    tape.record(out, [x, out, c, ho, wo, src_index]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < ho; ++y)
          for (std::size_t xx = 0; xx < wo; ++xx)
            gx[src_index(ch, y, xx)] += g[(ch * ho + y) * wo + xx];
    });
  }
  return out;
}

Tensor crop(Tape& tape, const Tensor& x, std::size_t height, std::size_t width) {
  require_rank(x, 3, "crop");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (height > h || width > w) {
    throw std::invalid_argument("crop: target larger than input " +
                                shape_str(x.shape()));
  }
  Tensor out({c, height, width});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < height; ++y)
      std::copy_n(x.data().begin() + (ch * h + y) * w, width,
                  out.data().begin() + (ch * height + y) * width);
  if (tape.wants({&x})) {
    tape.record(out, [x, out, c, h, w, height, width]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < height; ++y)
          for (std::size_t xx = 0; xx < width; ++xx)
            gx[(ch * h + y) * w + xx] += g[(ch * height + y) * width + xx];
    });
  }
  return out;
}

Tensor mse_loss(Tape& tape, const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "mse_loss");
  const double n = static_cast<double>(pred.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double diff = pred.data()[i] - target.data()[i];
    acc += diff * diff;
  }
  Tensor out = Tensor::scalar(acc / n);
  if (tape.wants({&pred, &target})) {
    tape.record(out, [pred, target, out, n]() mutable {
      const double g = out.grad()[0] * 2.0 / n;
      auto pv = pred.data();
      auto tv = target.data();
      if (pred.requires_grad()) {
        auto gp = pred.grad();
        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g * (pv[i] - tv[i]);
      }
      if (target.requires_grad()) {
        auto gt = target.grad();
        for (std::size_t i = 0; i < gt.size(); ++i) gt[i] -= g * (pv[i] - tv[i]);
      }
    });
  }
  return out;
}

}  // namespace n3net::ad
