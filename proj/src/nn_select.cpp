#include "n3net/nn_select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "n3net/ops.hpp"

namespace n3net {

std::size_t DistanceRow::eligible_count() const {
  return values.size() - (self_index ? 1 : 0);
}

void DistanceRow::validate() const {
  if (values.empty()) {
    throw std::invalid_argument("distance row is empty");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]) || values[i] < 0.0) {
      throw std::invalid_argument("distance " + std::to_string(i) +
                                  " must be finite and >= 0, got " +
                                  std::to_string(values[i]));
    }
  }
  if (self_index && *self_index >= values.size()) {
    throw std::invalid_argument("self_index " + std::to_string(*self_index) +
                                " out of range for M=" +
                                std::to_string(values.size()));
  }
}

LogitState initial_logits(const DistanceRow& d) {
  LogitState state;
  state.logits.resize(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    state.logits[i] = d.eligible(i) ? -d.values[i] : kMaskedLogit;
  }
  return state;
}

namespace {

void check_k(const DistanceRow& d, std::size_t k) {
  d.validate();
  const std::size_t eligible = d.eligible_count();
  if (eligible == 0) {
    throw std::invalid_argument("all candidates are masked (M=" +
                                std::to_string(d.size()) + ")");
  }
  if (k < 1 || k > eligible) {
    throw std::invalid_argument("k=" + std::to_string(k) +
                                " out of range for M=" + std::to_string(d.size()) +
                                " with " + std::to_string(eligible) +
                                " eligible candidates");
  }
}

void check_temperature(Temperature t) {
  if (!(t.value > 0.0) || !std::isfinite(t.value)) {
    throw std::invalid_argument("temperature must be positive and finite, got " +
                                std::to_string(t.value));
  }
}

std::vector<double> eligible_values(const DistanceRow& d) {
  std::vector<double> out;
  out.reserve(d.eligible_count());
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.eligible(i)) out.push_back(d.values[i]);
  }
  return out;
}

}  // namespace

std::vector<std::size_t> knn_select(const DistanceRow& d, std::size_t k) {
  check_k(d, k);
  std::vector<std::size_t> order;
  order.reserve(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.eligible(i)) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return d.values[a] < d.values[b];
  });
  order.resize(k);
  return order;
}

namespace kernels {
namespace {

// One softmax step over logits a / t. z is shifted so that max(z) = 0.
struct Step {
  std::vector<double> z, e, w;
  double sum = 0.0;       // sum of e
  std::size_t top = 0;    // argmax of z, first on ties
  double second = 0.0;    // max of z over l != top
  double sum_rest = 0.0;  // sum over l != top of exp(z_l - second)
};

void softmax_step(std::span<const double> a, double t, Step& s) {
  const std::size_t m = a.size();
  s.z.resize(m);
  s.e.resize(m);
  s.w.resize(m);
  for (std::size_t i = 0; i < m; ++i) s.z[i] = a[i] / t;
  s.top = static_cast<std::size_t>(
      std::max_element(s.z.begin(), s.z.end()) - s.z.begin());
  const double zmax = s.z[s.top];
  s.sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    s.z[i] -= zmax;
    s.e[i] = std::exp(s.z[i]);
    s.sum += s.e[i];
  }
  for (std::size_t i = 0; i < m; ++i) s.w[i] = s.e[i] / s.sum;
  if (m > 1) {
    s.second = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
      if (i != s.top) s.second = std::max(s.second, s.z[i]);
    }
    s.sum_rest = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (i != s.top) s.sum_rest += std::exp(s.z[i] - s.second);
    }
  }
}

// log(1 - w_i), evaluated as logsumexp over l != i minus logsumexp over all l.
// Exact for w_i arbitrarily close to 1.
double log1m_weight(const Step& s, std::size_t i) {
  const double log_sum = std::log(s.sum);
  if (i == s.top) return s.second + std::log(s.sum_rest) - log_sum;
  return std::log(s.sum - s.e[i]) - log_sum;
}

// Adds the VJP of z -> log(1 - softmax(z)) for upstream g into gz.
void log1m_weight_vjp(const Step& s, std::span<const double> g,
                      std::span<double> gz) {
  const std::size_t m = s.z.size();
  double g_total = 0.0;
  double a = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    g_total += g[i];
    if (i != s.top) a += g[i] / (s.sum - s.e[i]);
  }
  const double g_top = g[s.top];
  for (std::size_t l = 0; l < m; ++l) {
    double v;
    if (l == s.top) {
      v = a;
    } else {
      v = s.e[l] * (a - g[l] / (s.sum - s.e[l])) +
          g_top * std::exp(s.z[l] - s.second) / s.sum_rest;
    }
    gz[l] += v - s.w[l] * g_total;
  }
}

void run_forward(std::span<const double> d, double t, std::size_t k,
                 std::vector<Step>& steps) {
  const std::size_t m = d.size();
  std::vector<double> a(m);
  for (std::size_t i = 0; i < m; ++i) a[i] = -d[i];
  steps.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    softmax_step(a, t, steps[j]);
    if (j + 1 < k) {
      for (std::size_t i = 0; i < m; ++i) a[i] += log1m_weight(steps[j], i);
    }
  }
}

void check_kernel_args(std::span<const double> d, double t, std::size_t k) {
  if (d.empty()) throw std::invalid_argument("no eligible candidates");
  if (k < 1 || k > d.size()) {
    throw std::invalid_argument("k=" + std::to_string(k) + " out of range for " +
                                std::to_string(d.size()) + " candidates");
  }
  if (!(t > 0.0)) {
    throw std::invalid_argument("temperature must be positive, got " +
                                std::to_string(t));
  }
}

}  // namespace

void relax_forward(std::span<const double> d, double t, std::size_t k,
                   std::span<double> out, std::size_t stride) {
  check_kernel_args(d, t, k);
  std::vector<Step> steps;
  run_forward(d, t, k, steps);
  for (std::size_t j = 0; j < k; ++j) {
    std::copy(steps[j].w.begin(), steps[j].w.end(), out.begin() + j * stride);
  }
}

void relax_backward(std::span<const double> d, double t, std::size_t k,
                    std::span<const double> upstream, std::size_t stride,
                    std::span<double> grad_d, double& grad_t) {
  check_kernel_args(d, t, k);
  const std::size_t m = d.size();
  std::vector<Step> steps;
  run_forward(d, t, k, steps);

  std::vector<double> ga(m, 0.0);  // d loss / d a_{j+1}
  std::vector<double> gz(m);
  for (std::size_t j = k; j-- > 0;) {
    const Step& s = steps[j];
    const double* g = upstream.data() + j * stride;
    double dot = 0.0;
    for (std::size_t i = 0; i < m; ++i) dot += s.w[i] * g[i];
    for (std::size_t i = 0; i < m; ++i) gz[i] = s.w[i] * (g[i] - dot);
    if (j + 1 < k) log1m_weight_vjp(s, ga, gz);
    // z = a / t; gz sums to zero, so the shift in s.z does not matter.
    double zdot = 0.0;
    for (std::size_t i = 0; i < m; ++i) zdot += gz[i] * s.z[i];
    grad_t -= zdot / t;
    for (std::size_t i = 0; i < m; ++i) ga[i] += gz[i] / t;
  }
  for (std::size_t i = 0; i < m; ++i) grad_d[i] -= ga[i];
}

}  // namespace kernels

NeighborWeights relaxed_weights(const DistanceRow& d, Temperature t,
                                std::size_t k) {
  check_k(d, k);
  check_temperature(t);
  const std::vector<double> values = eligible_values(d);
  RowMatrix compact(static_cast<Eigen::Index>(k),
                    static_cast<Eigen::Index>(values.size()));
  kernels::relax_forward(values, t.value, k,
                         std::span<double>(compact.data(), compact.size()),
                         values.size());
  NeighborWeights out{RowMatrix::Zero(static_cast<Eigen::Index>(k),
                                      static_cast<Eigen::Index>(d.size()))};
  for (std::size_t i = 0, c = 0; i < d.size(); ++i) {
    if (!d.eligible(i)) continue;
    out.w.col(static_cast<Eigen::Index>(i)) = compact.col(static_cast<Eigen::Index>(c++));
  }
  return out;
}

RelaxedGradient relaxed_weights_backward(const DistanceRow& d, Temperature t,
                                         std::size_t k,
                                         const RowMatrix& upstream) {
  check_k(d, k);
  check_temperature(t);
  if (static_cast<std::size_t>(upstream.rows()) != k ||
      static_cast<std::size_t>(upstream.cols()) != d.size()) {
    throw std::invalid_argument("upstream must be k x M = " + std::to_string(k) +
                                "x" + std::to_string(d.size()));
  }
  const std::vector<double> values = eligible_values(d);
  const std::size_t m = values.size();
  RowMatrix compact_up(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0, c = 0; i < d.size(); ++i) {
    if (!d.eligible(i)) continue;
    compact_up.col(static_cast<Eigen::Index>(c++)) = upstream.col(static_cast<Eigen::Index>(i));
  }
  std::vector<double> grad(m, 0.0);
  RelaxedGradient out;
  kernels::relax_backward(values, t.value, k,
                          std::span<const double>(compact_up.data(), compact_up.size()),
                          m, grad, out.temperature);
  out.distances.assign(d.size(), 0.0);
  for (std::size_t i = 0, c = 0; i < d.size(); ++i) {
    if (d.eligible(i)) out.distances[i] = grad[c++];
  }
  return out;
}

std::vector<std::size_t> sample_stochastic_neighbors(const DistanceRow& d,
                                                     Temperature t,
                                                     std::size_t k,
                                                     std::uint64_t rng_seed) {
  check_k(d, k);
  check_temperature(t);
  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  LogitState state = initial_logits(d);
  const std::size_t m = d.size();
  std::vector<double> p(m);
  std::vector<std::size_t> picks;
  picks.reserve(k);
  for (std::size_t j = 0; j < k; ++j, ++state.step) {
    const double zmax =
        *std::max_element(state.logits.begin(), state.logits.end()) / t.value;
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      p[i] = state.logits[i] == kMaskedLogit
                 ? 0.0
                 : std::exp(state.logits[i] / t.value - zmax);
      total += p[i];
    }
    const double u = uniform(rng) * total;
    double acc = 0.0;
    std::size_t pick = m;
    std::size_t last_eligible = m;
    for (std::size_t i = 0; i < m; ++i) {
      if (p[i] <= 0.0) continue;
      last_eligible = i;
      acc += p[i];
      if (u < acc) {
        pick = i;
        break;
      }
    }
    if (pick == m) pick = last_eligible;  // u rounded onto the total
    picks.push_back(pick);
    state.logits[pick] = kMaskedLogit;
  }
  return picks;
}

RowMatrix continuous_aggregate(const NeighborWeights& w, const RowMatrix& items) {
  if (w.m() != static_cast<std::size_t>(items.rows())) {
    throw std::invalid_argument("weights have " + std::to_string(w.m()) +
                                " columns but there are " +
                                std::to_string(items.rows()) + " items");
  }
  return w.w * items;
}

std::vector<double> max_weight_diagnostic(const NeighborWeights& w) {
  std::vector<double> out(w.k());
  for (std::size_t j = 0; j < w.k(); ++j) {
    out[j] = w.w.row(static_cast<Eigen::Index>(j)).maxCoeff();
  }
  return out;
}

ad::Tensor relaxed_weights_taped(ad::Tape& tape, const ad::Tensor& distances,
                                 const ad::Tensor& temperature, std::size_t k,
                                 std::optional<std::size_t> self_index) {
  DistanceRow row{std::vector<double>(distances.data().begin(), distances.data().end()),
                  self_index};
  check_k(row, k);
  check_temperature(Temperature{temperature.item()});
  std::vector<bool> mask(row.size(), false);
  if (self_index) mask[*self_index] = true;

  ad::Tensor logits = ad::masked_fill(tape, ad::neg(tape, distances), mask, kMaskedLogit);
  std::vector<ad::Tensor> rows;
  rows.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    ad::Tensor w = ad::softmax(tape, ad::div_scalar(tape, logits, temperature));
    rows.push_back(w);
    if (j + 1 < k) logits = ad::add(tape, logits, ad::log1m(tape, w));
  }
  return ad::stack(tape, rows);
}

}  // namespace n3net
