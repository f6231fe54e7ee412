#include "n3net/limit_checks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "n3net/config_text.hpp"
#include "n3net/n3_block.hpp"
#include "n3net/nn_select.hpp"

namespace n3net {
namespace {

struct Instance {
  DistanceRow row;
  double t = 1.0;
  std::size_t k = 1;
};

// M in [1, 32], distances in [0, 5), t log-uniform in [0.01, 10].
Instance random_instance(Rng& rng) {
  Instance in;
  const std::size_t m = 1 + rng() % 32;
  in.row.values.resize(m);
  for (double& v : in.row.values) v = 5.0 * uniform01(rng);
  if (m > 1 && rng() % 4 == 0) in.row.self_index = rng() % m;
  in.t = std::pow(10.0, 3.0 * uniform01(rng) - 2.0);
  in.k = 1 + rng() % in.row.eligible_count();
  return in;
}

std::string where(std::size_t n) { return "instance " + std::to_string(n); }

CheckOutcome finish(CheckOutcome out) {
  out.pass = out.worst <= out.tolerance;
  return out;
}

}  // namespace

CheckOutcome check_simplex(std::size_t instances, std::uint64_t seed, double tolerance) {
  CheckOutcome out{"simplex", 0.0, tolerance, false, ""};
  Rng rng(seed);
  for (std::size_t n = 0; n < instances; ++n) {
    const Instance in = random_instance(rng);
    const NeighborWeights w = relaxed_weights(in.row, Temperature{in.t}, in.k);
    for (Eigen::Index j = 0; j < w.w.rows(); ++j) {
      double err = std::abs(w.w.row(j).sum() - 1.0);
      err = std::max(err, std::max(0.0, -w.w.row(j).minCoeff()));
      err = std::max(err, std::max(0.0, w.w.row(j).maxCoeff() - 1.0));
      if (!std::isfinite(err)) err = std::numeric_limits<double>::infinity();
      if (err > out.worst || (n == 0 && j == 0)) {
        out.worst = err;
        out.detail = where(n) + ", row " + std::to_string(j);
      }
    }
  }
  return finish(out);
}

CheckOutcome check_attention_limit(std::size_t instances, std::uint64_t seed,
                                   double tolerance) {
  CheckOutcome out{"attention (k=1)", 0.0, tolerance, false, ""};
  Rng rng(seed);
  for (std::size_t n = 0; n < instances; ++n) {
    Instance in = random_instance(rng);
    in.row.self_index.reset();
    const NeighborWeights w = relaxed_weights(in.row, Temperature{in.t}, 1);
    const auto& d = in.row.values;
    const double dmin = *std::min_element(d.begin(), d.end());
    std::vector<double> e(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) e[i] = std::exp(-(d[i] - dmin) / in.t);
    const double total = std::accumulate(e.begin(), e.end(), 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double err = std::abs(w.w(0, static_cast<Eigen::Index>(i)) - e[i] / total);
      if (err > out.worst) {
        out.worst = err;
        out.detail = where(n) + ", entry " + std::to_string(i);
      }
    }
  }
  return finish(out);
}

CheckOutcome check_hard_limit(std::size_t instances, std::uint64_t seed,
                              double temperature, double min_gap, double tolerance) {
  CheckOutcome out{"hard KNN limit", 0.0, tolerance, false, ""};
  Rng rng(seed);
  for (std::size_t n = 0; n < instances; ++n) {
    const std::size_t m = 1 + rng() % 32;
    std::vector<double> sorted(m);
    double level = uniform01(rng);
    for (double& v : sorted) {
      v = level;
      level += min_gap + 0.4 * uniform01(rng);
    }
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = m; i > 1; --i) std::swap(perm[i - 1], perm[rng() % i]);
    DistanceRow row;
    row.values.resize(m);
    for (std::size_t i = 0; i < m; ++i) row.values[perm[i]] = sorted[i];
    const std::size_t k = 1 + rng() % m;

    const NeighborWeights w = relaxed_weights(row, Temperature{temperature}, k);
    const auto picks = knn_select(row, k);
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t i = 0; i < m; ++i) {
        const double target = picks[j] == i ? 1.0 : 0.0;
        const double err =
            std::abs(w.w(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) - target);
        if (err > out.worst || std::isnan(err)) {
          out.worst = std::isnan(err) ? std::numeric_limits<double>::infinity() : err;
          out.detail = where(n) + ", row " + std::to_string(j) + ", entry " +
                       std::to_string(i);
        }
      }
    }
  }
  return finish(out);
}

CheckOutcome check_sampler_marginals(std::size_t instances, std::size_t samples,
                                     std::uint64_t seed, double max_z) {
  CheckOutcome out{"sampler first-pick marginals", 0.0, max_z, false, ""};
  Rng rng(seed);
  for (std::size_t n = 0; n < instances; ++n) {
    const std::size_t m = 2 + rng() % 7;
    DistanceRow row;
    row.values.resize(m);
    for (double& v : row.values) v = uniform01(rng);
    if (rng() % 4 == 0) row.self_index = rng() % m;
    const double t = 0.3 + 0.7 * uniform01(rng);
    const std::size_t k = 1 + rng() % row.eligible_count();

    const NeighborWeights w = relaxed_weights(row, Temperature{t}, k);
    std::vector<std::size_t> counts(m, 0);
    const std::uint64_t base = rng();
    for (std::size_t s = 0; s < samples; ++s) {
      ++counts[sample_stochastic_neighbors(row, Temperature{t}, k, base + s).front()];
    }
    for (std::size_t i = 0; i < m; ++i) {
      const double p = w.w(0, static_cast<Eigen::Index>(i));
      const double freq = static_cast<double>(counts[i]) / static_cast<double>(samples);
      const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(samples));
      double z = 0.0;
      if (se > 0.0) {
        z = std::abs(freq - p) / se;
      } else if (freq != p) {
        z = std::numeric_limits<double>::infinity();
      }
      if (z > out.worst) {
        out.worst = z;
        out.detail = where(n) + ", entry " + std::to_string(i) + " (p=" +
                     format_double(p) + ", freq=" + format_double(freq) + ")";
      }
    }
  }
  return finish(out);
}

}  // namespace n3net
