#include "n3net/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "n3net/data.hpp"
#include "n3net/n3_block.hpp"
#include "n3net/nn_select.hpp"
#include "n3net/ops.hpp"

namespace n3net {

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

double central_difference(const std::function<double()>& f, double& x, double h) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * h);
}

void GradCheckResult::update(double analytic, double numeric, const std::string& where,
                             double floor) {
  const double e = relative_error(analytic, numeric, floor);
  if (checked++ == 0 || e > max_rel_error) {
    max_rel_error = e;
    worst = where;
  }
}

namespace {

double weighted_sum(const NeighborWeights& w, const RowMatrix& g) {
  return (w.w.array() * g.array()).sum();
}

}  // namespace

SelectionGradCheck check_selection_gradients(std::size_t instances, std::uint64_t seed,
                                             double h) {
  SelectionGradCheck report;
  Rng rng(seed);
  for (std::size_t n = 0; n < instances; ++n) {
    const std::size_t m = 2 + rng() % 11;
    DistanceRow row;
    row.values.resize(m);
    for (double& v : row.values) v = 3.0 * uniform01(rng);
    if (rng() % 3 == 0) row.self_index = rng() % m;
    const std::size_t k = 1 + rng() % std::min<std::size_t>(4, row.eligible_count());
    double t = 0.2 * std::pow(10.0, uniform01(rng));
    RowMatrix g(k, m);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = 2.0 * uniform01(rng) - 1.0;

    auto loss = [&] { return weighted_sum(relaxed_weights(row, Temperature{t}, k), g); };
    const RelaxedGradient fused = relaxed_weights_backward(row, Temperature{t}, k, g);

    ad::Tape tape;
    ad::Tensor dist({m}, row.values, true);
    ad::Tensor temp({1}, {t}, true);
    const ad::Tensor w = relaxed_weights_taped(tape, dist, temp, k, row.self_index);
    const ad::Tensor target({k, m}, std::vector<double>(g.data(), g.data() + g.size()));
    tape.backward(ad::sum(tape, ad::mul(tape, w, target)));

    const std::string at = "instance " + std::to_string(n) + ", ";
    for (std::size_t i = 0; i < m; ++i) {
      const double numeric = central_difference(loss, row.values[i], h);
      report.fused.update(fused.distances[i], numeric, at + "d[" + std::to_string(i) + "]");
      report.taped.update(dist.grad()[i], numeric, at + "d[" + std::to_string(i) + "]");
    }
    const double numeric_t = central_difference(loss, t, h);
    report.fused.update(fused.temperature, numeric_t, at + "t");
    report.taped.update(temp.grad()[0], numeric_t, at + "t");
  }
  return report;
}

namespace {

GradCheckResult sample_entries(std::vector<NamedTensor>& tensors,
                               const std::function<double()>& loss, Rng& rng, double h,
                               std::size_t per_tensor) {
  GradCheckResult result;
  const double floor = kRelErrorFloor * std::max(1.0, std::abs(loss()));
  for (auto& p : tensors) {
    auto v = p.tensor.data();
    auto g = p.tensor.grad();
    for (std::size_t s = 0; s < std::min(per_tensor, v.size()); ++s) {
      const std::size_t i = rng() % v.size();
      const double numeric = central_difference(loss, v[i], h);
      result.update(g[i], numeric, p.name + "[" + std::to_string(i) + "]", floor);
    }
  }
  return result;
}

}  // namespace

GradCheckResult check_block_gradient(std::size_t size, std::uint64_t seed, double h,
                                     std::size_t per_tensor) {
  Rng rng(seed);
  const N3NetConfig net_cfg = N3NetConfig::desk_default(2);
  const N3BlockConfig& cfg = net_cfg.blocks.front();
  const std::size_t channels = net_cfg.interface_width;
  const N3BlockParams params = init_block_params(cfg, channels, rng);
  ad::Tensor input({channels, size, size}, true);
  for (double& x : input.data()) x = uniform01(rng);
  const std::size_t out_channels = channels * (cfg.k + 1);
  ad::Tensor probe({out_channels, size, size});
  for (double& x : probe.data()) x = 2.0 * uniform01(rng) - 1.0;

  std::vector<NamedTensor> tensors;
  for (std::size_t i = 0; i < params.embed.layers.size(); ++i) {
    tensors.push_back({"embed.conv" + std::to_string(i) + ".kernels", params.embed.layers[i].kernels});
    tensors.push_back({"embed.conv" + std::to_string(i) + ".bias", params.embed.layers[i].bias});
  }
  for (std::size_t i = 0; i < params.temperature.layers.size(); ++i) {
    tensors.push_back({"temp.conv" + std::to_string(i) + ".kernels",
                       params.temperature.layers[i].kernels});
    tensors.push_back({"temp.conv" + std::to_string(i) + ".bias",
                       params.temperature.layers[i].bias});
  }
  tensors.push_back({"input", input});

  std::vector<std::vector<bool>> pattern;
  {
    ad::ReluPatternScope pin(ad::ReluPatternScope::Mode::kRecord, pattern);
    ad::Tape tape;
    tape.backward(ad::sum(tape, ad::mul(tape, n3_forward(tape, input, params, cfg), probe)));
  }
  auto loss = [&] {
    ad::ReluPatternScope pin(ad::ReluPatternScope::Mode::kReplay, pattern);
    ad::Tape tape(ad::Tape::Mode::kInference);
    return ad::sum(tape, ad::mul(tape, n3_forward(tape, input, params, cfg), probe)).item();
  };
  return sample_entries(tensors, loss, rng, h, per_tensor);
}

GradCheckResult check_network_gradient(std::size_t image_size, std::uint64_t seed,
                                       double h, std::size_t per_tensor) {
  Rng rng(seed);
  N3Net net(N3NetConfig::desk_default(2), seed);
  auto params = net.parameters();
  // Nonzero residual branches so every path carries signal.
  for (auto& p : params) {
    auto v = p.tensor.data();
    if (p.name.ends_with("kernels") &&
        std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) {
      for (double& x : v) x = 0.2 * (2.0 * uniform01(rng) - 1.0);
    }
  }
  ad::Tensor image({1, image_size, image_size}, true);
  ad::Tensor target({1, image_size, image_size});
  for (double& x : image.data()) x = uniform01(rng);
  for (double& x : target.data()) x = uniform01(rng);

  std::vector<std::vector<bool>> pattern;
  {
    ad::ReluPatternScope pin(ad::ReluPatternScope::Mode::kRecord, pattern);
    ad::Tape tape;
    tape.backward(ad::mse_loss(tape, net.forward(tape, image), target));
  }
  // Finite differences of the network with its activation pattern pinned:
  // smooth around the base point and equal to it in value and gradient there.
  auto loss = [&] {
    ad::ReluPatternScope pin(ad::ReluPatternScope::Mode::kReplay, pattern);
    ad::Tape tape(ad::Tape::Mode::kInference);
    return ad::mse_loss(tape, net.forward(tape, image), target).item();
  };

  params.push_back({"input", image});
  return sample_entries(params, loss, rng, h, per_tensor);
}

}  // namespace n3net
