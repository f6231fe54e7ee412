#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

namespace n3net {

/// Denominator floor of relative_error per unit of loss magnitude; checks use
/// kRelErrorFloor * max(1, |loss|) since finite-difference round-off grows
/// with |loss| / h.
inline constexpr double kRelErrorFloor = 1e-6;

/// |a - b| / max(|a|, |b|, floor).
double relative_error(double a, double b, double floor = kRelErrorFloor);

/// (f(x + h) - f(x - h)) / 2h, evaluated by moving `x` in place and
/// restoring it afterwards.
double central_difference(const std::function<double()>& f, double& x, double h);

struct GradCheckResult {
  double max_rel_error = 0.0;
  /// Location of the worst entry, e.g. "instance 12, d[3]".
  std::string worst;
  std::size_t checked = 0;

  void update(double analytic, double numeric, const std::string& where,
              double floor = kRelErrorFloor);
};

struct SelectionGradCheck {
  GradCheckResult fused;  // relaxed_weights_backward vs finite differences
  GradCheckResult taped;  // tape gradients vs finite differences
};

/// Random (d, t, k, upstream) instances with up to 12 candidates; some rows
/// mask a self candidate. The scalar checked is sum(upstream .* weights).
SelectionGradCheck check_selection_gradients(std::size_t instances, std::uint64_t seed,
                                             double h = 1e-4);

/// One relaxed N3 block (desk geometry, learned embedding and temperature)
/// on a random [interface, size, size] input; loss is sum(output .* R) for a
/// random R. Checks `per_tensor` entries of every block parameter and of
/// the input. ReLU patterns are pinned at the base point.
GradCheckResult check_block_gradient(std::size_t size, std::uint64_t seed,
                                     double h = 1e-4, std::size_t per_tensor = 8);

/// End-to-end check of a randomly initialised desk-scale network (relaxed
/// blocks, learned embedding and temperature) on an image_size^2 input.
/// Checks `per_tensor` random entries of every parameter plus input pixels;
/// loss is the MSE against a random target. ReLU patterns are pinned at the
/// base point so the finite differences see a smooth function.
GradCheckResult check_network_gradient(std::size_t image_size, std::uint64_t seed,
                                       double h = 1e-4, std::size_t per_tensor = 3);

}  // namespace n3net
