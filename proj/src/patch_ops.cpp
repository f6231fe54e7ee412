#include "n3net/patch_ops.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace n3net {

void PatchGrid::validate() const {
  auto fail = [&](const std::string& what) {
    throw std::invalid_argument(
        "patch grid " + std::to_string(channels) + "x" + std::to_string(image_h) +
        "x" + std::to_string(image_w) + " p=" + std::to_string(patch) +
        " s=" + std::to_string(stride) + ": " + what);
  };
  if (patch < 1) fail("patch must be >= 1");
  if (stride < 1 || stride > patch) fail("stride must be in [1, patch]");
  if (channels < 1) fail("channels must be >= 1");
  if (image_h < patch || image_w < patch) fail("image smaller than patch");
  if ((image_h - patch) % stride != 0) fail("height - patch not divisible by stride");
  if ((image_w - patch) % stride != 0) fail("width - patch not divisible by stride");
}

std::size_t next_valid_size(std::size_t size, std::size_t patch,
                            std::size_t stride) {
  if (size <= patch) return patch;
  const std::size_t rem = (size - patch) % stride;
  return rem == 0 ? size : size + (stride - rem);
}

namespace {

void check_image(const ad::Tensor& x, const PatchGrid& grid) {
  grid.validate();
  if (x.rank() != 3 || x.dim(0) != grid.channels || x.dim(1) != grid.image_h ||
      x.dim(2) != grid.image_w) {
    throw std::invalid_argument("tensor " + ad::shape_str(x.shape()) +
                                " does not match patch grid " +
                                std::to_string(grid.channels) + "x" +
                                std::to_string(grid.image_h) + "x" +
                                std::to_string(grid.image_w));
  }
}

// Visits every (patch entry, pixel) pair of the grid.
template <typename Fn>
void for_each_patch_pixel(const PatchGrid& g, Fn&& fn) {
  const std::size_t pp = g.patch * g.patch;
  const std::size_t dim = g.patch_size();
  for (std::size_t i = 0; i < g.count(); ++i) {
    const std::size_t top = g.top(i), left = g.left(i);
    for (std::size_t c = 0; c < g.channels; ++c) {
      for (std::size_t py = 0; py < g.patch; ++py) {
        const std::size_t pix_row = (c * g.image_h + top + py) * g.image_w + left;
        const std::size_t col_row = i * dim + c * pp + py * g.patch;
        for (std::size_t px = 0; px < g.patch; ++px) fn(col_row + px, pix_row + px);
      }
    }
  }
}

std::vector<double> coverage_counts(const PatchGrid& g) {
  std::vector<double> counts(g.image_h * g.image_w, 0.0);
  for (std::size_t i = 0; i < g.count(); ++i) {
    for (std::size_t py = 0; py < g.patch; ++py)
      for (std::size_t px = 0; px < g.patch; ++px)
        counts[(g.top(i) + py) * g.image_w + g.left(i) + px] += 1.0;
  }
  return counts;
}

}  // namespace

ad::Tensor im2col(ad::Tape& tape, const ad::Tensor& x, const PatchGrid& grid) {
  check_image(x, grid);
  ad::Tensor out({grid.count(), grid.patch_size()});
  auto xv = x.data();
  auto o = out.data();
  for_each_patch_pixel(grid, [&](std::size_t col, std::size_t pix) { o[col] = xv[pix]; });
  if (tape.wants({&x})) {
    tape.record(out, [x, out, grid]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for_each_patch_pixel(grid, [&](std::size_t col, std::size_t pix) { gx[pix] += g[col]; });
    });
  }
  return out;
}

ad::Tensor col2im_avg(ad::Tape& tape, const ad::Tensor& patches,
                      const PatchGrid& grid) {
  grid.validate();
  if (patches.rank() != 2 || patches.dim(0) != grid.count() ||
      patches.dim(1) != grid.patch_size()) {
    throw std::invalid_argument("col2im_avg: patches " +
                                ad::shape_str(patches.shape()) + " do not match grid of " +
                                std::to_string(grid.count()) + " patches of size " +
                                std::to_string(grid.patch_size()));
  }
  const std::vector<double> counts = coverage_counts(grid);
  const std::size_t plane = grid.image_h * grid.image_w;
  std::vector<double> inv(grid.channels * plane);
  for (std::size_t i = 0; i < inv.size(); ++i) inv[i] = 1.0 / counts[i % plane];

  ad::Tensor out({grid.channels, grid.image_h, grid.image_w});
  auto pv = patches.data();
  auto o = out.data();
  for_each_patch_pixel(grid, [&](std::size_t col, std::size_t pix) {
    o[pix] += pv[col] * inv[pix];
  });
  if (tape.wants({&patches})) {
    tape.record(out, [patches, out, grid, inv = std::move(inv)]() mutable {
      auto g = out.grad();
      auto gp = patches.grad();
      for_each_patch_pixel(grid, [&](std::size_t col, std::size_t pix) {
        gp[col] += g[pix] * inv[pix];
      });
    });
  }
  return out;
}

namespace {

// Grid steps along one axis whose patch lies inside the clamped box.
std::pair<std::size_t, std::size_t> window_range(std::size_t pos, std::size_t steps,
                                                 std::size_t image,
                                                 std::size_t patch,
                                                 std::size_t stride,
                                                 std::size_t region) {
  // Corner offsets of patches inside the box span region - patch pixels,
  // centred on the query corner.
  const long span = static_cast<long>(std::min(region, image)) - static_cast<long>(patch);
  const long half = span / 2;
  long lo = static_cast<long>(pos) - half;
  long hi = lo + span;
  const long max_corner = static_cast<long>(image - patch);
  if (lo < 0) {
    hi -= lo;
    lo = 0;
  }
  if (hi > max_corner) {
    lo -= hi - max_corner;
    hi = max_corner;
    lo = std::max(lo, 0L);
  }
  const long s = static_cast<long>(stride);
  const std::size_t first = static_cast<std::size_t>((lo + s - 1) / s);
  const std::size_t last = std::min(static_cast<std::size_t>(hi / s), steps - 1);
  return {first, last};
}

}  // namespace

std::vector<std::size_t> candidate_window(std::size_t query,
                                          const PatchGrid& grid,
                                          const WindowSpec& window) {
  grid.validate();
  if (query >= grid.count()) {
    throw std::invalid_argument("query patch " + std::to_string(query) +
                                " out of range for " + std::to_string(grid.count()) +
                                " patches");
  }
  if (window.region < grid.patch) {
    throw std::invalid_argument("window region " + std::to_string(window.region) +
                                " smaller than patch " + std::to_string(grid.patch));
  }
  const auto [r0, r1] = window_range(grid.top(query), grid.rows(), grid.image_h,
                                     grid.patch, grid.stride, window.region);
  const auto [c0, c1] = window_range(grid.left(query), grid.cols(), grid.image_w,
                                     grid.patch, grid.stride, window.region);
  std::vector<std::size_t> out;
  for (std::size_t r = r0; r <= r1; ++r) {
    for (std::size_t c = c0; c <= c1; ++c) {
      const std::size_t idx = r * grid.cols() + c;
      if (idx != query) out.push_back(idx);
    }
  }
  return out;
}

CandidateTable build_candidate_table(const PatchGrid& grid,
                                     const WindowSpec& window) {
  CandidateTable table;
  table.queries = grid.count();
  std::vector<std::vector<std::size_t>> lists(table.queries);
  for (std::size_t q = 0; q < table.queries; ++q) {
    lists[q] = candidate_window(q, grid, window);
    table.width = std::max(table.width, lists[q].size());
  }
  table.count.resize(table.queries);
  table.index.assign(table.queries * table.width, 0);
  for (std::size_t q = 0; q < table.queries; ++q) {
    table.count[q] = lists[q].size();
    std::copy(lists[q].begin(), lists[q].end(), table.index.begin() + q * table.width);
  }
  return table;
}

ad::Tensor center_temperature(ad::Tape& tape, const ad::Tensor& temperature_map,
                              const PatchGrid& grid) {
  PatchGrid single = grid;
  single.channels = 1;
  check_image(temperature_map, single);
  const std::size_t n = grid.count();
  const std::size_t offset = grid.patch / 2;
  std::vector<std::size_t> pixel(n);
  for (std::size_t i = 0; i < n; ++i) {
    pixel[i] = (grid.top(i) + offset) * grid.image_w + grid.left(i) + offset;
  }
  ad::Tensor out({n});
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = temperature_map.data()[pixel[i]];
  if (tape.wants({&temperature_map})) {
    tape.record(out, [temperature_map, out, pixel = std::move(pixel)]() mutable {
      auto g = out.grad();
      auto gt = temperature_map.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gt[pixel[i]] += g[i];
    });
  }
  return out;
}

}  // namespace n3net
