#pragma once

#include <cstddef>
#include <vector>

#include "n3net/tensor.hpp"

namespace n3net {

/// Geometry of a strided decomposition of a [channels, image_h, image_w]
/// tensor into square patches.
struct PatchGrid {
  std::size_t image_h = 0;
  std::size_t image_w = 0;
  std::size_t patch = 1;
  std::size_t stride = 1;
  std::size_t channels = 1;

  /// Throws std::invalid_argument unless 1 <= stride <= patch <= image size
  /// and (image - patch) is a multiple of stride on both axes.
  void validate() const;

  std::size_t rows() const { return (image_h - patch) / stride + 1; }
  std::size_t cols() const { return (image_w - patch) / stride + 1; }
  std::size_t count() const { return rows() * cols(); }
  std::size_t patch_size() const { return channels * patch * patch; }
  std::size_t top(std::size_t index) const { return (index / cols()) * stride; }
  std::size_t left(std::size_t index) const { return (index % cols()) * stride; }
};

/// Smallest size >= `size` that a grid with this patch and stride tiles.
std::size_t next_valid_size(std::size_t size, std::size_t patch,
                            std::size_t stride);

/// Side length in pixels of the square matching region.
struct WindowSpec {
  std::size_t region = 0;
};

/// Candidate lists of every query patch, padded to a common width.
struct CandidateTable {
  std::size_t queries = 0;
  std::size_t width = 0;                 // max candidates of any query
  std::vector<std::size_t> count;        // per query
  std::vector<std::size_t> index;        // queries * width, row-major
};

/// x [C,H,W] -> [count, C*p*p]; row i is patch i in row-major grid order,
/// flattened channel-major.
ad::Tensor im2col(ad::Tape& tape, const ad::Tensor& x, const PatchGrid& grid);

/// Inverse of im2col that averages overlapping contributions per pixel.
ad::Tensor col2im_avg(ad::Tape& tape, const ad::Tensor& patches,
                      const PatchGrid& grid);

/// Patches lying fully inside a region x region box centred on the query
/// patch, shifted to stay inside the image; the query itself is excluded.
std::vector<std::size_t> candidate_window(std::size_t query,
                                          const PatchGrid& grid,
                                          const WindowSpec& window);

CandidateTable build_candidate_table(const PatchGrid& grid,
                                     const WindowSpec& window);

/// T [1,H,W] -> [count] holding T at each patch's centre pixel
/// (offset floor(p/2) from the top-left corner).
ad::Tensor center_temperature(ad::Tape& tape, const ad::Tensor& temperature_map,
                              const PatchGrid& grid);

}  // namespace n3net
