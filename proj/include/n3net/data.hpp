#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "n3net/image.hpp"

namespace n3net {

/// Self-similar synthetic images: a random tile repeated across the image.
struct SyntheticSpec {
  std::size_t image_size = 32;
  std::size_t tile_size = 8;
  std::size_t n_train = 32;
  std::size_t n_val = 8;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const SyntheticSpec&) const = default;
};

struct Dataset {
  std::vector<Image> train;
  std::vector<Image> val;
};

/// Peak-to-peak amplitude of the smooth ramp added to every image.
inline constexpr double kRampAmplitude = 0.1;

/// Each image tiles one random tile_size x tile_size texture, adds a
/// linear ramp and clamps to [0,1]. Deterministic per seed.
Dataset gen_synthetic(const SyntheticSpec& spec);
Image gen_synthetic_image(std::size_t image_size, std::size_t tile_size,
                          std::uint64_t seed);

struct NoiseSpec {
  /// Standard deviation in [0,1] intensity units.
  double sigma = 25.0 / 255.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// clean + N(0, sigma^2) per pixel, not clamped.
Image add_noise(const Image& clean, const NoiseSpec& noise);

/// One of the 8 flips/90-degree rotations of the square symmetry group:
/// bit 0 mirrors columns, bits 1-2 count quarter turns.
Image transform(const Image& image, unsigned code);

/// size x size window starting at (top, left).
Image crop(const Image& image, std::size_t top, std::size_t left, std::size_t size);

/// Mixes several integers into one seed (splitmix64 finaliser chain).
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts);

}  // namespace n3net
