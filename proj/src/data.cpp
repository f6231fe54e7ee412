#include "n3net/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace n3net {

void SyntheticSpec::validate() const {
  if (image_size == 0 || tile_size == 0) {
    throw std::invalid_argument("synthetic spec: sizes must be positive");
  }
  if (image_size % tile_size != 0) {
    throw std::invalid_argument("synthetic spec: tile_size " + std::to_string(tile_size) +
                                " does not divide image_size " +
                                std::to_string(image_size));
  }
}

void NoiseSpec::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("noise spec: sigma must be finite and >= 0");
  }
}

std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x9E3779B97F4A7C15ULL;
  for (std::uint64_t p : parts) {
    std::uint64_t z = h ^ (p + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    h = z ^ (z >> 31);
  }
  return h;
}

namespace {

double uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

Image gen_synthetic_image(std::size_t image_size, std::size_t tile_size,
                          std::uint64_t seed) {
  SyntheticSpec{image_size, tile_size, 0, 0, seed}.validate();
  std::mt19937_64 rng(seed);
  std::vector<double> tile(tile_size * tile_size);
  for (double& v : tile) v = 0.15 + 0.7 * uniform(rng);
  const double angle = 2.0 * std::numbers::pi * uniform(rng);
  const double cx = std::cos(angle), cy = std::sin(angle);
  const double norm = std::abs(cx) + std::abs(cy);
  const double span = image_size > 1 ? static_cast<double>(image_size - 1) : 1.0;

  Image out(image_size, image_size);
  for (std::size_t r = 0; r < image_size; ++r) {
    for (std::size_t c = 0; c < image_size; ++c) {
      const double y = static_cast<double>(r) / span - 0.5;
      const double x = static_cast<double>(c) / span - 0.5;
      const double ramp = kRampAmplitude * (cx * x + cy * y) / norm;
      const double v = tile[(r % tile_size) * tile_size + c % tile_size] + ramp;
      out.at(r, c) = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Dataset data;
  for (std::size_t i = 0; i < spec.n_train; ++i) {
    data.train.push_back(
        gen_synthetic_image(spec.image_size, spec.tile_size, mix_seed({spec.seed, 0, i})));
  }
  for (std::size_t i = 0; i < spec.n_val; ++i) {
    data.val.push_back(
        gen_synthetic_image(spec.image_size, spec.tile_size, mix_seed({spec.seed, 1, i})));
  }
  return data;
}

Image add_noise(const Image& clean, const NoiseSpec& noise) {
  noise.validate();
  Image out = clean;
  if (noise.sigma == 0.0) return out;
  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> gauss(0.0, noise.sigma);
  for (double& v : out.pixels) v += gauss(rng);
  return out;
}

Image transform(const Image& image, unsigned code) {
  if (code > 7) throw std::invalid_argument("transform code must be in [0,7]");
  Image cur = image;
  if (code & 1U) {
    for (std::size_t r = 0; r < cur.height; ++r) {
      std::reverse(cur.pixels.begin() + r * cur.width,
                   cur.pixels.begin() + (r + 1) * cur.width);
    }
  }
  for (unsigned turn = 0; turn < (code >> 1); ++turn) {
    // Quarter turn clockwise: out(c, H-1-r) = in(r, c).
    Image next(cur.width, cur.height);
    for (std::size_t r = 0; r < cur.height; ++r) {
      for (std::size_t c = 0; c < cur.width; ++c) {
        next.at(c, cur.height - 1 - r) = cur.at(r, c);
      }
    }
    cur = std::move(next);
  }
  return cur;
}

Image crop(const Image& image, std::size_t top, std::size_t left, std::size_t size) {
  if (top + size > image.height || left + size > image.width) {
    throw std::invalid_argument("crop window exceeds the image");
  }
  Image out(size, size);
  for (std::size_t r = 0; r < size; ++r) {
    std::copy_n(image.pixels.begin() + (top + r) * image.width + left, size,
                out.pixels.begin() + r * size);
  }
  return out;
}

}  // namespace n3net
