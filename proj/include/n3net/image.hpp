#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "n3net/tensor.hpp"

namespace n3net {

/// Single-channel image, row-major, intensities nominally in [0,1].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), pixels(h * w, fill) {}

  double& at(std::size_t r, std::size_t c) { return pixels[r * width + c]; }
  double at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }
  std::size_t size() const { return pixels.size(); }

  /// [1,H,W] tensor holding a copy of the pixels.
  ad::Tensor to_tensor() const;
  static Image from_tensor(const ad::Tensor& t);

  bool operator==(const Image&) const = default;
};

/// Missing, unreadable or malformed file.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ImageIoError : public IoError {
 public:
  using IoError::IoError;
};

/// Binary PGM (P5). Writes maxval 65535 with big-endian 16-bit samples,
/// clamping to [0,1]; reads maxval 1..65535.
void write_pgm(const std::filesystem::path& path, const Image& image);
Image read_pgm(const std::filesystem::path& path);
std::string encode_pgm(const Image& image);
Image decode_pgm(const std::string& bytes);

/// Dataset cache: one PGM per image plus manifest.txt listing the files.
void write_dataset(const std::filesystem::path& dir, const std::vector<Image>& images);
std::vector<Image> read_dataset(const std::filesystem::path& dir);

}  // namespace n3net
