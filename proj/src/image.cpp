#include "n3net/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace n3net {

ad::Tensor Image::to_tensor() const { return ad::Tensor({1, height, width}, pixels); }

Image Image::from_tensor(const ad::Tensor& t) {
  if (t.rank() != 3 || t.dim(0) != 1) {
    throw std::invalid_argument("expected a [1,H,W] tensor, got " + ad::shape_str(t.shape()));
  }
  Image out(t.dim(1), t.dim(2));
  std::copy(t.data().begin(), t.data().end(), out.pixels.begin());
  return out;
}

std::string encode_pgm(const Image& image) {
  std::string out = "P5\n" + std::to_string(image.width) + " " +
                    std::to_string(image.height) + "\n65535\n";
  out.reserve(out.size() + 2 * image.size());
  for (double v : image.pixels) {
    const auto q = static_cast<unsigned>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
    out.push_back(static_cast<char>(q >> 8));
    out.push_back(static_cast<char>(q & 0xFF));
  }
  return out;
}

namespace {

// Next header token, skipping whitespace and '#' comments.
std::string token(const std::string& bytes, std::size_t& pos) {
  for (;;) {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (pos < bytes.size() && bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  const std::size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  if (start == pos) throw ImageIoError("PGM header truncated");
  return bytes.substr(start, pos - start);
}

std::size_t header_number(const std::string& bytes, std::size_t& pos) {
  const std::string t = token(bytes, pos);
  if (!std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; }) ||
      t.size() > 9) {
    throw ImageIoError("bad PGM header field '" + t + "'");
  }
  return std::stoul(t);
}

}  // namespace

Image decode_pgm(const std::string& bytes) {
  std::size_t pos = 0;
  if (token(bytes, pos) != "P5") throw ImageIoError("not a binary PGM (P5)");
  const std::size_t w = header_number(bytes, pos);
  const std::size_t h = header_number(bytes, pos);
  const std::size_t maxval = header_number(bytes, pos);
  if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) {
    throw ImageIoError("bad PGM geometry or maxval");
  }
  ++pos;  // single whitespace before the raster
  const std::size_t bps = maxval > 255 ? 2 : 1;
  if (bytes.size() < pos + w * h * bps) throw ImageIoError("PGM raster truncated");
  Image out(h, w);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (std::size_t i = 0; i < w * h; ++i) {
    const unsigned v = bps == 2 ? (unsigned{p[2 * i]} << 8) | p[2 * i + 1] : p[i];
    out.pixels[i] = static_cast<double>(v) / static_cast<double>(maxval);
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ImageIoError("cannot write " + path.string());
  const std::string bytes = encode_pgm(image);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageIoError("failed writing " + path.string());
}

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return decode_pgm(ss.str());
  } catch (const ImageIoError& e) {
    throw ImageIoError(path.string() + ": " + e.what());
  }
}

void write_dataset(const std::filesystem::path& dir, const std::vector<Image>& images) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt", std::ios::trunc);
  if (!manifest) throw ImageIoError("cannot write " + (dir / "manifest.txt").string());
  for (std::size_t i = 0; i < images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img%05zu.pgm", i);
    write_pgm(dir / name, images[i]);
    manifest << name << '\n';
  }
}

std::vector<Image> read_dataset(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) throw ImageIoError("cannot read " + (dir / "manifest.txt").string());
  std::vector<Image> out;
  std::string line;
  while (std::getline(manifest, line)) {
    if (!line.empty()) out.push_back(read_pgm(dir / line));
  }
  return out;
}

}  // namespace n3net
