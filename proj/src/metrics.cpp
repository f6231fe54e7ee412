#include "n3net/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace n3net {

double mse(const Image& x, const Image& y) {
  if (x.height != y.height || x.width != y.width) {
    throw std::invalid_argument("mse: image sizes differ");
  }
  if (x.size() == 0) throw std::invalid_argument("mse: empty images");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x.pixels[i] - y.pixels[i];
    acc += d * d;
  }
  return acc / static_cast<double>(x.size());
}

double psnr_from_mse(double m) {
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(m);
}

double psnr(const Image& x, const Image& y) { return psnr_from_mse(mse(x, y)); }

std::string format_db(double db) {
  if (std::isinf(db)) return db > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", db);
  return buf;
}

}  // namespace n3net
