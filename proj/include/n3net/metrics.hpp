#pragma once

#include <string>

#include "n3net/image.hpp"

namespace n3net {

double mse(const Image& x, const Image& y);
/// 10 log10(1 / mse) for unit peak; +infinity when mse is 0.
double psnr_from_mse(double mse);
double psnr(const Image& x, const Image& y);
/// Fixed 6-decimal rendering; infinity prints as "inf".
std::string format_db(double db);

}  // namespace n3net
