#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "n3net/data.hpp"
#include "n3net/n3_block.hpp"
#include "n3net/optim.hpp"

namespace n3net {

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 4;
  double lr_start = 1e-3;
  double lr_end = 1e-5;
  AdamConfig adam;
  bool flips = true;
  bool rotations = true;
  /// Side of the random training crop; 0 trains on whole images.
  std::size_t crop_size = 0;
  double sigma = 25.0 / 255.0;
  std::uint64_t seed = 0;

  void validate() const;
  /// Learning rate of `epoch`, decaying exponentially from lr_start to lr_end.
  double learning_rate(std::size_t epoch) const;

  bool operator==(const TrainConfig&) const = default;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
  double val_psnr_db = 0.0;
};

/// Non-finite or exploding loss during training.
class TrainDivergence : public std::runtime_error {
 public:
  TrainDivergence(std::size_t epoch, std::size_t step, double loss);
  std::size_t epoch;
  std::size_t step;
};

/// Loss above which training is treated as diverged.
inline constexpr double kDivergenceLoss = 1e6;

struct Evaluation {
  double mse = 0.0;
  /// Mean of per-image PSNR.
  double psnr_db = 0.0;
};

/// Noisy copy of validation image `index`; the noise seed is fixed and
/// never used for training.
Image validation_input(const Image& clean, std::size_t index, double sigma);

/// Denoises every image of `clean` after adding validation noise.
Evaluation evaluate(const N3Net& net, const std::vector<Image>& clean, double sigma);

Image denoise(const N3Net& net, const Image& noisy);

/// Trains `net` in place with MSE against the clean images. One log entry
/// per epoch. Throws TrainDivergence.
std::vector<EpochLog> train(N3Net& net, const TrainConfig& cfg, const Dataset& data,
                            std::ostream* progress = nullptr);

inline constexpr const char* kMetricCsvHeader =
    "epoch,variant,seed,train_mse,val_psnr_db";
void write_metric_csv(std::ostream& out, const std::string& variant,
                      std::uint64_t seed, const std::vector<EpochLog>& log,
                      bool header = true);

}  // namespace n3net
