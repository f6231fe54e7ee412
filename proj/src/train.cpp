#include "n3net/train.hpp"

#include <cmath>
#include <ostream>

#include "n3net/config_text.hpp"
#include "n3net/metrics.hpp"
#include "n3net/ops.hpp"

namespace n3net {
namespace {

constexpr std::uint64_t kTrainNoiseStream = 0x747261696E;
constexpr std::uint64_t kValNoiseStream = 0x76616C6964;

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (!(lr_end > 0.0) || !(lr_end <= lr_start)) {
    throw std::invalid_argument("train config: need 0 < lr_end <= lr_start");
  }
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw std::invalid_argument("train config: Adam betas must be in [0,1)");
  }
  if (!(adam.eps > 0.0)) throw std::invalid_argument("train config: Adam eps must be > 0");
  if (!(sigma >= 0.0)) throw std::invalid_argument("train config: sigma must be >= 0");
}

double TrainConfig::learning_rate(std::size_t epoch) const {
  if (epochs <= 1) return lr_start;
  const double frac = static_cast<double>(epoch) / static_cast<double>(epochs - 1);
  return lr_start * std::pow(lr_end / lr_start, frac);
}

TrainDivergence::TrainDivergence(std::size_t e, std::size_t s, double loss)
    : std::runtime_error("training diverged at epoch " + std::to_string(e) + ", step " +
                         std::to_string(s) + " (loss " + format_double(loss) + ")"),
      epoch(e),
      step(s) {}

Image validation_input(const Image& clean, std::size_t index, double sigma) {
  return add_noise(clean, NoiseSpec{sigma, mix_seed({kValNoiseStream, index})});
}

Image denoise(const N3Net& net, const Image& noisy) {
  ad::Tape tape(ad::Tape::Mode::kInference);
  return Image::from_tensor(net.forward(tape, noisy.to_tensor()));
}

Evaluation evaluate(const N3Net& net, const std::vector<Image>& clean, double sigma) {
  Evaluation ev;
  if (clean.empty()) return ev;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const double m = mse(denoise(net, validation_input(clean[i], i, sigma)), clean[i]);
    ev.mse += m;
    ev.psnr_db += psnr_from_mse(m);
  }
  ev.mse /= static_cast<double>(clean.size());
  ev.psnr_db /= static_cast<double>(clean.size());
  return ev;
}

std::vector<EpochLog> train(N3Net& net, const TrainConfig& cfg, const Dataset& data,
                            std::ostream* progress) {
  cfg.validate();
  std::vector<EpochLog> log;
  if (cfg.epochs == 0) return log;
  if (data.train.empty()) throw std::invalid_argument("train: no training images");

  auto params = net.parameters();
  std::vector<std::span<double>> values;
  std::vector<std::span<const double>> grads;
  for (auto& p : params) {
    values.push_back(p.tensor.data());
    grads.push_back(p.tensor.grad());
  }
  AdamState adam;
  Rng rng(mix_seed({cfg.seed, kTrainNoiseStream}));
  std::vector<std::size_t> order(data.train.size());
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng() % i]);
    }
    const double lr = cfg.learning_rate(epoch);
    double loss_sum = 0.0;
    std::size_t in_batch = 0;
    net.zero_grad();

    auto apply = [&] {
      const double inv = 1.0 / static_cast<double>(in_batch);
      for (auto& p : params) {
        for (double& g : p.tensor.grad()) g *= inv;
      }
      adam_step(values, grads, adam, lr, cfg.adam);
      net.zero_grad();
      in_batch = 0;
      ++step;
    };

    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      Image clean = data.train[order[pos]];
      if (cfg.crop_size > 0 && cfg.crop_size < std::min(clean.height, clean.width)) {
        const std::size_t top = rng() % (clean.height - cfg.crop_size + 1);
        const std::size_t left = rng() % (clean.width - cfg.crop_size + 1);
        clean = crop(clean, top, left, cfg.crop_size);
      }
      unsigned code = 0;
      if (cfg.flips) code |= static_cast<unsigned>(rng() & 1U);
      if (cfg.rotations) code |= static_cast<unsigned>((rng() & 3U) << 1);
      clean = transform(clean, code);
      const Image noisy =
          add_noise(clean, NoiseSpec{cfg.sigma, mix_seed({cfg.seed, kTrainNoiseStream,
                                                          epoch, pos})});

      ad::Tape tape;
      const ad::Tensor out = net.forward(tape, noisy.to_tensor());
      const ad::Tensor loss = ad::mse_loss(tape, out, clean.to_tensor());
      const double value = loss.item();
      if (!std::isfinite(value) || value > kDivergenceLoss) {
        throw TrainDivergence(epoch, step, value);
      }
      tape.backward(loss);
      loss_sum += value;
      if (++in_batch == cfg.batch_size) apply();
    }
    if (in_batch > 0) apply();

    const Evaluation ev = evaluate(net, data.val, cfg.sigma);
    log.push_back({epoch, loss_sum / static_cast<double>(order.size()), ev.mse, ev.psnr_db});
    if (progress) {
      *progress << "epoch " << epoch << " train_mse " << format_double(log.back().train_mse)
                << " val_psnr_db " << format_db(ev.psnr_db) << '\n';
    }
  }
  return log;
}

void write_metric_csv(std::ostream& out, const std::string& variant, std::uint64_t seed,
                      const std::vector<EpochLog>& log, bool header) {
  if (header) out << kMetricCsvHeader << '\n';
  for (const auto& e : log) {
    out << e.epoch << ',' << variant << ',' << seed << ',' << format_double(e.train_mse)
        << ',' << format_double(e.val_psnr_db) << '\n';
  }
}

}  // namespace n3net
