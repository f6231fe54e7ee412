#include "n3net/ablate.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include "n3net/config_text.hpp"
#include "n3net/metrics.hpp"

namespace n3net {

void AblationConfig::validate() const {
  base.validate();
  if (base.blocks.empty()) {
    throw std::invalid_argument("ablation: base network needs at least one block");
  }
  for (const auto& v : variants) {
    if (v != "local" && v != "knn" && v != "n3") {
      throw std::invalid_argument("ablation: unknown variant '" + v + "'");
    }
  }
  if (variants.empty()) throw std::invalid_argument("ablation: no variants");
  if (seeds.empty()) throw std::invalid_argument("ablation: no seeds");
  for (auto k : k_sweep) {
    if (k == 0) throw std::invalid_argument("ablation: k_sweep entries must be >= 1");
  }
  if (workers == 0) throw std::invalid_argument("ablation: workers must be >= 1");
  train.validate();
  data.validate();
}

N3NetConfig local_baseline(const N3NetConfig& base) {
  std::size_t depth = 0;
  for (auto d : base.local_depths) depth += d;
  const std::size_t target = N3Net(base, 0).parameter_count();
  N3NetConfig best;
  std::size_t best_gap = static_cast<std::size_t>(-1);
  for (std::size_t width = 1; width <= 4 * base.feature_width + 64; ++width) {
    N3NetConfig cfg;
    cfg.local_depths = {depth};
    cfg.feature_width = width;
    cfg.interface_width = base.interface_width;
    const std::size_t count = N3Net(cfg, 0).parameter_count();
    const std::size_t gap = count > target ? count - target : target - count;
    if (gap < best_gap) {
      best_gap = gap;
      best = cfg;
    }
  }
  return best;
}

N3NetConfig variant_config(const std::string& variant, const N3NetConfig& base,
                           std::size_t k) {
  if (variant == "local") return local_baseline(base);
  N3NetConfig cfg = base;
  for (auto& b : cfg.blocks) {
    b.k = k;
    if (variant == "knn") {
      b.selection = Selection::kHard;
      b.match = MatchSource::kInputImage;
      b.fixed_temperature.reset();
    } else if (variant == "n3") {
      b.selection = Selection::kRelaxed;
      b.match = MatchSource::kEmbedding;
    } else {
      throw std::invalid_argument("unknown ablation variant '" + variant + "'");
    }
  }
  cfg.validate();
  return cfg;
}

std::vector<AblationRun> plan_ablation(const AblationConfig& cfg) {
  const std::size_t base_k = cfg.base.blocks.front().k;
  std::vector<AblationRun> runs;
  auto add = [&](const std::string& v, std::size_t k) {
    for (auto seed : cfg.seeds) {
      AblationRun r{v, k, seed};
      const bool seen = std::any_of(runs.begin(), runs.end(), [&](const AblationRun& o) {
        return o.variant == r.variant && o.k == r.k && o.seed == r.seed;
      });
      if (!seen) runs.push_back(r);
    }
  };
  for (const auto& v : cfg.variants) {
    if (v == "local") {
      add(v, 0);
    } else if (v == "knn") {
      add(v, base_k);
    } else {
      add(v, base_k);
      for (auto k : cfg.k_sweep) add(v, k);
    }
  }
  return runs;
}

AblationRow run_ablation_case(const AblationConfig& cfg, const Dataset& data,
                              const AblationRun& run) {
  const N3NetConfig net_cfg = variant_config(run.variant, cfg.base, run.k);
  N3Net net(net_cfg, mix_seed({run.seed, 0x6E6574}));
  TrainConfig tc = cfg.train;
  tc.seed = run.seed;

  AblationRow row;
  row.run = run;
  row.parameters = net.parameter_count();
  row.log = train(net, tc, data);
  const Evaluation ev = evaluate(net, data.val, tc.sigma);
  row.val_mse = ev.mse;
  row.val_psnr_db = ev.psnr_db;

  if (!net_cfg.blocks.empty() && !data.val.empty()) {
    row.max_weight.assign(net_cfg.blocks.size(),
                          std::vector<double>(net_cfg.blocks.front().k, 0.0));
    for (std::size_t i = 0; i < data.val.size(); ++i) {
      ad::Tape tape(ad::Tape::Mode::kInference);
      std::vector<BlockDiagnostics> diag;
      net.forward(tape, validation_input(data.val[i], i, tc.sigma).to_tensor(), &diag);
      for (std::size_t b = 0; b < diag.size(); ++b) {
        for (std::size_t j = 0; j < diag[b].max_weight.size(); ++j) {
          row.max_weight[b][j] += diag[b].max_weight[j] / static_cast<double>(data.val.size());
        }
      }
    }
  }
  return row;
}

std::vector<AblationRow> ablate(const AblationConfig& cfg, std::ostream* progress) {
  cfg.validate();
  const Dataset data = gen_synthetic(cfg.data);
  const auto runs = plan_ablation(cfg);
  std::vector<AblationRow> rows(runs.size());
  std::vector<std::exception_ptr> errors(runs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;

  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      try {
        rows[i] = run_ablation_case(cfg, data, runs[i]);
        if (progress) {
          std::lock_guard lock(log_mutex);
          *progress << runs[i].variant << " k=" << runs[i].k << " seed=" << runs[i].seed
                    << " val_mse=" << format_double(rows[i].val_mse)
                    << " val_psnr_db=" << format_db(rows[i].val_psnr_db) << std::endl;
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min(cfg.workers, runs.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

std::vector<VariantMean> summarize(const std::vector<AblationRow>& rows) {
  std::vector<VariantMean> out;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const VariantMean& m) {
      return m.variant == r.run.variant && m.k == r.run.k;
    });
    if (it == out.end()) {
      out.push_back({r.run.variant, r.run.k, 0.0, 0.0, 0});
      it = out.end() - 1;
    }
    it->val_mse += r.val_mse;
    it->val_psnr_db += r.val_psnr_db;
    ++it->seeds;
  }
  for (auto& m : out) {
    m.val_mse /= static_cast<double>(m.seeds);
    m.val_psnr_db /= static_cast<double>(m.seeds);
  }
  return out;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << kAblationCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.run.variant << ',' << r.run.k << ',' << r.run.seed << ','
        << format_double(r.val_mse) << ',' << format_double(r.val_psnr_db) << '\n';
  }
}

void write_diagnostics_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << kDiagnosticsCsvHeader << '\n';
  for (const auto& r : rows) {
    for (std::size_t b = 0; b < r.max_weight.size(); ++b) {
      for (std::size_t j = 0; j < r.max_weight[b].size(); ++j) {
        out << r.run.variant << ',' << r.run.k << ',' << r.run.seed << ',' << b << ','
            << j << ',' << format_double(r.max_weight[b][j]) << '\n';
      }
    }
  }
}

}  // namespace n3net
