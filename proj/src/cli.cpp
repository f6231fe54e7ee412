#include "n3net/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "n3net/ablate.hpp"
#include "n3net/checkpoint.hpp"
#include "n3net/gradcheck.hpp"
#include "n3net/image.hpp"
#include "n3net/limit_checks.hpp"
#include "n3net/metrics.hpp"
#include "n3net/run_config.hpp"
#include "n3net/train.hpp"

namespace n3net {
namespace {

namespace fs = std::filesystem;

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::size_t k = 0;
  double sigma = 0.0;
  std::size_t epochs = 0;
  std::string out;
  double tolerance = 0.0;
  std::string input;
  std::string checkpoint;
  std::size_t workers = 1;

  CLI::Option* seed_opt = nullptr;
  CLI::Option* k_opt = nullptr;
  CLI::Option* sigma_opt = nullptr;
  CLI::Option* epochs_opt = nullptr;
  CLI::Option* out_opt = nullptr;
  CLI::Option* tolerance_opt = nullptr;
  CLI::Option* workers_opt = nullptr;
};

template <typename T>
CLI::Option* flag(CLI::App* app, const std::string& name, T& target,
                  const std::string& help) {
  return app->add_option(name, target, help)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
}

void add_run_flags(CLI::App* app, Flags& f) {
  flag(app, "--config", f.config, "run config file");
  f.seed_opt = flag(app, "--seed", f.seed, "random seed");
  f.k_opt = flag(app, "--k", f.k, "neighbours per N3 block");
  f.sigma_opt = flag(app, "--sigma", f.sigma, "noise std on the 0..255 scale");
  f.epochs_opt = flag(app, "--epochs", f.epochs, "training epochs");
  f.out_opt = flag(app, "--out", f.out, "output directory");
}

RunConfig resolve(const Flags& f, bool ablation_seeds) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : RunConfig::from_file(f.config);
  if (f.seed_opt && f.seed_opt->count()) {
    cfg.train.seed = f.seed;
    cfg.noise_seed = f.seed;
    if (ablation_seeds) cfg.seeds = {f.seed, f.seed + 1, f.seed + 2};
  }
  if (f.k_opt && f.k_opt->count()) {
    for (auto& b : cfg.net.blocks) b.k = f.k;
  }
  if (f.sigma_opt && f.sigma_opt->count()) cfg.sigma_8bit = f.sigma;
  if (f.epochs_opt && f.epochs_opt->count()) cfg.train.epochs = f.epochs;
  if (f.out_opt && f.out_opt->count()) cfg.out_dir = f.out;
  if (f.workers_opt && f.workers_opt->count()) cfg.workers = f.workers;
  cfg.validate();
  return cfg;
}

std::ofstream open_output(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw IoError("cannot write " + path.string());
  return file;
}

void write_text(const fs::path& path, const std::string& text) {
  auto file = open_output(path);
  file << text;
  if (!file) throw IoError("failed writing " + path.string());
}

Dataset load_data(const RunConfig& cfg) {
  if (cfg.data_dir.empty()) return gen_synthetic(cfg.data);
  return {read_dataset(fs::path(cfg.data_dir) / "train"),
          read_dataset(fs::path(cfg.data_dir) / "val")};
}

int cmd_gradcheck(const Flags& f, std::ostream& out) {
  const double tol = f.tolerance_opt->count() ? f.tolerance : 1e-4;
  const double network_tol = 10.0 * tol;
  const SelectionGradCheck sel = check_selection_gradients(100, f.seed);
  const GradCheckResult block = check_block_gradient(16, f.seed);
  const GradCheckResult net = check_network_gradient(18, f.seed);
  struct Line {
    const char* label;
    const GradCheckResult& result;
    double tolerance;
  };
  const Line lines[] = {{"selection, fused backward", sel.fused, tol},
                        {"selection, tape backward", sel.taped, tol},
                        {"n3 block 16x16", block, tol},
                        {"network 18x18", net, network_tol}};
  std::ostringstream report;
  const Line* offender = nullptr;
  double worst_ratio = 0.0;
  for (const auto& line : lines) {
    const bool ok = line.result.max_rel_error <= line.tolerance;
    report << (ok ? "PASS " : "FAIL ") << line.label
           << ": max_rel_err=" << format_double(line.result.max_rel_error)
           << " tolerance=" << format_double(line.tolerance) << " over "
           << line.result.checked << " entries (worst: " << line.result.worst << ")\n";
    const double ratio = line.result.max_rel_error / line.tolerance;
    if (!ok && (!offender || ratio > worst_ratio)) {
      offender = &line;
      worst_ratio = ratio;
    }
  }
  if (offender) {
    report << "FAIL worst offender: " << offender->label << ", " << offender->result.worst
           << " (rel err " << format_double(offender->result.max_rel_error) << ")\n";
  } else {
    report << "PASS\n";
  }
  out << report.str();
  if (f.out_opt->count()) write_text(fs::path(f.out) / "gradcheck.txt", report.str());
  return offender ? kExitCheckFailed : kExitOk;
}

int cmd_limit_check(const Flags& f, std::ostream& out) {
  const double tol = f.tolerance_opt->count() ? f.tolerance : 1e-6;
  const CheckOutcome checks[] = {
      check_simplex(1000, f.seed),
      check_attention_limit(1000, f.seed),
      check_hard_limit(1000, f.seed, 1e-3, 0.1, tol),
      check_sampler_marginals(20, 100000, f.seed),
  };
  std::ostringstream report;
  bool pass = true;
  for (const auto& c : checks) {
    pass = pass && c.pass;
    report << (c.pass ? "PASS " : "FAIL ") << c.name << ": worst=" << format_double(c.worst)
           << " tolerance=" << format_double(c.tolerance) << " (" << c.detail << ")\n";
  }
  out << report.str();
  if (f.out_opt->count()) write_text(fs::path(f.out) / "limit_check.txt", report.str());
  return pass ? kExitOk : kExitCheckFailed;
}

int cmd_gen_data(const Flags& f, std::ostream& out) {
  const RunConfig cfg = resolve(f, false);
  const Dataset data = gen_synthetic(cfg.data);
  write_dataset(fs::path(cfg.out_dir) / "train", data.train);
  write_dataset(fs::path(cfg.out_dir) / "val", data.val);
  out << "wrote " << data.train.size() << " training and " << data.val.size()
      << " validation images to " << cfg.out_dir << '\n';
  return kExitOk;
}

int cmd_train(const Flags& f, std::ostream& out) {
  const RunConfig cfg = resolve(f, false);
  const Dataset data = load_data(cfg);
  N3Net net(cfg.net, cfg.train.seed);
  const auto log = train(net, cfg.training(), data, &out);
  const fs::path dir = cfg.out_dir;
  {
    auto csv = open_output(dir / "metrics.csv");
    write_metric_csv(csv, "n3", cfg.train.seed, log);
  }
  write_checkpoint(dir / "checkpoint.bin", make_checkpoint(net));
  write_text(dir / "config.txt", cfg.to_text().str());
  out << "wrote " << (dir / "metrics.csv").string() << " and "
      << (dir / "checkpoint.bin").string() << '\n';
  return kExitOk;
}

int cmd_denoise(const Flags& f, std::ostream& out) {
  if (f.checkpoint.empty() || f.input.empty()) {
    throw std::invalid_argument("denoise needs --input and --checkpoint");
  }
  const RunConfig cfg = resolve(f, false);
  const Checkpoint ckpt = read_checkpoint(f.checkpoint);
  const N3NetConfig stored = N3NetConfig::read(ConfigText::parse(ckpt.header));
  const bool net_given = !f.config.empty() || f.k_opt->count();
  if (net_given && !(stored == cfg.net)) {
    throw std::invalid_argument("checkpoint network config does not match the requested one");
  }
  N3Net net(stored, 0);
  load_parameters(net, ckpt);

  const Image clean = read_pgm(f.input);
  const Image noisy = add_noise(clean, NoiseSpec{cfg.sigma(), cfg.noise_seed});
  const Image restored = denoise(net, noisy);
  const fs::path dir = cfg.out_dir;
  fs::create_directories(dir);
  write_pgm(dir / "noisy.pgm", noisy);
  write_pgm(dir / "denoised.pgm", restored);
  out << "noisy psnr_db=" << format_db(psnr(noisy, clean))
      << " denoised psnr_db=" << format_db(psnr(restored, clean)) << '\n'
      << "wrote " << (dir / "denoised.pgm").string() << '\n';
  return kExitOk;
}

int cmd_ablate(const Flags& f, std::ostream& out) {
  const RunConfig cfg = resolve(f, true);
  const auto rows = ablate(cfg.ablation(), &out);
  const fs::path dir = cfg.out_dir;
  {
    auto csv = open_output(dir / "ablation.csv");
    write_ablation_csv(csv, rows);
  }
  {
    auto csv = open_output(dir / "diagnostics.csv");
    write_diagnostics_csv(csv, rows);
  }
  {
    auto csv = open_output(dir / "metrics.csv");
    csv << kMetricCsvHeader << '\n';
    for (const auto& r : rows) write_metric_csv(csv, r.run.variant, r.run.seed, r.log, false);
  }
  out << "variant,k,seeds,mean_val_mse,mean_val_psnr_db\n";
  for (const auto& m : summarize(rows)) {
    out << m.variant << ',' << m.k << ',' << m.seeds << ',' << format_double(m.val_mse)
        << ',' << format_db(m.val_psnr_db) << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neural nearest neighbours: checks, training and denoising", "n3net"};
  app.require_subcommand(1);
  Flags f;

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  flag(gradcheck, "--seed", f.seed, "random seed");
  f.tolerance_opt = flag(gradcheck, "--tolerance", f.tolerance,
                         "max relative error (network check: 10x)");
  f.out_opt = flag(gradcheck, "--out", f.out, "directory for the report");

  auto* limit = app.add_subcommand("limit-check", "selection limit and sampler checks");
  flag(limit, "--seed", f.seed, "random seed");
  auto* limit_tol = flag(limit, "--tolerance", f.tolerance, "hard-limit tolerance");
  auto* limit_out = flag(limit, "--out", f.out, "directory for the report");

  auto* gen = app.add_subcommand("gen-data", "write the synthetic dataset cache");
  auto* train_cmd = app.add_subcommand("train", "train a network");
  auto* denoise_cmd = app.add_subcommand("denoise", "denoise a PGM image");
  auto* ablate_cmd = app.add_subcommand("ablate", "local / knn / n3 comparison");
  Flags gen_f, train_f, denoise_f, ablate_f;
  add_run_flags(gen, gen_f);
  add_run_flags(train_cmd, train_f);
  add_run_flags(denoise_cmd, denoise_f);
  flag(denoise_cmd, "--input", denoise_f.input, "noise-free input PGM");
  flag(denoise_cmd, "--checkpoint", denoise_f.checkpoint, "trained checkpoint");
  add_run_flags(ablate_cmd, ablate_f);
  ablate_f.workers_opt = flag(ablate_cmd, "--workers", ablate_f.workers, "worker threads");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }

  try {
    if (*gradcheck) return cmd_gradcheck(f, out);
    if (*limit) {
      f.tolerance_opt = limit_tol;
      f.out_opt = limit_out;
      return cmd_limit_check(f, out);
    }
    if (*gen) return cmd_gen_data(gen_f, out);
    if (*train_cmd) return cmd_train(train_f, out);
    if (*denoise_cmd) return cmd_denoise(denoise_f, out);
    if (*ablate_cmd) return cmd_ablate(ablate_f, out);
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIoError;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIoError;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const TrainDivergence& e) {
    err << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  }
  return kExitConfigError;
}

}  // namespace n3net
