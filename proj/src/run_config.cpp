#include "n3net/run_config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "n3net/image.hpp"

namespace n3net {
namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::string format_seeds(const std::vector<std::uint64_t>& seeds) {
  return format_size_list(std::vector<std::size_t>(seeds.begin(), seeds.end()));
}

}  // namespace

ConfigText RunConfig::to_text() const {
  ConfigText t;
  net.write(t);
  t.set("train", "epochs", std::to_string(train.epochs));
  t.set("train", "batch_size", std::to_string(train.batch_size));
  t.set("train", "lr_start", format_double(train.lr_start));
  t.set("train", "lr_end", format_double(train.lr_end));
  t.set("train", "beta1", format_double(train.adam.beta1));
  t.set("train", "beta2", format_double(train.adam.beta2));
  t.set("train", "eps", format_double(train.adam.eps));
  t.set("train", "flips", train.flips ? "true" : "false");
  t.set("train", "rotations", train.rotations ? "true" : "false");
  t.set("train", "crop_size", std::to_string(train.crop_size));
  t.set("train", "seed", std::to_string(train.seed));
  t.set("noise", "sigma", format_double(sigma_8bit));
  t.set("noise", "seed", std::to_string(noise_seed));
  t.set("data", "image_size", std::to_string(data.image_size));
  t.set("data", "tile_size", std::to_string(data.tile_size));
  t.set("data", "n_train", std::to_string(data.n_train));
  t.set("data", "n_val", std::to_string(data.n_val));
  t.set("data", "seed", std::to_string(data.seed));
  t.set("data", "dir", data_dir);
  t.set("ablate", "variants", join(variants));
  t.set("ablate", "k_sweep", format_size_list(k_sweep));
  t.set("ablate", "seeds", format_seeds(seeds));
  t.set("ablate", "workers", std::to_string(workers));
  t.set("output", "dir", out_dir);
  return t;
}

RunConfig RunConfig::from_text(const ConfigText& text) {
  ConfigText merged = RunConfig{}.to_text();
  for (const auto& section : text.section_names()) {
    for (const auto& [key, value] : *text.section(section)) {
      if (!merged.has(section, key)) {
        throw std::invalid_argument("unknown config key [" + section + "] " + key);
      }
      merged.set(section, key, value);
    }
  }
  const auto& m = merged;
  RunConfig c;
  c.net = N3NetConfig::read(m);
  c.train.epochs = parse_size(m.get("train", "epochs"), "train.epochs");
  c.train.batch_size = parse_size(m.get("train", "batch_size"), "train.batch_size");
  c.train.lr_start = parse_double(m.get("train", "lr_start"), "train.lr_start");
  c.train.lr_end = parse_double(m.get("train", "lr_end"), "train.lr_end");
  c.train.adam.beta1 = parse_double(m.get("train", "beta1"), "train.beta1");
  c.train.adam.beta2 = parse_double(m.get("train", "beta2"), "train.beta2");
  c.train.adam.eps = parse_double(m.get("train", "eps"), "train.eps");
  c.train.flips = parse_bool(m.get("train", "flips"), "train.flips");
  c.train.rotations = parse_bool(m.get("train", "rotations"), "train.rotations");
  c.train.crop_size = parse_size(m.get("train", "crop_size"), "train.crop_size");
  c.train.seed = parse_size(m.get("train", "seed"), "train.seed");
  c.sigma_8bit = parse_double(m.get("noise", "sigma"), "noise.sigma");
  c.noise_seed = parse_size(m.get("noise", "seed"), "noise.seed");
  c.data.image_size = parse_size(m.get("data", "image_size"), "data.image_size");
  c.data.tile_size = parse_size(m.get("data", "tile_size"), "data.tile_size");
  c.data.n_train = parse_size(m.get("data", "n_train"), "data.n_train");
  c.data.n_val = parse_size(m.get("data", "n_val"), "data.n_val");
  c.data.seed = parse_size(m.get("data", "seed"), "data.seed");
  c.data_dir = m.get("data", "dir");
  c.variants = split(m.get("ablate", "variants"));
  c.k_sweep = parse_size_list(m.get("ablate", "k_sweep"), "ablate.k_sweep");
  const auto seeds = parse_size_list(m.get("ablate", "seeds"), "ablate.seeds");
  c.seeds.assign(seeds.begin(), seeds.end());
  c.workers = parse_size(m.get("ablate", "workers"), "ablate.workers");
  c.out_dir = m.get("output", "dir");
  c.validate();
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ConfigText::parse(ss.str()));
}

TrainConfig RunConfig::training() const {
  TrainConfig t = train;
  t.sigma = sigma();
  return t;
}

AblationConfig RunConfig::ablation() const {
  AblationConfig a;
  a.base = net;
  a.variants = variants;
  a.k_sweep = k_sweep;
  a.seeds = seeds;
  a.train = training();
  a.data = data;
  a.workers = workers;
  return a;
}

void RunConfig::validate() const {
  net.validate();
  training().validate();
  data.validate();
  NoiseSpec{sigma(), noise_seed}.validate();
  if (out_dir.empty()) throw std::invalid_argument("output.dir must not be empty");
}

}  // namespace n3net
