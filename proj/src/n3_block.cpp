#include "n3net/n3_block.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "n3net/nn_select.hpp"
#include "n3net/ops.hpp"

namespace n3net {

// ---------------------------------------------------------------- configs

void N3BlockConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("N3 block config: " + what);
  };
  if (k < 1) fail("k must be >= 1");
  if (patch < 1) fail("patch must be >= 1");
  if (stride < 1 || stride > patch) fail("stride must be in [1, patch]");
  if (region < patch) fail("region must be >= patch");
  if (has_embedding() && embed_layers.empty()) fail("embed_layers is empty");
  for (auto w : embed_layers) if (w == 0) fail("embed_layers has a zero width");
  if (has_temperature_net()) {
    if (temp_layers.empty()) fail("temp_layers is empty");
    if (temp_layers.back() != 1) fail("temp_layers must end in width 1");
    for (auto w : temp_layers) if (w == 0) fail("temp_layers has a zero width");
  }
  if (fixed_temperature && !(*fixed_temperature > 0.0)) {
    fail("fixed temperature must be positive");
  }
}

N3NetConfig N3NetConfig::full_scale() {
  N3NetConfig cfg;
  N3BlockConfig block;  // k=7, 10x10 patches, stride 5, region 80
  cfg.blocks = {block, block};
  cfg.local_depths = {6, 6, 6};
  cfg.feature_width = 64;
  cfg.interface_width = 8;
  return cfg;
}

N3NetConfig N3NetConfig::desk_default(std::size_t k) {
  N3NetConfig cfg;
  N3BlockConfig block;
  block.k = k;
  block.patch = 8;
  block.stride = 4;
  block.region = 24;
  block.embed_layers = {16, 16, 4};
  block.temp_layers = {16, 16, 1};
  cfg.blocks = {block, block};
  cfg.local_depths = {3, 3, 3};
  cfg.feature_width = 16;
  cfg.interface_width = 4;
  return cfg;
}

void N3NetConfig::validate() const {
  if (local_depths.size() != blocks.size() + 1) {
    throw std::invalid_argument(
        "N3Net config: need one more local stack than N3 blocks, got " +
        std::to_string(local_depths.size()) + " stacks and " +
        std::to_string(blocks.size()) + " blocks");
  }
  for (auto d : local_depths) {
    if (d < 1) throw std::invalid_argument("N3Net config: local depth must be >= 1");
  }
  if (feature_width < 1 || interface_width < 1) {
    throw std::invalid_argument("N3Net config: widths must be >= 1");
  }
  for (const auto& b : blocks) b.validate();
}

std::size_t N3NetConfig::stack_in_channels(std::size_t i) const {
  return i == 0 ? 1 : interface_width * (blocks[i - 1].k + 1);
}

std::size_t N3NetConfig::stack_out_channels(std::size_t i) const {
  return i + 1 == local_depths.size() ? 1 : interface_width;
}

namespace {

const char* to_string(DistanceKind k) {
  return k == DistanceKind::kEuclidean ? "euclidean" : "squared_euclidean";
}
const char* to_string(Selection s) {
  return s == Selection::kHard ? "hard" : "relaxed";
}
const char* to_string(MatchSource m) {
  return m == MatchSource::kInputImage ? "input" : "embedding";
}

template <typename Enum>
Enum parse_enum(const std::string& text, std::initializer_list<Enum> options,
                const std::string& what) {
  for (Enum e : options) {
    if (text == to_string(e)) return e;
  }
  throw std::invalid_argument(what + ": unknown value '" + text + "'");
}

}  // namespace

void N3NetConfig::write(ConfigText& text) const {
  const std::string s = "net";
  text.set(s, "blocks", std::to_string(blocks.size()));
  text.set(s, "local_depths", format_size_list(local_depths));
  text.set(s, "feature_width", std::to_string(feature_width));
  text.set(s, "interface_width", std::to_string(interface_width));
  if (blocks.empty()) return;
  const N3BlockConfig& b = blocks.front();
  for (const auto& other : blocks) {
    if (!(other == b)) {
      throw std::invalid_argument("N3Net config: text form needs identical blocks");
    }
  }
  text.set(s, "k", std::to_string(b.k));
  text.set(s, "patch", std::to_string(b.patch));
  text.set(s, "stride", std::to_string(b.stride));
  text.set(s, "region", std::to_string(b.region));
  text.set(s, "embed_layers", format_size_list(b.embed_layers));
  text.set(s, "temp_layers", format_size_list(b.temp_layers));
  text.set(s, "distance", to_string(b.distance));
  text.set(s, "selection", to_string(b.selection));
  text.set(s, "match", to_string(b.match));
  text.set(s, "temperature",
           b.fixed_temperature ? format_double(*b.fixed_temperature) : "learned");
}

N3NetConfig N3NetConfig::read(const ConfigText& text) {
  const std::string s = "net";
  N3NetConfig cfg;
  const std::size_t n_blocks = parse_size(text.get(s, "blocks"), "net.blocks");
  cfg.local_depths = parse_size_list(text.get(s, "local_depths"), "net.local_depths");
  cfg.feature_width = parse_size(text.get(s, "feature_width"), "net.feature_width");
  cfg.interface_width = parse_size(text.get(s, "interface_width"), "net.interface_width");
  if (n_blocks > 0) {
    N3BlockConfig b;
    b.k = parse_size(text.get(s, "k"), "net.k");
    b.patch = parse_size(text.get(s, "patch"), "net.patch");
    b.stride = parse_size(text.get(s, "stride"), "net.stride");
    b.region = parse_size(text.get(s, "region"), "net.region");
    b.embed_layers = parse_size_list(text.get(s, "embed_layers"), "net.embed_layers");
    b.temp_layers = parse_size_list(text.get(s, "temp_layers"), "net.temp_layers");
    b.distance = parse_enum(text.get(s, "distance"),
                            {DistanceKind::kSquaredEuclidean, DistanceKind::kEuclidean},
                            "net.distance");
    b.selection = parse_enum(text.get(s, "selection"),
                             {Selection::kRelaxed, Selection::kHard}, "net.selection");
    b.match = parse_enum(text.get(s, "match"),
                         {MatchSource::kEmbedding, MatchSource::kInputImage},
                         "net.match");
    const std::string& t = text.get(s, "temperature");
    if (t != "learned") b.fixed_temperature = parse_double(t, "net.temperature");
    cfg.blocks.assign(n_blocks, b);
  }
  cfg.validate();
  return cfg;
}

// ------------------------------------------------------------- parameters

double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

ConvStack init_conv_stack(std::size_t in_channels,
                          const std::vector<std::size_t>& widths, Rng& rng) {
  ConvStack stack;
  std::size_t cin = in_channels;
  for (std::size_t cout : widths) {
    const double bound = std::sqrt(6.0 / static_cast<double>(cin * 9));
    ConvLayer layer{ad::Tensor({cout, cin, 3, 3}, true), ad::Tensor({cout}, true)};
    for (double& v : layer.kernels.data()) v = (2.0 * uniform01(rng) - 1.0) * bound;
    stack.layers.push_back(std::move(layer));
    cin = cout;
  }
  return stack;
}

N3BlockParams init_block_params(const N3BlockConfig& cfg,
                                std::size_t in_channels, Rng& rng) {
  N3BlockParams params;
  if (cfg.has_embedding()) {
    params.embed = init_conv_stack(in_channels, cfg.embed_layers, rng);
  }
  if (cfg.has_temperature_net()) {
    params.temperature = init_conv_stack(in_channels, cfg.temp_layers, rng);
    // Initial temperature of about 1.
    params.temperature.layers.back().bias.data()[0] =
        std::log(std::expm1(1.0 - kMinTemperature));
  }
  return params;
}

ad::Tensor ConvStack::forward(ad::Tape& tape, const ad::Tensor& x) const {
  ad::Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = ad::conv2d_3x3(tape, h, layers[i].kernels, layers[i].bias);
    if (i + 1 < layers.size()) h = ad::relu(tape, h);
  }
  return h;
}

ad::Tensor embed(ad::Tape& tape, const ad::Tensor& input,
                 const N3BlockParams& params, const N3BlockConfig& cfg) {
  if (!cfg.has_embedding() || params.embed.layers.empty()) {
    throw std::invalid_argument("embed: block has no embedding network");
  }
  return params.embed.forward(tape, input);
}

ad::Tensor temperature_map(ad::Tape& tape, const ad::Tensor& input,
                           const N3BlockParams& params, const N3BlockConfig& cfg) {
  if (!cfg.has_temperature_net() || params.temperature.layers.empty()) {
    throw std::invalid_argument("temperature_map: block has no temperature network");
  }
  ad::Tensor raw = params.temperature.forward(tape, input);
  return ad::add_scalar(tape, ad::softplus(tape, raw), kMinTemperature);
}

// ------------------------------------------------------ patch-domain ops

ad::Tensor window_distances(ad::Tape& tape, const ad::Tensor& patches,
                            const CandidateTable& table, DistanceKind kind) {
  if (patches.rank() != 2 || patches.dim(0) != table.queries) {
    throw std::invalid_argument("window_distances: patches " +
                                ad::shape_str(patches.shape()) + " but table has " +
                                std::to_string(table.queries) + " queries");
  }
  const std::size_t n = table.queries, width = table.width, dim = patches.dim(1);
  ad::Tensor out({n, width});
  auto pv = patches.data();
  auto o = out.data();
  for (std::size_t q = 0; q < n; ++q) {
    const double* pq = pv.data() + q * dim;
    for (std::size_t m = 0; m < table.count[q]; ++m) {
      const double* pc = pv.data() + table.index[q * width + m] * dim;
      double acc = 0.0;
      for (std::size_t f = 0; f < dim; ++f) {
        const double diff = pq[f] - pc[f];
        acc += diff * diff;
      }
      o[q * width + m] = kind == DistanceKind::kEuclidean ? std::sqrt(acc) : acc;
    }
  }
  if (tape.wants({&patches})) {
    tape.record(out, [patches, out, table, kind, dim]() mutable {
      auto g = out.grad();
      auto gp = patches.grad();
      auto pv = patches.data();
      auto dv = out.data();
      const std::size_t width = table.width;
      for (std::size_t q = 0; q < table.queries; ++q) {
        const double* pq = pv.data() + q * dim;
        for (std::size_t m = 0; m < table.count[q]; ++m) {
          const std::size_t slot = q * width + m;
          double coeff = 2.0 * g[slot];
          if (kind == DistanceKind::kEuclidean) {
            coeff = dv[slot] > 0.0 ? g[slot] / dv[slot] : 0.0;
          }
          if (coeff == 0.0) continue;
          const std::size_t c = table.index[slot];
          const double* pc = pv.data() + c * dim;
          double* gq = gp.data() + q * dim;
          double* gc = gp.data() + c * dim;
          for (std::size_t f = 0; f < dim; ++f) {
            const double v = coeff * (pq[f] - pc[f]);
            gq[f] += v;
            gc[f] -= v;
          }
        }
      }
    });
  }
  return out;
}

namespace {

void check_weight_inputs(const ad::Tensor& distances, const CandidateTable& table,
                         std::size_t k) {
  if (distances.rank() != 2 || distances.dim(0) != table.queries ||
      distances.dim(1) != table.width) {
    throw std::invalid_argument("neighbor weights: distances " +
                                ad::shape_str(distances.shape()) +
                                " do not match the candidate table");
  }
  for (std::size_t q = 0; q < table.queries; ++q) {
    if (table.count[q] < k) {
      throw std::invalid_argument("neighbor weights: query " + std::to_string(q) +
                                  " has " + std::to_string(table.count[q]) +
                                  " candidates, fewer than k=" + std::to_string(k));
    }
  }
}

}  // namespace

ad::Tensor neighbor_weights(ad::Tape& tape, const ad::Tensor& distances,
                            const ad::Tensor& temperatures,
                            const CandidateTable& table, std::size_t k) {
  check_weight_inputs(distances, table, k);
  if (temperatures.size() != table.queries) {
    throw std::invalid_argument("neighbor weights: " +
                                std::to_string(temperatures.size()) +
                                " temperatures for " + std::to_string(table.queries) +
                                " queries");
  }
  const std::size_t n = table.queries, width = table.width;
  ad::Tensor out({k, n, width});
  auto dv = distances.data();
  auto tv = temperatures.data();
  auto o = out.data();
  for (std::size_t q = 0; q < n; ++q) {
    kernels::relax_forward(dv.subspan(q * width, table.count[q]), tv[q], k,
                           o.subspan(q * width), n * width);
  }
  if (tape.wants({&distances, &temperatures})) {
    tape.record(out, [distances, temperatures, out, table, k]() mutable {
      const std::size_t n = table.queries, width = table.width;
      auto g = out.grad();
      auto dv = distances.data();
      auto tv = temperatures.data();
      std::vector<double> gd(width);
      for (std::size_t q = 0; q < n; ++q) {
        const std::size_t count = table.count[q];
        std::fill(gd.begin(), gd.end(), 0.0);
        double gt = 0.0;
        kernels::relax_backward(dv.subspan(q * width, count), tv[q], k,
                                std::span<const double>(g).subspan(q * width),
                                n * width, std::span<double>(gd).first(count), gt);
        if (distances.requires_grad()) {
          auto gdist = distances.grad();
          for (std::size_t m = 0; m < count; ++m) gdist[q * width + m] += gd[m];
        }
        if (temperatures.requires_grad()) temperatures.grad()[q] += gt;
      }
    });
  }
  return out;
}

ad::Tensor hard_neighbor_weights(const ad::Tensor& distances,
                                 const CandidateTable& table, std::size_t k) {
  check_weight_inputs(distances, table, k);
  const std::size_t n = table.queries, width = table.width;
  ad::Tensor out({k, n, width});
  auto dv = distances.data();
  for (std::size_t q = 0; q < n; ++q) {
    DistanceRow row{std::vector<double>(dv.begin() + q * width,
                                        dv.begin() + q * width + table.count[q]),
                    std::nullopt};
    const auto picks = knn_select(row, k);
    for (std::size_t j = 0; j < k; ++j) {
      out.data()[(j * n + q) * width + picks[j]] = 1.0;
    }
  }
  return out;
}

ad::Tensor aggregate_neighbors(ad::Tape& tape, const ad::Tensor& weights,
                               const ad::Tensor& items,
                               const CandidateTable& table) {
  if (weights.rank() != 3 || weights.dim(1) != table.queries ||
      weights.dim(2) != table.width || items.rank() != 2) {
    throw std::invalid_argument("aggregate_neighbors: weights " +
                                ad::shape_str(weights.shape()) + " / items " +
                                ad::shape_str(items.shape()) +
                                " do not match the candidate table");
  }
  const std::size_t k = weights.dim(0), n = table.queries, width = table.width;
  const std::size_t f = items.dim(1);
  ad::Tensor out({k, n, f});
  auto wv = weights.data();
  auto iv = items.data();
  auto o = out.data();
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t q = 0; q < n; ++q) {
      double* dst = o.data() + (j * n + q) * f;
      const double* wrow = wv.data() + (j * n + q) * width;
      for (std::size_t m = 0; m < table.count[q]; ++m) {
        const double w = wrow[m];
        if (w == 0.0) continue;
        const double* src = iv.data() + table.index[q * width + m] * f;
        for (std::size_t c = 0; c < f; ++c) dst[c] += w * src[c];
      }
    }
  }
  if (tape.wants({&weights, &items})) {
    tape.record(out, [weights, items, out, table, k, f]() mutable {
      const std::size_t n = table.queries, width = table.width;
      auto g = out.grad();
      auto wv = weights.data();
      auto iv = items.data();
      const bool need_w = weights.requires_grad();
      const bool need_items = items.requires_grad();
      std::span<double> gw = need_w ? weights.grad() : std::span<double>{};
      std::span<double> gi = need_items ? items.grad() : std::span<double>{};
      for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t q = 0; q < n; ++q) {
          const double* gout = g.data() + (j * n + q) * f;
          const std::size_t wbase = (j * n + q) * width;
          for (std::size_t m = 0; m < table.count[q]; ++m) {
            const std::size_t c = table.index[q * width + m];
            if (need_w) {
              const double* src = iv.data() + c * f;
              double acc = 0.0;
              for (std::size_t x = 0; x < f; ++x) acc += gout[x] * src[x];
              gw[wbase + m] += acc;
            }
            if (need_items) {
              const double w = wv[wbase + m];
              if (w == 0.0) continue;
              double* dst = gi.data() + c * f;
              for (std::size_t x = 0; x < f; ++x) dst[x] += w * gout[x];
            }
          }
        }
      }
    });
  }
  return out;
}

// ------------------------------------------------------------------ block

ad::Tensor n3_forward(ad::Tape& tape, const ad::Tensor& input,
                      const N3BlockParams& params, const N3BlockConfig& cfg,
                      const ad::Tensor* match_image,
                      BlockDiagnostics* diagnostics) {
  cfg.validate();
  if (input.rank() != 3) {
    throw std::invalid_argument("n3_forward: input must be [C,H,W], got " +
                                ad::shape_str(input.shape()));
  }
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const PatchGrid grid{h, w, cfg.patch, cfg.stride, c};
  grid.validate();
  const CandidateTable table = build_candidate_table(grid, WindowSpec{cfg.region});

  ad::Tensor match_patches;
  if (cfg.has_embedding()) {
    ad::Tensor e = embed(tape, input, params, cfg);
    match_patches = im2col(tape, e, PatchGrid{h, w, cfg.patch, cfg.stride, e.dim(0)});
  } else {
    if (match_image == nullptr) {
      throw std::invalid_argument("n3_forward: block matches on the input image "
                                  "but none was given");
    }
    if (match_image->rank() != 3 || match_image->dim(1) != h ||
        match_image->dim(2) != w) {
      throw std::invalid_argument("n3_forward: match image " +
                                  ad::shape_str(match_image->shape()) +
                                  " does not match input " +
                                  ad::shape_str(input.shape()));
    }
    match_patches = im2col(tape, *match_image,
                           PatchGrid{h, w, cfg.patch, cfg.stride, match_image->dim(0)});
  }
  ad::Tensor distances = window_distances(tape, match_patches, table, cfg.distance);

  ad::Tensor weights;
  if (cfg.selection == Selection::kHard) {
    weights = hard_neighbor_weights(distances, table, cfg.k);
  } else {
    ad::Tensor temps;
    if (cfg.fixed_temperature) {
      temps = ad::Tensor({grid.count()});
      std::fill(temps.data().begin(), temps.data().end(), *cfg.fixed_temperature);
    } else {
      temps = center_temperature(tape, temperature_map(tape, input, params, cfg),
                                 PatchGrid{h, w, cfg.patch, cfg.stride, 1});
    }
    weights = neighbor_weights(tape, distances, temps, table, cfg.k);
  }

  if (diagnostics) {
    diagnostics->max_weight.assign(cfg.k, 0.0);
    auto wv = weights.data();
    for (std::size_t j = 0; j < cfg.k; ++j) {
      double acc = 0.0;
      for (std::size_t q = 0; q < table.queries; ++q) {
        const double* row = wv.data() + (j * table.queries + q) * table.width;
        acc += *std::max_element(row, row + table.count[q]);
      }
      diagnostics->max_weight[j] = acc / static_cast<double>(table.queries);
    }
  }

  ad::Tensor items = im2col(tape, input, grid);
  ad::Tensor volumes = aggregate_neighbors(tape, weights, items, table);
  std::vector<ad::Tensor> parts{input};
  for (std::size_t j = 0; j < cfg.k; ++j) {
    parts.push_back(col2im_avg(tape, ad::select(tape, volumes, j), grid));
  }
  return ad::concat_channels(tape, parts);
}

// -------------------------------------------------------------------- net

N3Net::N3Net(N3NetConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  for (std::size_t i = 0; i < config_.local_depths.size(); ++i) {
    std::vector<std::size_t> widths(config_.local_depths[i] - 1, config_.feature_width);
    widths.push_back(config_.stack_out_channels(i));
    stacks_.push_back(init_conv_stack(config_.stack_in_channels(i), widths, rng));
    // Zero residual branches: a fresh network is the identity map.
    auto last = stacks_.back().layers.back().kernels.data();
    std::fill(last.begin(), last.end(), 0.0);
    if (i < config_.blocks.size()) {
      blocks_.push_back(
          init_block_params(config_.blocks[i], config_.interface_width, rng));
    }
  }
}

namespace {

std::size_t padded_size(std::size_t size, const std::vector<N3BlockConfig>& blocks) {
  std::size_t target = size;
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& b : blocks) {
      const std::size_t next = next_valid_size(target, b.patch, b.stride);
      if (next != target) {
        target = next;
        changed = true;
      }
    }
  }
  return target;
}

}  // namespace

ad::Tensor N3Net::forward(ad::Tape& tape, const ad::Tensor& image,
                          std::vector<BlockDiagnostics>* diagnostics) const {
  if (image.rank() != 3 || image.dim(0) != 1) {
    throw std::invalid_argument("N3Net: expected a [1,H,W] image, got " +
                                ad::shape_str(image.shape()));
  }
  const std::size_t h = image.dim(1), w = image.dim(2);
  const std::size_t hp = padded_size(h, config_.blocks);
  const std::size_t wp = padded_size(w, config_.blocks);
  ad::Tensor x = image;
  if (hp != h || wp != w) x = ad::pad_reflect(tape, image, hp - h, wp - w);
  const ad::Tensor network_input = x;
  if (diagnostics) diagnostics->assign(blocks_.size(), {});

  for (std::size_t i = 0; i < stacks_.size(); ++i) {
    x = ad::residual_add(tape, stacks_[i].forward(tape, x), x);
    if (i < blocks_.size()) {
      x = n3_forward(tape, x, blocks_[i], config_.blocks[i], &network_input,
                     diagnostics ? &(*diagnostics)[i] : nullptr);
    }
  }
  if (hp != h || wp != w) x = ad::crop(tape, x, h, w);
  return x;
}

std::vector<NamedTensor> N3Net::parameters() const {
  std::vector<NamedTensor> out;
  auto add_stack = [&](const std::string& prefix, const ConvStack& stack) {
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
      const std::string base = prefix + ".conv" + std::to_string(l);
      out.push_back({base + ".kernels", stack.layers[l].kernels});
      out.push_back({base + ".bias", stack.layers[l].bias});
    }
  };
  for (std::size_t i = 0; i < stacks_.size(); ++i) {
    add_stack("stack" + std::to_string(i), stacks_[i]);
    if (i < blocks_.size()) {
      add_stack("block" + std::to_string(i) + ".embed", blocks_[i].embed);
      add_stack("block" + std::to_string(i) + ".temp", blocks_[i].temperature);
    }
  }
  return out;
}

std::size_t N3Net::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : parameters()) total += p.tensor.size();
  return total;
}

void N3Net::zero_grad() {
  for (auto& p : parameters()) p.tensor.zero_grad();
}

void N3Net::fill_parameters(double value) {
  for (auto& p : parameters()) {
    std::fill(p.tensor.data().begin(), p.tensor.data().end(), value);
  }
}

ad::Tensor n3net_forward(ad::Tape& tape, const ad::Tensor& image,
                         const N3Net& net) {
  return net.forward(tape, image);
}

}  // namespace n3net
