#include "n3net/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace n3net {
namespace {

constexpr const char* kMagic = "N3NET-CHECKPOINT 1\n";
constexpr const char* kEndHeader = "end_header\n";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t pos() const { return pos_; }
  void seek(std::size_t p) { pos_ = p; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw CheckpointError("checkpoint truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out = kMagic;
  out += ckpt.header;
  if (!ckpt.header.empty() && ckpt.header.back() != '\n') out += '\n';
  out += kEndHeader;
  put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put_u32(out, static_cast<std::uint32_t>(t.tensor.rank()));
    for (auto d : t.tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.tensor.data()) put_f32(out, static_cast<float>(v));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  const std::string magic = kMagic;
  if (bytes.compare(0, magic.size(), magic) != 0) {
    throw CheckpointError("not an N3Net checkpoint (bad magic)");
  }
  const std::string end_marker = std::string("\n") + kEndHeader;
  // The header may be empty, in which case end_header follows the magic line.
  std::size_t header_end;
  std::size_t body;
  if (bytes.compare(magic.size(), std::strlen(kEndHeader), kEndHeader) == 0) {
    header_end = magic.size();
    body = magic.size() + std::strlen(kEndHeader);
  } else {
    const auto at = bytes.find(end_marker, magic.size());
    if (at == std::string::npos) throw CheckpointError("checkpoint header not terminated");
    header_end = at + 1;
    body = at + end_marker.size();
  }
  Checkpoint ckpt;
  ckpt.header = bytes.substr(magic.size(), header_end - magic.size());

  Reader in(bytes);
  in.seek(body);
  const std::uint32_t count = in.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = in.bytes(in.u32());
    const std::uint32_t rank = in.u32();
    if (rank > 8) throw CheckpointError("tensor '" + t.name + "' has rank " + std::to_string(rank));
    ad::Shape shape(rank);
    std::size_t total = 1;
    for (auto& d : shape) {
      d = in.u32();
      total *= d;
    }
    if (total * 4 > bytes.size()) throw CheckpointError("tensor '" + t.name + "' too large");
    std::vector<double> values(total);
    for (auto& v : values) v = static_cast<double>(in.f32());
    t.tensor = ad::Tensor(std::move(shape), std::move(values));
    ckpt.tensors.push_back(std::move(t));
  }
  if (!in.done()) throw CheckpointError("trailing bytes after checkpoint tensors");
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  const std::string bytes = encode_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

Checkpoint make_checkpoint(const N3Net& net) {
  ConfigText text;
  net.config().write(text);
  Checkpoint ckpt{text.str(), {}};
  for (const auto& p : net.parameters()) {
    ckpt.tensors.push_back({p.name, p.tensor.clone()});
  }
  return ckpt;
}

void load_parameters(N3Net& net, const Checkpoint& ckpt) {
  std::map<std::string, const ad::Tensor*> stored;
  for (const auto& t : ckpt.tensors) stored[t.name] = &t.tensor;
  for (auto& p : net.parameters()) {
    const auto it = stored.find(p.name);
    if (it == stored.end()) {
      throw std::invalid_argument("checkpoint has no tensor '" + p.name + "'");
    }
    if (it->second->shape() != p.tensor.shape()) {
      throw std::invalid_argument("checkpoint tensor '" + p.name + "' has shape " +
                                  ad::shape_str(it->second->shape()) + ", expected " +
                                  ad::shape_str(p.tensor.shape()));
    }
    std::copy(it->second->data().begin(), it->second->data().end(),
              p.tensor.data().begin());
  }
  if (stored.size() != net.parameters().size()) {
    throw std::invalid_argument("checkpoint holds " + std::to_string(stored.size()) +
                                " tensors, network has " +
                                std::to_string(net.parameters().size()));
  }
}

}  // namespace n3net
