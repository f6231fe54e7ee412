#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "n3net/checkpoint.hpp"

namespace n3net {
namespace {

namespace fs = std::filesystem;

class CheckpointFiles : public ::testing::Test {
 protected:
  fs::path dir = fs::temp_directory_path() / ("n3net_ckpt_" + std::to_string(::getpid()));
  void SetUp() override { fs::create_directories(dir); }
  void TearDown() override { fs::remove_all(dir); }
};

Checkpoint sample() {
  Checkpoint c{"[net]\nk = 2\n", {}};
  c.tensors.push_back({"a", ad::Tensor({2, 2}, {1.0, -2.5, 0.125, 3.0})});
  c.tensors.push_back({"b.bias", ad::Tensor({3}, {0.0, 1e-3, -7.0})});
  return c;
}

TEST(CheckpointCodec, RoundTripsExactly) {
  const Checkpoint c = sample();
  const Checkpoint d = decode_checkpoint(encode_checkpoint(c));
  EXPECT_EQ(d.header, c.header);
  ASSERT_EQ(d.tensors.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(d.tensors[i].name, c.tensors[i].name);
    EXPECT_EQ(d.tensors[i].tensor.shape(), c.tensors[i].tensor.shape());
    for (std::size_t j = 0; j < c.tensors[i].tensor.size(); ++j) {
      EXPECT_EQ(d.tensors[i].tensor.data()[j],
                static_cast<double>(static_cast<float>(c.tensors[i].tensor.data()[j])));
    }
  }
  EXPECT_EQ(encode_checkpoint(d), encode_checkpoint(c));
}

TEST(CheckpointCodec, EmptyHeader) {
  Checkpoint c = sample();
  c.header.clear();
  EXPECT_EQ(decode_checkpoint(encode_checkpoint(c)).header, "");
}

TEST(CheckpointCodec, RejectsCorruptBytes) {
  const std::string bytes = encode_checkpoint(sample());
  EXPECT_THROW(decode_checkpoint("garbage"), CheckpointError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), CheckpointError);
  EXPECT_THROW(decode_checkpoint(bytes + "x"), CheckpointError);
  EXPECT_THROW(decode_checkpoint("N3NET-CHECKPOINT 1\nno end marker"), CheckpointError);
}

TEST_F(CheckpointFiles, NetworkRoundTripIsBitExact) {
  const N3Net net(N3NetConfig::desk_default(2), 9);
  write_checkpoint(dir / "a.bin", make_checkpoint(net));
  const Checkpoint loaded = read_checkpoint(dir / "a.bin");
  EXPECT_EQ(N3NetConfig::read(ConfigText::parse(loaded.header)), net.config());
  N3Net copy(net.config(), 123);
  load_parameters(copy, loaded);
  write_checkpoint(dir / "b.bin", make_checkpoint(copy));
  std::ifstream a(dir / "a.bin", std::ios::binary), b(dir / "b.bin", std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), {});
  const std::string sb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(sa, sb);
}

TEST_F(CheckpointFiles, MissingFileIsAnIoError) {
  EXPECT_THROW(read_checkpoint(dir / "missing.bin"), IoError);
}

TEST(LoadParameters, RejectsMismatchedNetworks) {
  const N3Net small(N3NetConfig::desk_default(2), 0);
  N3Net other(N3NetConfig::desk_default(3), 0);
  EXPECT_THROW(load_parameters(other, make_checkpoint(small)), std::invalid_argument);
  Checkpoint partial = make_checkpoint(small);
  partial.tensors.pop_back();
  N3Net same(N3NetConfig::desk_default(2), 1);
  EXPECT_THROW(load_parameters(same, partial), std::invalid_argument);
}

}  // namespace
}  // namespace n3net
