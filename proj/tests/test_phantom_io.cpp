#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "dusnet/errors.hpp"
#include "dusnet/io.hpp"
#include "dusnet/phantom.hpp"
#include "test_util.hpp"

namespace dus {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("dusnet_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                                                 ::testing::UnitTest::GetInstance()->current_test_info()->name())) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::string read_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream os(p, std::ios::binary);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

TEST(Phantom, NoMotionGivesIdenticalFrames) {
  const DynVolume v = generate_phantom(PhantomSpec{{24, 20, 5}, 4, 0.0, 3});
  for (std::size_t y = 0; y < 24; ++y)
    for (std::size_t x = 0; x < 20; ++x)
      for (std::size_t f = 1; f < 5; ++f) EXPECT_EQ(v(y, x, f), v(y, x, 0));
}

TEST(Phantom, PeakIsOneAndFramesMove) {
  const DynVolume v = generate_phantom(PhantomSpec{{32, 32, 8}, 6, 0.05, 1});
  double peak = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) peak = std::max(peak, std::abs(v[i]));
  EXPECT_NEAR(peak, 1.0, 1e-12);
  double diff = 0.0;
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t x = 0; x < 32; ++x) diff += std::abs(v(y, x, 4) - v(y, x, 0));
  EXPECT_GT(diff, 0.1);
}

TEST(Phantom, SeededAndValidated) {
  const PhantomSpec spec{{16, 16, 4}, 5, 0.1, 11};
  EXPECT_EQ(generate_phantom(spec), generate_phantom(spec));
  PhantomSpec other = spec;
  other.seed = 12;
  EXPECT_NE(generate_phantom(other), generate_phantom(spec));
  other.motion = 0.5;
  EXPECT_THROW(generate_phantom(other), InvalidArgument);
  other.motion = -0.1;
  EXPECT_THROW(generate_phantom(other), InvalidArgument);
}

TEST(Dmrt, RoundTripsAreBitExact) {
  TempDir dir;
  std::mt19937_64 rng(91);
  const Shape3T s{5, 3, 4};
  const DynVolume v = test::random_volume(s, rng);
  const KSpace k = test::random_kspace(s, rng);
  const SamplingMask m = test::random_mask(s, 0.3, rng);
  const ChannelTensor c = test::random_channels(3, s, rng);
  save_dmrt(dir / "v.dmrt", v);
  save_dmrt(dir / "k.dmrt", k);
  save_dmrt(dir / "m.dmrt", m);
  save_dmrt(dir / "c.dmrt", c);
  EXPECT_EQ(load_volume(dir / "v.dmrt"), v);
  EXPECT_EQ(load_kspace(dir / "k.dmrt"), k);
  EXPECT_EQ(load_mask(dir / "m.dmrt"), m);
  EXPECT_EQ(load_channels(dir / "c.dmrt"), c);
}

TEST(Dmrt, ByteLayout) {
  TempDir dir;
  DynVolume v(Shape3T{1, 2, 1});
  v[0] = cplx(1.5, -2.0);
  v[1] = cplx(0.0, 1.0);
  save_dmrt(dir / "v.dmrt", v);
  const std::string expected = std::string("DMRT", 4) +
                               std::string("\x01\x00\x00\x00", 4) +           // version
                               std::string("\x03\x00\x00\x00", 4) +           // ndims
                               std::string("\x01\x00\x00\x00\x02\x00\x00\x00\x01\x00\x00\x00", 12) +
                               std::string("\x01", 1) +                       // dtype complex
                               std::string("\x00\x00\x00\x00\x00\x00\xf8\x3f", 8) +  // 1.5
                               std::string("\x00\x00\x00\x00\x00\x00\x00\xc0", 8) +  // -2
                               std::string("\x00\x00\x00\x00\x00\x00\x00\x00", 8) +  // 0
                               std::string("\x00\x00\x00\x00\x00\x00\xf0\x3f", 8);   // 1
  EXPECT_EQ(read_bytes(dir / "v.dmrt"), expected);

  const SamplingMask m(Shape3T{2, 1, 1}, {0, 1});
  save_dmrt(dir / "m.dmrt", m);
  EXPECT_EQ(read_bytes(dir / "m.dmrt"), std::string("DMRT\x01\x00\x00\x00\x03\x00\x00\x00", 12) +
                                            std::string("\x02\x00\x00\x00\x01\x00\x00\x00\x01\x00\x00\x00", 12) +
                                            std::string("\x00\x00\x01", 3));
}

TEST(Dmrt, RejectsMalformedFiles) {
  TempDir dir;
  std::mt19937_64 rng(92);
  save_dmrt(dir / "v.dmrt", test::random_volume({2, 2, 2}, rng));
  const std::string good = read_bytes(dir / "v.dmrt");

  std::string bad = good;
  bad[0] = 'X';
  write_bytes(dir / "bad.dmrt", bad);
  try {
    load_volume(dir / "bad.dmrt");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("DMRT"), std::string::npos);
  }

  bad = good;
  bad[4] = 2;
  write_bytes(dir / "bad.dmrt", bad);
  EXPECT_THROW(load_volume(dir / "bad.dmrt"), FormatError);

  write_bytes(dir / "bad.dmrt", good.substr(0, good.size() - 3));
  EXPECT_THROW(load_volume(dir / "bad.dmrt"), FormatError);

  write_bytes(dir / "bad.dmrt", good + "x");
  EXPECT_THROW(load_volume(dir / "bad.dmrt"), FormatError);

  EXPECT_THROW(load_mask(dir / "v.dmrt"), FormatError);
  EXPECT_THROW(load_channels(dir / "v.dmrt"), FormatError);
  EXPECT_THROW(load_volume(dir / "missing.dmrt"), FormatError);

  // A mask with a frame that has no samples is not a valid SamplingMask.
  write_bytes(dir / "m.dmrt", std::string("DMRT\x01\x00\x00\x00\x03\x00\x00\x00", 12) +
                                  std::string("\x01\x00\x00\x00\x01\x00\x00\x00\x02\x00\x00\x00", 12) +
                                  std::string("\x00\x01\x00", 3));
  EXPECT_THROW(load_mask(dir / "m.dmrt"), FormatError);
}

TEST(Dmrt, StreamInterface) {
  DmrtArray a;
  a.dims = {2, 1};
  a.type = DmrtType::mask;
  a.payload = {1, 0};
  std::stringstream ss;
  write_dmrt(ss, a);
  const DmrtArray b = read_dmrt(ss);
  EXPECT_EQ(b.dims, a.dims);
  EXPECT_EQ(b.type, a.type);
  EXPECT_EQ(b.payload, a.payload);
  a.payload.push_back(1);
  std::stringstream bad;
  EXPECT_THROW(write_dmrt(bad, a), InvalidArgument);
}

Checkpoint sample_checkpoint() {
  NetworkConfig cfg;
  cfg.n_phases = 2;
  cfg.nc = 4;
  return Checkpoint{cfg, init_network(cfg, 17), {123, 17}};
}

TEST(Dusc, RoundTripPreservesParametersAndOutput) {
  TempDir dir;
  const Checkpoint ck = sample_checkpoint();
  save_checkpoint(dir / "n.dusc", ck);
  const Checkpoint back = load_checkpoint(dir / "n.dusc");
  EXPECT_EQ(back.params, ck.params);
  EXPECT_EQ(back.meta, ck.meta);
  EXPECT_EQ(back.config.n_phases, 2u);
  EXPECT_EQ(back.config.nc, 4u);

  std::mt19937_64 rng(93);
  const Shape3T s{8, 8, 4};
  const SamplingMask m = test::random_mask(s, 0.4, rng);
  const EncodingOp op(m);
  const KSpace b = op.forward(test::random_volume(s, rng));
  const DynVolume y1 = network_forward(b, op, ck.params, ck.config).x_hat;
  const DynVolume y2 = network_forward(b, op, back.params, back.config).x_hat;
  EXPECT_EQ(y1, y2);
}

TEST(Dusc, RejectsMalformedFiles) {
  TempDir dir;
  save_checkpoint(dir / "n.dusc", sample_checkpoint());
  const std::string good = read_bytes(dir / "n.dusc");

  std::string bad = good;
  bad[1] = 'X';
  write_bytes(dir / "bad.dusc", bad);
  EXPECT_THROW(load_checkpoint(dir / "bad.dusc"), FormatError);

  // First tensor name begins after magic, version, 5 config fields and the tensor count.
  const std::size_t name_at = 4 + 4 + 4 + 4 + 1 + 4 + 4 + 4 + 4;
  bad = good;
  bad[name_at] = static_cast<char>(bad[name_at] ^ 0x20);
  write_bytes(dir / "bad.dusc", bad);
  EXPECT_THROW(load_checkpoint(dir / "bad.dusc"), FormatError);

  // Claim more phases than the file holds.
  bad = good;
  bad[8] = 3;
  write_bytes(dir / "bad.dusc", bad);
  EXPECT_THROW(load_checkpoint(dir / "bad.dusc"), FormatError);

  write_bytes(dir / "bad.dusc", good.substr(0, good.size() - 1));
  EXPECT_THROW(load_checkpoint(dir / "bad.dusc"), FormatError);
  write_bytes(dir / "bad.dusc", good + std::string(1, '\0'));
  EXPECT_THROW(load_checkpoint(dir / "bad.dusc"), FormatError);
  EXPECT_THROW(load_checkpoint(dir / "missing.dusc"), FormatError);
}

}  // namespace
}  // namespace dus
