#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dusnet/encoding.hpp"
#include "dusnet/errors.hpp"
#include "dusnet/fft.hpp"
#include "test_util.hpp"

namespace dus {
namespace {

// Direct O(n^2) orthonormal DFT of one frame, used as an oracle.
DynVolume naive_dft2(const DynVolume& v, double sign) {
  const Shape3T s = v.shape();
  DynVolume out(s);
  const double norm = 1.0 / std::sqrt(static_cast<double>(s.h * s.w));
  for (std::size_t f = 0; f < s.t; ++f)
    for (std::size_t ky = 0; ky < s.h; ++ky)
      for (std::size_t kx = 0; kx < s.w; ++kx) {
        cplx acc = 0.0;
        for (std::size_t y = 0; y < s.h; ++y)
          for (std::size_t x = 0; x < s.w; ++x) {
            const double ph = sign * 2.0 * std::numbers::pi *
                              (static_cast<double>(ky * y) / s.h + static_cast<double>(kx * x) / s.w);
            acc += v(y, x, f) * cplx(std::cos(ph), std::sin(ph));
          }
        out(ky, kx, f) = acc * norm;
      }
  return out;
}

TEST(Fft, ConstantFrameHasSingleDcOfMagnitudeN) {
  const std::size_t n = 8;
  DynVolume v(Shape3T{n, n, 2});
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0;
  const DynVolume k = fft2_frames(v, FftDirection::forward);
  for (std::size_t f = 0; f < 2; ++f)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        const double expect = (y == 0 && x == 0) ? static_cast<double>(n) : 0.0;
        EXPECT_NEAR(std::abs(k(y, x, f)), expect, 1e-12);
      }
}

TEST(Fft, MatchesDirectDft) {
  std::mt19937_64 rng(21);
  const DynVolume v = test::random_volume({6, 5, 2}, rng);
  EXPECT_LT(test::max_abs_diff(fft2_frames(v, FftDirection::forward), naive_dft2(v, -1.0)), 1e-12);
  EXPECT_LT(test::max_abs_diff(fft2_frames(v, FftDirection::inverse), naive_dft2(v, +1.0)), 1e-12);
}

TEST(Fft, RoundTripAndParseval) {
  std::mt19937_64 rng(22);
  const DynVolume v = test::random_volume({8, 8, 3}, rng);
  const DynVolume k = fft2_frames(v, FftDirection::forward);
  const DynVolume back = fft2_frames(k, FftDirection::inverse);
  EXPECT_LT(frobenius_norm(sub(back, v)) / frobenius_norm(v), 1e-12);
  EXPECT_NEAR(frobenius_norm(k), frobenius_norm(v), 1e-12 * frobenius_norm(v));
}

TEST(Fft, TemporalTransformIsUnitaryAlongT) {
  std::mt19937_64 rng(23);
  const DynVolume v = test::random_volume({2, 3, 5}, rng);
  DynVolume k = v;
  fft_temporal_inplace(k.shape(), k.data(), FftDirection::forward);
  // Oracle at one location.
  for (std::size_t m = 0; m < 5; ++m) {
    cplx acc = 0.0;
    for (std::size_t f = 0; f < 5; ++f) {
      const double ph = -2.0 * std::numbers::pi * static_cast<double>(m * f) / 5.0;
      acc += v(1, 2, f) * cplx(std::cos(ph), std::sin(ph));
    }
    EXPECT_NEAR(std::abs(k(1, 2, m) - acc / std::sqrt(5.0)), 0.0, 1e-12);
  }
  fft_temporal_inplace(k.shape(), k.data(), FftDirection::inverse);
  EXPECT_LT(test::max_abs_diff(k, v), 1e-12);
}

TEST(Mask, ValidatesEntries) {
  EXPECT_THROW(SamplingMask(Shape3T{2, 2, 1}, {1, 0, 2, 0}), InvalidArgument);
  EXPECT_THROW(SamplingMask(Shape3T{2, 2, 2}, {1, 0, 0, 0, 0, 0, 0, 0}), InvalidArgument);  // frame 1 empty
  EXPECT_THROW(SamplingMask(Shape3T{2, 2, 1}, {1, 0, 0}), InvalidArgument);
  const SamplingMask m(Shape3T{2, 2, 1}, {1, 0, 0, 1});
  EXPECT_EQ(m.count(), 2u);
  EXPECT_DOUBLE_EQ(m.fraction(), 0.5);
}

TEST(Encoding, FullMaskEqualsUnitaryFft) {
  std::mt19937_64 rng(24);
  const DynVolume x = test::random_volume({4, 6, 3}, rng);
  const EncodingOp op(SamplingMask::full(x.shape()));
  const KSpace b = op.forward(x);
  const DynVolume k = fft2_frames(x, FftDirection::forward);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_EQ(b[i], k[i]);
  EXPECT_NEAR(frobenius_norm(b), frobenius_norm(x), 1e-12 * frobenius_norm(x));
  EXPECT_LT(test::max_abs_diff(op.adjoint(b), x), 1e-12);
}

TEST(Encoding, SingleSamplePerFrame) {
  std::mt19937_64 rng(25);
  const Shape3T s{4, 4, 3};
  std::vector<std::uint8_t> sup(s.size(), 0);
  for (std::size_t f = 0; f < s.t; ++f) sup[s.index(f, 2, f)] = 1;
  const EncodingOp op(SamplingMask(s, sup));
  const KSpace b = op.forward(test::random_volume(s, rng));
  for (std::size_t f = 0; f < s.t; ++f) {
    std::size_t nonzero = 0;
    for (std::size_t y = 0; y < s.h; ++y)
      for (std::size_t x = 0; x < s.w; ++x) nonzero += b(y, x, f) != cplx(0.0) ? 1 : 0;
    EXPECT_EQ(nonzero, 1u);
  }
}

TEST(Encoding, UnsampledEntriesAreExactlyZero) {
  std::mt19937_64 rng(26);
  const SamplingMask m = test::random_mask({8, 8, 4}, 0.3, rng);
  const KSpace b = EncodingOp(m).forward(test::random_volume(m.shape(), rng));
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!m[i]) {
      EXPECT_EQ(b[i], cplx(0.0));
    }
  }
}

TEST(Encoding, DotTest) {
  std::mt19937_64 rng(27);
  for (int trial = 0; trial < 100; ++trial) {
    const SamplingMask m = test::random_mask({8, 6, 3}, 0.4, rng);
    const EncodingOp op(m);
    const DynVolume x = test::random_volume(m.shape(), rng);
    const KSpace y = test::random_kspace(m.shape(), rng);
    const cplx lhs = inner_product(op.forward(x), y);
    const cplx rhs = inner_product(x, op.adjoint(y));
    double ny = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) ny += std::norm(y[i]);
    EXPECT_LT(std::abs(lhs - rhs) / (frobenius_norm(x) * std::sqrt(ny)), 1e-10);
  }
}

TEST(Encoding, ZeroKspaceGivesZeroVolume) {
  const Shape3T s{4, 4, 2};
  const EncodingOp op(SamplingMask::full(s));
  EXPECT_EQ(op.adjoint(KSpace(s)), DynVolume(s));
}

TEST(Encoding, ShapeMismatchThrows) {
  const EncodingOp op(SamplingMask::full({4, 4, 2}));
  EXPECT_THROW((void)op.forward(DynVolume(Shape3T{4, 4, 3})), InvalidArgument);
  EXPECT_THROW((void)op.adjoint(KSpace(Shape3T{2, 4, 2})), InvalidArgument);
}

TEST(Encoding, MaskIsIdempotentProjection) {
  std::mt19937_64 rng(28);
  const SamplingMask m = test::random_mask({6, 6, 2}, 0.5, rng);
  const EncodingOp op(m);
  KSpace k = test::random_kspace(m.shape(), rng);
  op.apply_mask(k.data());
  const KSpace once = k;
  op.apply_mask(k.data());
  EXPECT_EQ(k, once);
}

bool point_symmetric(const SamplingMask& m) {
  const Shape3T s = m.shape();
  for (std::size_t f = 0; f < s.t; ++f)
    for (std::size_t y = 0; y < s.h; ++y)
      for (std::size_t x = 0; x < s.w; ++x) {
        if (m.at(y, x, f) != m.at((s.h - y) % s.h, (s.w - x) % s.w, f)) return false;
      }
  return true;
}

TEST(PseudoRadial, SaturatesToFullMask) {
  const Shape3T s{16, 16, 2};
  EXPECT_EQ(make_pseudo_radial_mask(s, 400, 3), SamplingMask::full(s));
}

TEST(PseudoRadial, PointSymmetricWithDc) {
  for (std::uint64_t seed : {0u, 1u, 7u}) {
    for (const Shape3T s : {Shape3T{64, 64, 8}, Shape3T{33, 20, 3}, Shape3T{128, 128, 2}}) {
      const SamplingMask m = make_pseudo_radial_mask(s, 16, seed);
      EXPECT_TRUE(point_symmetric(m)) << s.str();
      for (std::size_t f = 0; f < s.t; ++f) EXPECT_TRUE(m.at(0, 0, f));
    }
  }
}

TEST(PseudoRadial, ConsecutiveFramesDiffer) {
  const SamplingMask m = make_pseudo_radial_mask({64, 64, 8}, 16, 1);
  const Shape3T s = m.shape();
  for (std::size_t f = 1; f < s.t; ++f) {
    bool differs = false;
    for (std::size_t y = 0; y < s.h && !differs; ++y)
      for (std::size_t x = 0; x < s.w && !differs; ++x) differs = m.at(y, x, f) != m.at(y, x, f - 1);
    EXPECT_TRUE(differs) << "frame " << f;
  }
}

TEST(PseudoRadial, SixteenSpokeFractionRegression) {
  // Spokes run to the edge of the square grid, so diagonal spokes are longer
  // than 128 samples and the fraction sits above 16 * 128 / 128^2.
  constexpr double kRadial16Fraction128 = 0.15178680419921875;
  constexpr double kRadial16Fraction64 = 0.292938232421875;
  const SamplingMask m = make_pseudo_radial_mask({128, 128, 8}, 16, 0);
  EXPECT_GT(m.fraction(), 0.10);
  EXPECT_LT(m.fraction(), 0.20);
  EXPECT_NEAR(m.fraction(), kRadial16Fraction128, 1e-12);
  EXPECT_NEAR(make_pseudo_radial_mask({64, 64, 8}, 16, 1).fraction(), kRadial16Fraction64, 1e-12);
}

TEST(PseudoRadial, SeededAndDeterministic) {
  const Shape3T s{32, 32, 4};
  EXPECT_EQ(make_pseudo_radial_mask(s, 8, 5), make_pseudo_radial_mask(s, 8, 5));
  EXPECT_NE(make_pseudo_radial_mask(s, 8, 5), make_pseudo_radial_mask(s, 8, 6));
  EXPECT_THROW(make_pseudo_radial_mask(s, 0, 1), InvalidArgument);
}

TEST(Vds, AccelerationOneSamplesEverything) {
  const Shape3T s{16, 20, 3};
  EXPECT_EQ(make_vds_mask(s, 1.0, 4, 9), SamplingMask::full(s));
}

TEST(Vds, LineCountAndFullLines) {
  for (double accel : {2.0, 3.0, 4.0, 8.0, 10.0}) {
    const Shape3T s{12, 64, 4};
    const SamplingMask m = make_vds_mask(s, accel, 4, 3);
    const auto target = static_cast<std::size_t>(std::ceil(64.0 / accel));
    for (std::size_t f = 0; f < s.t; ++f) {
      std::size_t lines = 0;
      for (std::size_t x = 0; x < s.w; ++x) {
        const bool on = m.at(0, x, f);
        for (std::size_t y = 1; y < s.h; ++y) ASSERT_EQ(m.at(y, x, f), on);
        lines += on ? 1 : 0;
      }
      EXPECT_EQ(lines, target) << "accel " << accel;
      // The centre block around DC (unshifted indices).
      for (std::size_t x : {std::size_t{0}, std::size_t{1}, std::size_t{63}}) EXPECT_TRUE(m.at(0, x, f));
    }
  }
}

TEST(Vds, SeedDeterminism) {
  const Shape3T s{8, 64, 4};
  EXPECT_EQ(make_vds_mask(s, 4.0, 4, 1), make_vds_mask(s, 4.0, 4, 1));
  EXPECT_NE(make_vds_mask(s, 4.0, 4, 1), make_vds_mask(s, 4.0, 4, 2));
}

TEST(Vds, InvalidArguments) {
  const Shape3T s{8, 16, 2};
  EXPECT_THROW(make_vds_mask(s, 0.5, 4, 1), InvalidArgument);
  EXPECT_THROW(make_vds_mask(s, 2.0, 16, 1), InvalidArgument);
  EXPECT_THROW(make_vds_mask(s, 8.0, 4, 1), InvalidArgument);  // target 2 < 4 centre lines
}

TEST(Noise, ZeroSigmaIsIdentity) {
  std::mt19937_64 rng(29);
  const SamplingMask m = test::random_mask({8, 8, 2}, 0.5, rng);
  const KSpace b = EncodingOp(m).forward(test::random_volume(m.shape(), rng));
  EXPECT_EQ(add_noise(b, m, 0.0, 3), b);
}

TEST(Noise, EmpiricalStdAndUnsampledZeros) {
  std::mt19937_64 rng(30);
  const Shape3T s{128, 128, 8};
  const SamplingMask m = test::random_mask(s, 0.5, rng);
  const KSpace b(s);
  const double sigma = 0.25;
  const KSpace n = add_noise(b, m, sigma, 77);
  double sum = 0.0;
  double sq = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (!m[i]) {
      EXPECT_EQ(n[i], cplx(0.0));
      continue;
    }
    for (double v : {n[i].real(), n[i].imag()}) {
      sum += v;
      sq += v * v;
      ++count;
    }
  }
  ASSERT_GT(count, 100000u);
  const double mean = sum / count;
  const double sd = std::sqrt(sq / count - mean * mean);
  EXPECT_NEAR(sd, sigma, 0.05 * sigma);
  EXPECT_EQ(add_noise(b, m, sigma, 77), n);
  EXPECT_THROW(add_noise(b, m, -1.0, 1), InvalidArgument);
}

}  // namespace
}  // namespace dus
