#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "ghostlab/accumulators.hpp"
#include "ghostlab/rng.hpp"

using namespace ghostlab;

TEST(Philox, KnownAnswerVectors) {
  using C = Philox4x32::Counter;
  EXPECT_EQ(Philox4x32::encrypt({0, 0, 0, 0}, {0, 0}), (C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(Philox4x32::encrypt({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
            (C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(Philox4x32::encrypt({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
            (C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(RngStream, SameSeedAndStreamReproduces) {
  RngStream a(42, 7), b(42, 7);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
}

TEST(RngStream, StreamsAndSeedsDiffer) {
  std::set<std::uint64_t> firsts;
  for (std::uint64_t s = 0; s < 4; ++s)
    for (std::uint64_t id : {std::uint64_t{0}, std::uint64_t{1}, stream_domain::kSpeckleFrames, stream_domain::kDetectorNoise})
      firsts.insert(RngStream(s, id)());
  EXPECT_EQ(firsts.size(), 16u);
}

TEST(RngStream, UniformRanges) {
  RngStream rng(1, 0);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    const double v = rng.uniform_open_closed();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_GT(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
}

TEST(RngStream, NormalMoments) {
  RngStream rng(3, 11);
  PairMoments m;
  for (int i = 0; i < 400000; ++i) {
    const double z = rng.normal();
    m.add(z, z * z);
  }
  EXPECT_NEAR(m.mean_x(), 0.0, 0.01);
  EXPECT_NEAR(m.var_x(), 1.0, 0.01);
}

TEST(RngStream, UniformMeanAndVariance) {
  RngStream rng(5, 2);
  PairMoments m;
  for (int i = 0; i < 400000; ++i) {
    const double u = rng.uniform();
    m.add(u, u);
  }
  EXPECT_NEAR(m.mean_x(), 0.5, 0.003);
  EXPECT_NEAR(m.var_x(), 1.0 / 12.0, 0.001);
}
