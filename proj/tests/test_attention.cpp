#include <gtest/gtest.h>

#include <random>

#include "safelabel/attention.hpp"

using namespace safelabel;
using namespace safelabel::attention;

namespace {

FeatureCube random_cube(std::mt19937& rng, std::size_t c, std::size_t h, std::size_t w) {
  std::normal_distribution<double> n(0.0, 1.0);
  FeatureCube cube(c, h, w);
  for (auto& v : cube.values) v = n(rng);
  return cube;
}

RealLayer random_layer(std::mt19937& rng, std::size_t h, std::size_t w) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RealLayer l{w, h, std::vector<double>(w * h)};
  for (auto& v : l.values) v = u(rng);
  return l;
}

RealLayer constant_layer(std::size_t h, std::size_t w, double v) { return RealLayer{w, h, std::vector<double>(w * h, v)}; }

// Per-element evaluation written from the definition, one output at a time.
double oracle(const FeatureCube& cube, const SemanticLayerSet& l, const AttentionWeights& w, std::size_t c,
              std::size_t y, std::size_t x) {
  const double z = cube.at(c, y, x);
  return w.pedestrian * l.pedestrian.at(y, x) * z + w.crossing * l.crossing.at(y, x) * z +
         w.vehicle * l.vehicle.at(y, x) * z + z;
}

double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

}  // namespace

TEST(LayerAttention, ZeroLayerZeroesCube) {
  std::mt19937 rng(1);
  const auto cube = random_cube(rng, 3, 4, 5);
  const auto out = apply_layer_attention(cube, constant_layer(4, 5, 0.0), 0.8);
  for (double v : out.values) EXPECT_EQ(v, 0.0);
}

TEST(LayerAttention, OnesLayerUnitWeightIsIdentity) {
  std::mt19937 rng(2);
  const auto cube = random_cube(rng, 3, 4, 5);
  EXPECT_EQ(apply_layer_attention(cube, constant_layer(4, 5, 1.0), 1.0), cube);
}

TEST(LayerAttention, HandExample) {
  const FeatureCube cube(1, 2, 2, {1, 2, 3, 4});
  const RealLayer layer{2, 2, {1, 0, 0, 1}};
  EXPECT_EQ(apply_layer_attention(cube, layer, 0.5).values, (std::vector<double>{0.5, 0, 0, 2}));
}

TEST(LayerAttention, GeometryMismatchThrows) {
  const FeatureCube cube(1, 2, 2, 1.0);
  EXPECT_THROW(apply_layer_attention(cube, constant_layer(3, 2, 1.0), 1.0), DimensionMismatch);
}

TEST(Fuse, EmptyIsIdentity) {
  const FeatureCube cube(2, 2, 2, {1, 2, 3, 4, 5, 6, 7, 8});
  EXPECT_EQ(fuse(cube, {}), cube);
}

TEST(Fuse, SelfDoubles) {
  const FeatureCube cube(1, 2, 2, {1, -2, 3, 0.5});
  const FeatureCube parts[] = {cube};
  EXPECT_EQ(fuse(cube, parts).values, (std::vector<double>{2, -4, 6, 1}));
}

TEST(Fuse, HandTable) {
  const FeatureCube cube(1, 2, 2, {1, 1, 1, 1});
  const FeatureCube parts[] = {FeatureCube(1, 2, 2, {1, 2, 3, 4}), FeatureCube(1, 2, 2, {0, 0.5, 0, -1}),
                               FeatureCube(1, 2, 2, {10, 0, 0, 0})};
  EXPECT_EQ(fuse(cube, parts).values, (std::vector<double>{12, 3.5, 4, 4}));
}

TEST(Fuse, GeometryMismatchThrows) {
  const FeatureCube cube(1, 2, 2, 1.0);
  const FeatureCube parts[] = {FeatureCube(2, 2, 2, 1.0)};
  EXPECT_THROW(fuse(cube, parts), DimensionMismatch);
}

TEST(SpatialAttention, ZeroLayersGiveInputBitForBit) {
  std::mt19937 rng(3);
  const auto cube = random_cube(rng, 2, 8, 8);
  const SemanticLayerSet zero{constant_layer(8, 8, 0), constant_layer(8, 8, 0), constant_layer(8, 8, 0)};
  EXPECT_EQ(spatial_attention(cube, zero, {}), cube);
}

TEST(SpatialAttention, OnesLayersScaleByThreePointTwoFive) {
  std::mt19937 rng(4);
  const auto cube = random_cube(rng, 2, 8, 8);
  const SemanticLayerSet ones{constant_layer(8, 8, 1), constant_layer(8, 8, 1), constant_layer(8, 8, 1)};
  const auto out = spatial_attention(cube, ones, {});
  for (std::size_t i = 0; i < cube.values.size(); ++i) EXPECT_LE(rel_err(out.values[i], 3.25 * cube.values[i]), 1e-12);
}

TEST(SpatialAttention, MaskedRegionBoost) {
  std::mt19937 rng(5);
  const auto cube = random_cube(rng, 2, 4, 4);
  RealLayer ped = constant_layer(4, 4, 0);
  ped.values[5] = 1.0;
  const SemanticLayerSet l{ped, constant_layer(4, 4, 0), constant_layer(4, 4, 0)};
  const auto out = spatial_attention(cube, l, {});
  for (std::size_t c = 0; c < 2; ++c) {
    EXPECT_DOUBLE_EQ(out.at(c, 1, 1), 2.0 * cube.at(c, 1, 1));
    EXPECT_EQ(out.at(c, 0, 0), cube.at(c, 0, 0));
  }
}

TEST(SpatialAttention, MatchesElementwiseOracle) {
  std::mt19937 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t c = 1 + rng() % 3, h = 1 + rng() % 6, w = 1 + rng() % 6;
    const auto cube = random_cube(rng, c, h, w);
    const SemanticLayerSet l{random_layer(rng, h, w), random_layer(rng, h, w), random_layer(rng, h, w)};
    const AttentionWeights wt{1.0, 0.75, 0.5};
    const auto out = spatial_attention(cube, l, wt);
    for (std::size_t k = 0; k < c; ++k) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) EXPECT_LE(rel_err(out.at(k, y, x), oracle(cube, l, wt, k, y, x)), 1e-12);
      }
    }
  }
}

TEST(SpatialAttention, LinearInTheCube) {
  std::mt19937 rng(7);
  const auto a = random_cube(rng, 2, 8, 8);
  const auto b = random_cube(rng, 2, 8, 8);
  const SemanticLayerSet l{random_layer(rng, 8, 8), random_layer(rng, 8, 8), random_layer(rng, 8, 8)};
  const double alpha = 0.7, beta = -1.3;
  FeatureCube mix(2, 8, 8);
  for (std::size_t i = 0; i < mix.values.size(); ++i) mix.values[i] = alpha * a.values[i] + beta * b.values[i];
  const auto lhs = spatial_attention(mix, l, {});
  const auto ra = spatial_attention(a, l, {});
  const auto rb = spatial_attention(b, l, {});
  for (std::size_t i = 0; i < mix.values.size(); ++i) {
    const double rhs = alpha * ra.values[i] + beta * rb.values[i];
    EXPECT_NEAR(lhs.values[i], rhs, 1e-12 * std::max(1.0, std::abs(rhs)));
  }
}

TEST(SpatialAttention, BoundedByTotalWeight) {
  std::mt19937 rng(8);
  const auto cube = random_cube(rng, 3, 8, 8);
  const SemanticLayerSet l{random_layer(rng, 8, 8), random_layer(rng, 8, 8), random_layer(rng, 8, 8)};
  double max_in = 0.0;
  for (double v : cube.values) max_in = std::max(max_in, std::abs(v));
  for (double v : spatial_attention(cube, l, {}).values) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_LE(std::abs(v), 3.25 * max_in + 1e-12);
  }
}

TEST(SpatialAttention, LayersFromSemanticMap) {
  semantics::SemanticMap map(8, 8, semantics::ClassId::Road);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 4; ++c) map.set(r, c, semantics::ClassId::Pedestrian);
  }
  const auto layers = make_layer_set(map, 2, 2);
  EXPECT_EQ(layers.pedestrian.values, (std::vector<double>{1, 0, 0, 0}));
  for (double v : layers.crossing.values) EXPECT_EQ(v, 0.0);
}
