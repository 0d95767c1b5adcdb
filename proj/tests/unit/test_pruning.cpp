// SPDX-License-Identifier: Apache-2.0

#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "kprune/error.hpp"
#include "kprune/pruning.hpp"
#include "oracles.hpp"

using namespace kprune;

namespace {

PruneMask mask_from(std::vector<std::uint8_t> m) {
  PruneMask p;
  p.layer_map = LayerMap::single(m.size());
  p.m = std::move(m);
  return p;
}

const NetworkSpec kSpec = NetworkSpec::uniform({2, 32, 32, 4}, Activation::Tanh, Loss::CrossEntropy);

}  // namespace

TEST_CASE("keep count is ceil(N / c) clamped to [1, N]") {
  CHECK(Compression(1).keep_count(1284) == 1284);
  CHECK(Compression(4).keep_count(1284) == 321);
  CHECK(Compression(64).keep_count(1284) == 21);
  CHECK(Compression(3).keep_count(10) == 4);
  CHECK(Compression(1e9).keep_count(10) == 1);
  CHECK(Compression(1.5).keep_count(3) == 2);
  CHECK_THROWS_AS(Compression(0.5), Error);
}

TEST_CASE("strategy names round-trip") {
  for (Strategy s : {Strategy::Gmp, Strategy::Kmp, Strategy::KmpLayer, Strategy::Kgp,
                     Strategy::Ggp, Strategy::Jgp, Strategy::Lsp, Strategy::Random}) {
    CHECK(parse_strategy(to_string(s)) == s);
  }
  CHECK_FALSE(is_paper_strategy(Strategy::Random));
  CHECK(is_paper_strategy(Strategy::Lsp));
  CHECK_THROWS_AS(parse_strategy("magnitude"), Error);
}

TEST_CASE("score functions") {
  const Eigen::Vector3d theta(-2.0, 0.5, 0.0);
  const Eigen::Vector3d grad(0.1, -4.0, 3.0);
  CHECK(score_gmp(theta).scores == Eigen::Vector3d(2.0, 0.5, 0.0));
  CHECK(score_kmp(theta).strategy == Strategy::Kmp);
  CHECK(score_ggp(theta, grad).scores.isApprox(Eigen::Vector3d(0.2, 2.0, 0.0)));
  CHECK(score_jgp(grad).scores == Eigen::Vector3d(0.1, 4.0, 3.0));
  CHECK_THROWS_AS(ScoreVector(Eigen::Vector2d(1.0, -1.0), Strategy::Gmp), Error);
}

TEST_CASE("kgp uses the largest decaying mode, top-k combines by max") {
  KoopmanTriplet a, b;
  a.scaled_mode = Eigen::VectorXcd::Zero(3);
  a.scaled_mode << cdouble(3, 4), cdouble(0, 0), cdouble(1, 0);
  b.scaled_mode = Eigen::VectorXcd::Zero(3);
  b.scaled_mode << cdouble(0, 0), cdouble(0, 2), cdouble(2, 0);
  const ScoreVector one = score_kgp({a, b});
  CHECK(one.scores.isApprox(Eigen::Vector3d(5, 0, 1)));
  const ScoreVector two = score_kgp({a, b}, KgpOptions{2});
  CHECK(two.scores.isApprox(Eigen::Vector3d(5, 2, 2)));
  try {
    score_kgp({});
    FAIL("expected NoDecayingModes");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NoDecayingModes);
  }
}

TEST_CASE("global mask agrees with a stable-sort oracle") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng() % 300;
    Eigen::VectorXd s(static_cast<Eigen::Index>(n));
    // Few distinct values force many ties.
    for (auto& v : s) v = static_cast<double>(rng() % 7);
    for (double c : {1.0, 2.0, 3.0, 8.0, 64.0}) {
      const PruneMask m = global_mask(ScoreVector(s, Strategy::Gmp), Compression(c), LayerMap::single(n));
      CHECK(m.kept() == Compression(c).keep_count(n));
      CHECK(m.kept_indices() == oracle::stable_sort_top_k(s, m.kept()));
    }
  }
}

TEST_CASE("layerwise mask selects within each layer") {
  const LayerMap map(kSpec);
  Eigen::VectorXd theta = Eigen::VectorXd::LinSpaced(1284, -3.0, 5.0);
  const PruneMask m = score_kmp_layerwise(theta, map, Compression(4));
  CHECK(m.strategy == Strategy::KmpLayer);
  const auto per = m.kept_per_layer();
  REQUIRE(per.size() == 3);
  for (std::size_t l = 0; l < 3; ++l) {
    const std::size_t nl = map.layer_end(l) - map.layer_begin(l);
    CHECK(per[l] == Compression(4).keep_count(nl));
    const Eigen::VectorXd seg = theta.segment(static_cast<Eigen::Index>(map.layer_begin(l)),
                                              static_cast<Eigen::Index>(nl)).cwiseAbs();
    std::vector<std::size_t> expected = oracle::stable_sort_top_k(seg, per[l]);
    std::vector<std::size_t> got;
    for (std::size_t i = map.layer_begin(l); i < map.layer_end(l); ++i) {
      if (m.m[i]) got.push_back(i - map.layer_begin(l));
    }
    CHECK(got == expected);
  }
}

TEST_CASE("compression one keeps everything for every strategy") {
  const LayerMap map(kSpec);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(1284);
  const PruneMask g = global_mask(ScoreVector(s, Strategy::Gmp), Compression(1), map);
  CHECK(g.kept() == 1284);
  CHECK(layer_shuffle_mask(g, 3).kept() == 1284);
  CHECK(random_mask(map, Compression(1), 3).kept() == 1284);
  CHECK(layerwise_mask(ScoreVector(s, Strategy::Gmp), Compression(1), map).kept() == 1284);
}

TEST_CASE("layer shuffle keeps per-layer counts and is seeded") {
  const LayerMap map(kSpec);
  std::mt19937_64 rng(9);
  Eigen::VectorXd s(1284);
  for (auto& v : s) v = std::abs(std::normal_distribution<double>()(rng));
  const PruneMask ref = global_mask(ScoreVector(s, Strategy::Gmp), Compression(8), map);
  const PruneMask a = layer_shuffle_mask(ref, 1);
  CHECK(a.kept_per_layer() == ref.kept_per_layer());
  CHECK(a.strategy == Strategy::Lsp);
  CHECK(a.m == layer_shuffle_mask(ref, 1).m);
  CHECK(a.m != layer_shuffle_mask(ref, 2).m);
}

TEST_CASE("layer shuffle overlap follows the hypergeometric mean") {
  // Uniform k-of-n selection within a layer overlaps a fixed k-subset in
  // k^2 / n positions on average.
  const std::size_t n = 200, k = 50;
  PruneMask ref = mask_from(std::vector<std::uint8_t>(n, 0));
  for (std::size_t i = 0; i < k; ++i) ref.m[i] = 1;
  double total = 0;
  const int trials = 2000;
  for (int t = 0; t < trials; ++t) total += mask_overlap(ref, layer_shuffle_mask(ref, static_cast<std::uint64_t>(t)));
  const double mean = total / trials;
  const double expected = double(k) / double(n);
  // Per-trial variance of the overlap fraction is below 0.005 here.
  CHECK(std::abs(mean - expected) <= 4.0 * std::sqrt(0.005 / trials));
}

TEST_CASE("random mask keeps the target count") {
  const LayerMap map(kSpec);
  const PruneMask m = random_mask(map, Compression(16), 5);
  CHECK(m.kept() == 81);
  CHECK(m.m == random_mask(map, Compression(16), 5).m);
}

TEST_CASE("overlap metric") {
  const PruneMask a = mask_from({1, 1, 0, 0});
  const PruneMask b = mask_from({0, 1, 1, 0});
  CHECK(mask_overlap(a, a) == 1.0);
  CHECK(mask_overlap(a, b) == 0.5);
  CHECK(mask_overlap(a, mask_from({0, 0, 1, 1})) == 0.0);
  try {
    mask_overlap(a, mask_from({1, 0, 0, 0}));
    FAIL("expected UnequalCompression");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnequalCompression);
  }
  try {
    mask_overlap(a, mask_from({1, 1, 0}));
    FAIL("expected LengthMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::LengthMismatch);
  }
}

TEST_CASE("apply_mask zeroes pruned coordinates") {
  FlatParams p;
  p.theta = Eigen::Vector4d(1, 2, 3, 4);
  p.layer_map = LayerMap::single(4);
  const FlatParams q = apply_mask(p, mask_from({1, 0, 1, 0}));
  CHECK(q.theta == Eigen::Vector4d(1, 0, 3, 0));
  CHECK_THROWS_AS(apply_mask(p, mask_from({1, 0})), Error);
}

TEST_CASE("mask text format round-trips") {
  PruneMask m = mask_from({0, 1, 1, 0, 1});
  m.compression = 2;
  m.strategy = Strategy::Kgp;
  m.seed = 12;
  std::stringstream ss;
  write_mask(ss, m);
  const PruneMask back = read_mask(ss);
  CHECK(back.m == m.m);
  CHECK(back.compression == 2);
  CHECK(back.strategy == Strategy::Kgp);
  CHECK(back.seed == 12);

  std::stringstream bad("# kprune mask\nN=3\nc=1\nstrategy=gmp\nseed=0\nkept=2\n0\n7\n");
  CHECK_THROWS_AS(read_mask(bad), Error);
}

TEST_CASE("planted theta* + 0.9^t d: KMP mask equals GMP at the analytic theta*, KGP on supp d") {
  const int n = 30, tau = 12;
  Eigen::VectorXd star(n), d = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) star(i) = std::sin(0.7 * i + 0.3) * (1.0 + 0.1 * i);
  d(0) = 3.0;
  d(1) = -2.0;
  Eigen::MatrixXd D(n, tau + 1);
  for (int t = 0; t <= tau; ++t) D.col(t) = star + std::pow(0.9, t) * d;
  const auto decomp = decompose(SnapshotMatrix(DenseMatrix(D)));
  const Eigen::VectorXd fp = predicted_fixed_point(decomp).theta;
  const LayerMap map = LayerMap::single(n);
  for (double c : {2.0, 4.0, 8.0}) {
    CHECK(global_mask(score_kmp(fp), Compression(c), map).m ==
          global_mask(score_gmp(star), Compression(c), map).m);
  }
  const ScoreVector kgp = score_kgp(decaying_modes(decomp));
  CHECK(kgp.scores(0) > 1.0);
  CHECK(kgp.scores(1) > 1.0);
  CHECK(kgp.scores.tail(n - 2).maxCoeff() <= 1e-8);
}

TEST_CASE("constant trajectory: KMP and GMP masks coincide, KGP is inapplicable") {
  const Eigen::VectorXd c = Eigen::VectorXd::LinSpaced(40, -2.0, 1.5);
  const auto decomp = decompose(SnapshotMatrix(DenseMatrix(Eigen::MatrixXd(c.replicate(1, 6)))));
  const Eigen::VectorXd fp = predicted_fixed_point(decomp).theta;
  for (double k : {1.0, 2.0, 3.0, 16.0}) {
    CHECK(global_mask(score_kmp(fp), Compression(k), LayerMap::single(40)).m ==
          global_mask(score_gmp(c), Compression(k), LayerMap::single(40)).m);
  }
  CHECK_THROWS_AS(score_kgp(decaying_modes(decomp)), Error);
}

TEST_CASE("global mask is invariant under increasing transforms of the scores") {
  std::mt19937_64 rng(15);
  Eigen::VectorXd s(200);
  for (auto& v : s) v = std::abs(std::normal_distribution<double>()(rng));
  const Eigen::VectorXd t = (s.array().sqrt() * 3.0 + 1.0).matrix();
  for (double c : {2.0, 5.0, 32.0}) {
    CHECK(global_mask(ScoreVector(s, Strategy::Gmp), Compression(c), LayerMap::single(200)).m ==
          global_mask(ScoreVector(t, Strategy::Gmp), Compression(c), LayerMap::single(200)).m);
  }
}
