// SPDX-License-Identifier: Apache-2.0
//
// Scoring strategies, mask construction at a target compression, and the
// mask overlap metric.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kprune/koopman.hpp"
#include "kprune/trainer.hpp"

namespace kprune {

enum class Strategy { Gmp, Kmp, KmpLayer, Kgp, Ggp, Jgp, Lsp, Random };

const char* to_string(Strategy s) noexcept;
Strategy parse_strategy(const std::string& s);
/// False for baselines that are not part of the Koopman pruning family
/// comparisons (currently only Random).
bool is_paper_strategy(Strategy s) noexcept;

struct ScoreVector {
  Eigen::VectorXd scores;  // nonnegative, finite
  Strategy strategy = Strategy::Gmp;

  ScoreVector() = default;
  ScoreVector(Eigen::VectorXd s, Strategy strategy);
  std::size_t size() const noexcept { return static_cast<std::size_t>(scores.size()); }
};

/// Compression factor c >= 1; keeps ceil(N / c) of N parameters.
class Compression {
 public:
  explicit Compression(double c);
  double value() const noexcept { return c_; }
  std::size_t keep_count(std::size_t n) const;

 private:
  double c_;
};

struct PruneMask {
  std::vector<std::uint8_t> m;
  LayerMap layer_map;
  double compression = 1.0;
  Strategy strategy = Strategy::Gmp;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return m.size(); }
  std::size_t kept() const;
  std::vector<std::size_t> kept_per_layer() const;
  std::vector<std::size_t> kept_indices() const;
};

ScoreVector score_gmp(const Eigen::VectorXd& theta);
inline ScoreVector score_gmp(const FlatParams& params) { return score_gmp(params.theta); }
ScoreVector score_kmp(const Eigen::VectorXd& fixed_point);
PruneMask score_kmp_layerwise(const Eigen::VectorXd& fixed_point, const LayerMap& layer_map,
                              const Compression& c);

struct KgpOptions {
  std::size_t top_k = 1;  // modes combined by elementwise max
};

/// Throws Error{NoDecayingModes} on an empty list.
ScoreVector score_kgp(const std::vector<KoopmanTriplet>& decaying, const KgpOptions& options = {});
ScoreVector score_ggp(const Eigen::VectorXd& theta, const Eigen::VectorXd& avg_grad);
ScoreVector score_jgp(const Eigen::VectorXd& avg_grad);

/// Keeps the ceil(N/c) highest scores; ties at the threshold go to the lower
/// index.
PruneMask global_mask(const ScoreVector& scores, const Compression& c, const LayerMap& layer_map);

/// Per-layer top-ceil(N_l / c) selection, same tie rule.
PruneMask layerwise_mask(const ScoreVector& scores, const Compression& c, const LayerMap& layer_map);

/// Keeps the reference's per-layer counts, choosing kept indices uniformly
/// without replacement. Deterministic in seed.
PruneMask layer_shuffle_mask(const PruneMask& reference, std::uint64_t seed);

/// Uniform global mask keeping ceil(N/c).
PruneMask random_mask(const LayerMap& layer_map, const Compression& c, std::uint64_t seed);

FlatParams apply_mask(const FlatParams& params, const PruneMask& mask);

/// sum_i a_i b_i / kept. Throws Error{UnequalCompression} when the kept
/// counts differ and Error{LengthMismatch} when the lengths do.
double mask_overlap(const PruneMask& a, const PruneMask& b);

/// Text mask format: "# kprune mask", key=value header lines (N, c,
/// strategy, seed, kept), then one kept index per line.
void write_mask(std::ostream& out, const PruneMask& mask);
PruneMask read_mask(std::istream& in);
void save_mask(const std::string& path, const PruneMask& mask);
PruneMask load_mask(const std::string& path);

}  // namespace kprune
