// SPDX-License-Identifier: Apache-2.0

#include "kprune/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "kprune/random.hpp"

namespace kprune {

namespace {

// Indices of the k largest scores within [begin, end), ties to the lower index.
void select_top(const Eigen::VectorXd& s, std::size_t begin, std::size_t end, std::size_t k,
                std::vector<std::uint8_t>& m) {
  if (k == 0) return;
  std::vector<std::size_t> order(end - begin);
  std::iota(order.begin(), order.end(), begin);
  const auto before = [&](std::size_t a, std::size_t b) {
    const double sa = s(static_cast<Eigen::Index>(a));
    const double sb = s(static_cast<Eigen::Index>(b));
    return sa != sb ? sa > sb : a < b;
  };
  if (k < order.size()) {
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                     before);
  }
  for (std::size_t i = 0; i < std::min(k, order.size()); ++i) m[order[i]] = 1;
}

void check_layer_map(const LayerMap& map, std::size_t n) {
  if (map.size() != n) throw Error(Errc::LengthMismatch, "layer map does not cover the scores");
}

}  // namespace

const char* to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::Gmp: return "gmp";
    case Strategy::Kmp: return "kmp";
    case Strategy::KmpLayer: return "kmp_layer";
    case Strategy::Kgp: return "kgp";
    case Strategy::Ggp: return "ggp";
    case Strategy::Jgp: return "jgp";
    case Strategy::Lsp: return "lsp";
    case Strategy::Random: return "random";
  }
  return "?";
}

Strategy parse_strategy(const std::string& s) {
  for (Strategy st : {Strategy::Gmp, Strategy::Kmp, Strategy::KmpLayer, Strategy::Kgp,
                      Strategy::Ggp, Strategy::Jgp, Strategy::Lsp, Strategy::Random}) {
    if (s == to_string(st)) return st;
  }
  throw Error(Errc::InvalidArgument, "unknown strategy '" + s + "'");
}

bool is_paper_strategy(Strategy s) noexcept { return s != Strategy::Random; }

ScoreVector::ScoreVector(Eigen::VectorXd s, Strategy st) : scores(std::move(s)), strategy(st) {
  if (!scores.allFinite()) throw Error(Errc::NonFinite, "scores must be finite");
  if (scores.size() > 0 && scores.minCoeff() < 0.0) {
    throw Error(Errc::InvalidArgument, "scores must be nonnegative");
  }
}

Compression::Compression(double c) : c_(c) {
  if (!(c >= 1.0) || !std::isfinite(c)) {
    throw Error(Errc::InvalidArgument, "compression must be a finite value >= 1");
  }
}

std::size_t Compression::keep_count(std::size_t n) const {
  if (n == 0) return 0;
  const auto k = static_cast<std::size_t>(std::ceil(static_cast<double>(n) / c_));
  return std::clamp<std::size_t>(k, 1, n);
}

std::size_t PruneMask::kept() const {
  return static_cast<std::size_t>(std::count(m.begin(), m.end(), std::uint8_t{1}));
}

std::vector<std::size_t> PruneMask::kept_per_layer() const {
  std::vector<std::size_t> counts(layer_map.num_layers(), 0);
  for (std::size_t l = 0; l < counts.size(); ++l) {
    for (std::size_t i = layer_map.layer_begin(l); i < layer_map.layer_end(l); ++i) counts[l] += m[i];
  }
  return counts;
}

std::vector<std::size_t> PruneMask::kept_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i]) out.push_back(i);
  }
  return out;
}

ScoreVector score_gmp(const Eigen::VectorXd& theta) {
  return ScoreVector(theta.cwiseAbs(), Strategy::Gmp);
}

ScoreVector score_kmp(const Eigen::VectorXd& fixed_point) {
  return ScoreVector(fixed_point.cwiseAbs(), Strategy::Kmp);
}

PruneMask score_kmp_layerwise(const Eigen::VectorXd& fixed_point, const LayerMap& layer_map,
                              const Compression& c) {
  PruneMask mask = layerwise_mask(score_kmp(fixed_point), c, layer_map);
  mask.strategy = Strategy::KmpLayer;
  return mask;
}

ScoreVector score_kgp(const std::vector<KoopmanTriplet>& decaying, const KgpOptions& options) {
  if (decaying.empty()) {
    throw Error(Errc::NoDecayingModes, "no real positive decaying mode above the norm floor");
  }
  const std::size_t use = std::clamp<std::size_t>(options.top_k, 1, decaying.size());
  Eigen::VectorXd s = decaying.front().scaled_mode.cwiseAbs();
  for (std::size_t i = 1; i < use; ++i) s = s.cwiseMax(decaying[i].scaled_mode.cwiseAbs());
  return ScoreVector(std::move(s), Strategy::Kgp);
}

ScoreVector score_ggp(const Eigen::VectorXd& theta, const Eigen::VectorXd& avg_grad) {
  if (theta.size() != avg_grad.size()) {
    throw Error(Errc::LengthMismatch, "gradient and parameter lengths differ");
  }
  return ScoreVector(avg_grad.cwiseProduct(theta).cwiseAbs(), Strategy::Ggp);
}

ScoreVector score_jgp(const Eigen::VectorXd& avg_grad) {
  return ScoreVector(avg_grad.cwiseAbs(), Strategy::Jgp);
}

PruneMask global_mask(const ScoreVector& scores, const Compression& c, const LayerMap& layer_map) {
  const std::size_t n = scores.size();
  check_layer_map(layer_map, n);
  PruneMask mask{std::vector<std::uint8_t>(n, 0), layer_map, c.value(), scores.strategy, 0};
  select_top(scores.scores, 0, n, c.keep_count(n), mask.m);
  return mask;
}

PruneMask layerwise_mask(const ScoreVector& scores, const Compression& c, const LayerMap& layer_map) {
  const std::size_t n = scores.size();
  check_layer_map(layer_map, n);
  PruneMask mask{std::vector<std::uint8_t>(n, 0), layer_map, c.value(), scores.strategy, 0};
  for (std::size_t l = 0; l < layer_map.num_layers(); ++l) {
    const std::size_t b = layer_map.layer_begin(l);
    const std::size_t e = layer_map.layer_end(l);
    select_top(scores.scores, b, e, c.keep_count(e - b), mask.m);
  }
  return mask;
}

PruneMask layer_shuffle_mask(const PruneMask& reference, std::uint64_t seed) {
  check_layer_map(reference.layer_map, reference.size());
  PruneMask out{std::vector<std::uint8_t>(reference.size(), 0), reference.layer_map,
                reference.compression, Strategy::Lsp, seed};
  const std::vector<std::size_t> counts = reference.kept_per_layer();
  auto rng = make_rng(seed, kStreamShuffleMask);
  for (std::size_t l = 0; l < counts.size(); ++l) {
    const std::size_t b = reference.layer_map.layer_begin(l);
    std::vector<std::size_t> pool(reference.layer_map.layer_end(l) - b);
    std::iota(pool.begin(), pool.end(), b);
    // Partial Fisher-Yates: the first counts[l] slots are a uniform sample.
    for (std::size_t i = 0; i < counts[l]; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(uniform_below(rng, pool.size() - i));
      std::swap(pool[i], pool[j]);
      out.m[pool[i]] = 1;
    }
  }
  return out;
}

PruneMask random_mask(const LayerMap& layer_map, const Compression& c, std::uint64_t seed) {
  const std::size_t n = layer_map.size();
  PruneMask out{std::vector<std::uint8_t>(n, 0), layer_map, c.value(), Strategy::Random, seed};
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  auto rng = make_rng(seed, kStreamRandomMask);
  const std::size_t k = c.keep_count(n);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_below(rng, n - i));
    std::swap(pool[i], pool[j]);
    out.m[pool[i]] = 1;
  }
  return out;
}

FlatParams apply_mask(const FlatParams& params, const PruneMask& mask) {
  if (mask.size() != params.size()) {
    throw Error(Errc::LengthMismatch, "mask length " + std::to_string(mask.size()) +
                                          " != parameter count " + std::to_string(params.size()));
  }
  FlatParams out = params;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask.m[i]) out.theta(static_cast<Eigen::Index>(i)) = 0.0;
  }
  return out;
}

double mask_overlap(const PruneMask& a, const PruneMask& b) {
  if (a.size() != b.size()) throw Error(Errc::LengthMismatch, "masks have different lengths");
  const std::size_t ka = a.kept();
  const std::size_t kb = b.kept();
  if (ka != kb) {
    throw Error(Errc::UnequalCompression, "kept counts differ (" + std::to_string(ka) + " vs " +
                                              std::to_string(kb) + ")");
  }
  if (ka == 0) throw Error(Errc::UnequalCompression, "overlap of empty masks is undefined");
  std::size_t both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) both += a.m[i] & b.m[i];
  return static_cast<double>(both) / static_cast<double>(ka);
}

void write_mask(std::ostream& out, const PruneMask& mask) {
  out << "# kprune mask\n";
  out << "N=" << mask.size() << '\n';
  out << "c=" << std::setprecision(17) << mask.compression << '\n';
  out << "strategy=" << to_string(mask.strategy) << '\n';
  out << "seed=" << mask.seed << '\n';
  out << "kept=" << mask.kept() << '\n';
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask.m[i]) out << i << '\n';
  }
}

PruneMask read_mask(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "# kprune mask") {
    throw Error(Errc::Io, "not a kprune mask file");
  }
  std::optional<std::size_t> n;
  std::optional<std::size_t> kept;
  PruneMask mask;
  std::vector<std::size_t> indices;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      std::size_t pos = 0;
      const unsigned long long v = std::stoull(line, &pos);
      if (pos != line.size()) throw Error(Errc::Io, "bad mask index line '" + line + "'");
      indices.push_back(static_cast<std::size_t>(v));
      continue;
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "N") n = std::stoull(value);
    else if (key == "c") mask.compression = std::stod(value);
    else if (key == "strategy") mask.strategy = parse_strategy(value);
    else if (key == "seed") mask.seed = std::stoull(value);
    else if (key == "kept") kept = std::stoull(value);
    else throw Error(Errc::Io, "unknown mask header key '" + key + "'");
  }
  if (!n) throw Error(Errc::Io, "mask file has no N header");
  mask.m.assign(*n, 0);
  mask.layer_map = LayerMap::single(*n);
  for (std::size_t i : indices) {
    if (i >= *n) throw Error(Errc::Io, "mask index out of range");
    mask.m[i] = 1;
  }
  if (kept && *kept != mask.kept()) throw Error(Errc::Io, "mask kept count does not match header");
  return mask;
}

void save_mask(const std::string& path, const PruneMask& mask) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path);
  write_mask(out, mask);
}

PruneMask load_mask(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  return read_mask(in);
}

}  // namespace kprune
