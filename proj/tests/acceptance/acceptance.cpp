// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "kprune/data.hpp"
#include "kprune/error.hpp"
#include "kprune/io.hpp"
#include "kprune/koopman.hpp"
#include "kprune/pruning.hpp"
#include "kprune/random.hpp"
#include "kprune/runner.hpp"
#include "oracles.hpp"

using namespace kprune;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Shared default experiment, run once for criteria 4, 5, 8 and 9.
struct DefaultRun {
  ExperimentConfig config;
  ExperimentResult result;
  double seconds = 0.0;
};

const DefaultRun& default_run() {
  static const DefaultRun run = [] {
    DefaultRun r;
    const auto t0 = Clock::now();
    r.result = run_experiment(r.config);
    r.seconds = seconds_since(t0);
    return r;
  }();
  return run;
}

const RunRecord* find_record(const ExperimentResult& res, std::uint64_t seed, std::size_t epoch,
                             Strategy s, double c) {
  for (const RunRecord& r : res.records) {
    if (r.seed == seed && r.epoch == epoch && r.strategy == s && r.compression == c) return &r;
  }
  return nullptr;
}

Outcome criterion_1() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  double worst_lambda = 0.0, worst_fp = 0.0;
  int failures = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 4 + static_cast<int>(rng() % 61);
    const int max_blocks = std::min(4, (n - 1) / 2);
    const int blocks = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_blocks));
    const int tau = 2 * n + static_cast<int>(rng() % 8);
    const auto sys = oracle::planted_system(rng(), n, blocks, tau);
    try {
      const auto decomp = decompose(SnapshotMatrix(DenseMatrix(sys.trajectory)));
      std::vector<cdouble> expected = sys.excited;
      expected.push_back(1.0);
      for (const cdouble& l : expected) {
        double best = 1e300;
        for (const auto& t : decomp.triplets) best = std::min(best, std::abs(t.lambda - l));
        worst_lambda = std::max(worst_lambda, best);
      }
      const FixedPoint fp = predicted_fixed_point(decomp);
      worst_fp = std::max(worst_fp, (fp.theta - sys.fixed_point).norm());
    } catch (const Error& e) {
      ++failures;
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = failures == 0 && worst_lambda <= 1e-6 && worst_fp <= 1e-6 && secs < 10.0;
  o.detail = "max |dlambda| " + fmt("%.2e", worst_lambda) + ", max |dtheta*| " +
             fmt("%.2e", worst_fp) + ", errors " + std::to_string(failures) + ", " +
             fmt("%.2f", secs) + " s";
  return o;
}

Outcome criterion_2() {
  std::mt19937_64 rng(77);
  double worst = 0.0, worst_consistency = 0.0;
  int cases = 0;
  // Planted affine systems (tau >= N) and low-rank dynamics in a tall space.
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 6 + static_cast<int>(rng() % 40);
    const auto sys = oracle::planted_system(rng(), n, std::min(3, (n - 1) / 2), 2 * n);
    const auto decomp = decompose(SnapshotMatrix(DenseMatrix(sys.trajectory)));
    worst_consistency = std::max(worst_consistency, decomp.consistency_residual);
    for (Eigen::Index t = 0; t < sys.trajectory.cols(); ++t) {
      const Eigen::VectorXd col = sys.trajectory.col(t);
      worst = std::max(worst, (extrapolate(decomp, static_cast<double>(t)) - col).norm() / col.norm());
    }
    ++cases;
  }
  for (int trial = 0; trial < 10; ++trial) {
    const int big = 300 + static_cast<int>(rng() % 700);
    const auto sys = oracle::planted_system(rng(), 9, 3, 30);
    const Eigen::MatrixXd lift = Eigen::MatrixXd::Random(big, 9);
    const Eigen::MatrixXd D = lift * sys.trajectory;  // linear image of an affine system
    const auto decomp = decompose(SnapshotMatrix(DenseMatrix(D)));
    worst_consistency = std::max(worst_consistency, decomp.consistency_residual);
    for (Eigen::Index t = 0; t < D.cols(); ++t) {
      const Eigen::VectorXd col = D.col(t);
      worst = std::max(worst, (extrapolate(decomp, static_cast<double>(t)) - col).norm() / col.norm());
    }
    ++cases;
  }
  Outcome o;
  o.pass = worst <= 1e-6 && worst_consistency <= 1e-8;
  o.detail = std::to_string(cases) + " trajectories, max relative snapshot error " +
             fmt("%.2e", worst) + ", max consistency residual " + fmt("%.2e", worst_consistency);
  return o;
}

Outcome criterion_3() {
  std::mt19937_64 rng(303);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> sizes{1 + rng() % 4};
    const std::size_t hidden = 1 + rng() % 2;
    for (std::size_t h = 0; h < hidden; ++h) sizes.push_back(2 + rng() % 5);
    const std::size_t out = 2 + rng() % 3;
    sizes.push_back(out);
    const Activation act = std::array{Activation::Tanh, Activation::Relu, Activation::Identity}[trial % 3];
    const Loss loss = trial % 2 ? Loss::Mse : Loss::CrossEntropy;
    const NetworkSpec spec = NetworkSpec::uniform(sizes, act, loss);
    FlatParams p = init_params(spec, static_cast<std::uint64_t>(trial));
    for (Eigen::Index i = 0; i < p.theta.size(); ++i) p.theta(i) += 0.1 * oracle::urand(rng, -1, 1);
    const Dataset data = oracle::random_dataset(rng, 4 + rng() % 5, sizes.front(), out);
    const Eigen::VectorXd g = backward(spec, p, forward(spec, p, data.inputs), data.labels, data.targets);
    const Eigen::VectorXd fd = oracle::finite_difference_gradient(spec, p.theta, data);
    worst = std::max(worst, oracle::max_relative_error(g, fd));
  }
  Outcome o;
  o.pass = worst <= 1e-4;
  o.detail = "20 nets, max relative error " + fmt("%.2e", worst);
  return o;
}

Outcome criterion_4() {
  const DefaultRun& run = default_run();
  const std::size_t epoch = 50;
  double min_overlap = 1.0, max_gap = 0.0;
  int missing = 0;
  for (std::uint64_t seed : run.config.seeds) {
    for (double c : {2.0, 4.0, 8.0, 16.0}) {
      const auto k = run.result.masks.find(MaskKey{Strategy::Kmp, epoch, seed, c});
      const auto g = run.result.masks.find(MaskKey{Strategy::Gmp, epoch, seed, c});
      const RunRecord* rk = find_record(run.result, seed, epoch, Strategy::Kmp, c);
      const RunRecord* rg = find_record(run.result, seed, epoch, Strategy::Gmp, c);
      if (k == run.result.masks.end() || g == run.result.masks.end() || !rk || !rg ||
          !rk->accuracy_refined || !rg->accuracy_refined) {
        ++missing;
        continue;
      }
      min_overlap = std::min(min_overlap, mask_overlap(k->second, g->second));
      max_gap = std::max(max_gap, std::abs(*rk->accuracy_refined - *rg->accuracy_refined));
    }
  }
  Outcome o;
  o.pass = missing == 0 && min_overlap >= 0.95 && max_gap <= 0.01 && run.seconds < 300.0;
  o.detail = "min overlap " + fmt("%.4f", min_overlap) + ", max refined accuracy gap " +
             fmt("%.4f", max_gap) + ", missing " + std::to_string(missing) + ", full run " +
             fmt("%.1f", run.seconds) + " s";
  return o;
}

Outcome criterion_5() {
  const DefaultRun& run = default_run();
  const std::size_t n = run.config.network.num_params();
  int ok = 0, bad = 0, inapplicable = 0;
  for (const RunRecord& r : run.result.records) {
    if (r.compression != 1.0) continue;
    if (!r.ok()) {
      // A strategy whose scores do not exist this epoch yields no mask.
      if (r.status == "NoDecayingModes" || r.status == "NoUnitEigenvalue") ++inapplicable;
      else ++bad;
      continue;
    }
    const auto m = run.result.masks.find(MaskKey{r.strategy, r.epoch, r.seed, 1.0});
    const bool all_ones = m != run.result.masks.end() && m->second.kept() == n;
    if (all_ones && r.kept == n && r.accuracy_pruned == r.accuracy_unpruned) ++ok;
    else ++bad;
  }
  Outcome o;
  o.pass = bad == 0 && ok > 0;
  o.detail = std::to_string(ok) + " masks all-ones with identical accuracy, " +
             std::to_string(bad) + " violations, " + std::to_string(inapplicable) +
             " records without scores";
  return o;
}

Outcome criterion_6() {
  std::mt19937_64 rng(606);
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::size_t> sizes{1 + rng() % 6};
    const std::size_t layers = 1 + rng() % 4;
    for (std::size_t l = 0; l < layers; ++l) sizes.push_back(1 + rng() % 12);
    const NetworkSpec spec = NetworkSpec::uniform(sizes, Activation::Relu, Loss::Mse);
    const LayerMap map(spec);
    Eigen::VectorXd s(static_cast<Eigen::Index>(map.size()));
    for (auto& v : s) v = std::abs(oracle::urand(rng, -1, 1)) * std::pow(10.0, double(rng() % 4));
    const double c = std::array{1.0, 1.5, 2.0, 3.0, 8.0, 64.0}[rng() % 6];
    const PruneMask ref = trial % 2 ? global_mask(ScoreVector(s, Strategy::Gmp), Compression(c), map)
                                    : layerwise_mask(ScoreVector(s, Strategy::Gmp), Compression(c), map);
    const PruneMask shuffled = layer_shuffle_mask(ref, rng());
    // Independent per-layer count of both masks.
    for (std::size_t l = 0; l < map.num_layers(); ++l) {
      std::size_t a = 0, b = 0;
      for (std::size_t i = map.layer_begin(l); i < map.layer_end(l); ++i) {
        a += ref.m[i];
        b += shuffled.m[i];
      }
      if (a != b) ++mismatches;
    }
  }
  Outcome o;
  o.pass = mismatches == 0;
  o.detail = "100 trials, " + std::to_string(mismatches) + " per-layer count mismatches";
  return o;
}

Outcome criterion_7() {
  long long pairs = 0, violations = 0;
  for (std::size_t n = 1; n <= 12; ++n) {
    for (std::size_t k = 1; k <= n; ++k) {
      std::vector<PruneMask> masks;
      for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
        if (static_cast<std::size_t>(std::popcount(bits)) != k) continue;
        PruneMask m;
        m.layer_map = LayerMap::single(n);
        for (std::size_t i = 0; i < n; ++i) m.m.push_back((bits >> i) & 1u);
        masks.push_back(std::move(m));
      }
      for (std::size_t i = 0; i < masks.size(); ++i) {
        for (std::size_t j = 0; j < masks.size(); ++j) {
          std::size_t common = 0;
          for (std::size_t t = 0; t < n; ++t) common += masks[i].m[t] & masks[j].m[t];
          const double expected = static_cast<double>(common) / static_cast<double>(k);
          const double o = mask_overlap(masks[i], masks[j]);
          const bool ok = o == expected && o == mask_overlap(masks[j], masks[i]) && o >= 0.0 &&
                          o <= 1.0 && (i != j || o == 1.0) && (common != 0 || o == 0.0);
          violations += !ok;
          ++pairs;
        }
      }
    }
  }
  Outcome o;
  o.pass = violations == 0;
  o.detail = std::to_string(pairs) + " ordered pairs, " + std::to_string(violations) + " violations";
  return o;
}

Outcome criterion_8() {
  const DefaultRun& run = default_run();
  const std::vector<SummaryRow> summary = summarize(run.result.records);
  const auto row = [&](Strategy s, double c) -> const SummaryRow* {
    for (const SummaryRow& r : summary) {
      if (r.epoch == 20 && r.strategy == s && r.compression == c) return &r;
    }
    return nullptr;
  };
  const std::size_t seeds = run.config.seeds.size();
  bool pass = true;
  std::string detail;
  for (double c : {1.0, 2.0, 4.0, 8.0, 16.0}) {
    const SummaryRow* k = row(Strategy::Kgp, c);
    const SummaryRow* j = row(Strategy::Jgp, c);
    if (!k || !j || k->n != seeds || j->n != seeds || k->n_refined != seeds || j->n_refined != seeds) {
      pass = false;
      detail += " c=" + fmt("%g", c) + ":missing";
      continue;
    }
    const double gp = std::abs(k->mean_pruned - j->mean_pruned);
    const double bp = k->std_pruned + j->std_pruned;
    const double gr = std::abs(k->mean_refined - j->mean_refined);
    const double br = k->std_refined + j->std_refined;
    const bool ok = gp <= bp && gr <= br;
    pass = pass && ok;
    detail += " c=" + fmt("%g", c) + " pruned " + fmt("%.3f", gp) + "/" + fmt("%.3f", bp) +
              " refined " + fmt("%.3f", gr) + "/" + fmt("%.3f", br) + (ok ? "" : " (out)");
  }
  Outcome o;
  o.pass = pass;
  o.detail = "|mean gap|/band:" + detail;
  return o;
}

Outcome criterion_9() {
  const DefaultRun& run = default_run();
  bool pass = true;
  std::string detail;
  int seen = 0;
  for (const EpochDiagnostics& d : run.result.diagnostics) {
    if (d.epoch != run.config.train.epochs) continue;
    ++seen;
    int unit = 0;
    double outside = 0.0;
    for (const SpectrumRow& r : d.spectrum) {
      const cdouble l(r.re_lambda, r.im_lambda);
      if (std::abs(l - 1.0) <= 1e-2) ++unit;
      else outside = std::max(outside, std::abs(l));
    }
    const bool ok = d.status == "ok" && unit == 1 && outside < 1.0 + 1e-6;
    pass = pass && ok;
    detail += " seed " + std::to_string(d.seed) + ": " + std::to_string(unit) +
              " near 1, max other |lambda| " + fmt("%.4f", outside) + ";";
  }
  Outcome o;
  o.pass = pass && seen > 0;
  o.detail = "epoch " + std::to_string(run.config.train.epochs) + ":" + detail;
  return o;
}

std::map<std::string, std::string> read_csvs(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".csv") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[entry.path().filename().string()] = ss.str();
  }
  return out;
}

Outcome criterion_10() {
  const auto t0 = Clock::now();
  const fs::path base = fs::temp_directory_path() / "kprune_acceptance";
  fs::remove_all(base);
  std::vector<std::map<std::string, std::string>> outputs;
  for (const char* name : {"a", "b"}) {
    ExperimentConfig cfg;
    cfg.out_dir = base / name;
    write_outputs(run_experiment(cfg), cfg, cfg.out_dir);
    outputs.push_back(read_csvs(cfg.out_dir));
  }
  const double secs = seconds_since(t0);
  fs::remove_all(base);
  Outcome o;
  o.pass = !outputs[0].empty() && outputs[0] == outputs[1] && secs < 900.0;
  o.detail = std::to_string(outputs[0].size()) + " CSV files, " +
             (outputs[0] == outputs[1] ? "byte-identical" : "DIFFERENT") + ", two runs " +
             fmt("%.1f", secs) + " s";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"DMD oracle equivalence on planted affine systems", criterion_1},
      {"reconstruction of linearly consistent snapshots", criterion_2},
      {"backward vs central finite differences", criterion_3},
      {"KMP/GMP equivalence at convergence", criterion_4},
      {"trivial compression identity", criterion_5},
      {"LSP per-layer structure preservation", criterion_6},
      {"overlap metric properties, exhaustive N <= 12", criterion_7},
      {"KGP vs JGP within joint std band at epoch 20", criterion_8},
      {"spectrum shape of a converged run", criterion_9},
      {"determinism of the default experiment", criterion_10},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::printf("criterion %zu: %s - %s (%s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
