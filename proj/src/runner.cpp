// SPDX-License-Identifier: Apache-2.0

#include "kprune/runner.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <thread>

#include "kprune/io.hpp"
#include "kprune/random.hpp"

namespace kprune {

namespace {

struct SeedOutput {
  std::vector<RunRecord> records;
  std::vector<EpochDiagnostics> diagnostics;
  std::map<MaskKey, PruneMask> masks;
  double seconds = 0.0;
};

std::uint64_t mask_seed(std::uint64_t seed, std::size_t epoch, double c) {
  return splitmix64(splitmix64(seed ^ splitmix64(epoch)) ^ std::bit_cast<std::uint64_t>(c));
}

std::vector<Strategy> sorted_unique(std::vector<Strategy> s) {
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

std::vector<double> sorted_unique(std::vector<double> c) {
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return c;
}

// Scores (or the failure that prevents them) for one epoch of one seed.
struct EpochScores {
  std::optional<ScoreVector> gmp, kmp, kgp, ggp, jgp;
  std::optional<Eigen::VectorXd> fixed_point;
  std::optional<Error> koopman_error;  // decomposition or fixed point failed
  std::optional<Error> kgp_error;
};

class SeedRunner {
 public:
  SeedRunner(const ExperimentConfig& cfg, const Dataset& train, const Dataset& test,
             std::uint64_t seed)
      : cfg_(cfg),
        train_(train),
        test_(test),
        seed_(seed),
        ordering_(train.size(), cfg.train.batch_size, seed),
        strategies_(sorted_unique(cfg.strategies)),
        compressions_(sorted_unique(cfg.compressions)) {
    std::vector<std::size_t> first(std::min(cfg.score_batch, train.size()));
    std::iota(first.begin(), first.end(), std::size_t{0});
    score_batch_ = gather(train, first);
  }

  SeedOutput run() {
    const auto start = std::chrono::steady_clock::now();
    const std::set<std::size_t> snapshot(cfg_.train.snapshot_epochs.begin(),
                                         cfg_.train.snapshot_epochs.end());
    FlatParams params = init_params(cfg_.network, seed_);
    for (std::size_t epoch = 1; epoch <= cfg_.train.epochs; ++epoch) {
      TrainEpochResult res = train_epoch(cfg_.network, params, train_, ordering_, epoch, cfg_.train.lr);
      if (snapshot.count(epoch)) process_epoch(res, epoch);
      params = std::move(res.params);
    }
    out_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return std::move(out_);
  }

 private:
  EpochScores score_epoch(const TrainEpochResult& res, EpochDiagnostics& diag) {
    EpochScores sc;
    const Eigen::VectorXd& theta = res.params.theta;
    sc.gmp = score_gmp(theta);
    const Eigen::VectorXd grad = average_gradient(cfg_.network, res.params, score_batch_);
    sc.ggp = score_ggp(theta, grad);
    sc.jgp = score_jgp(grad);

    try {
      DmdOptions opts;
      opts.sv_floor = cfg_.sv_floor;
      opts.modes = cfg_.mode_kind;
      const KoopmanDecomposition decomp = decompose(
          SnapshotMatrix(res.log.snapshots, {res.log.epoch, res.log.seed, res.log.spec_hash}), opts);
      diag.rank = decomp.rank;
      diag.consistency_residual = decomp.consistency_residual;
      diag.amplitude_residual = decomp.amplitude_residual;
      diag.spectrum = spectrum_rows(decomp, cfg_.lambda_tol, cfg_.norm_floor);

      const std::vector<KoopmanTriplet> decaying =
          decaying_modes(decomp, cfg_.norm_floor, cfg_.lambda_tol);
      diag.decaying_modes = decaying.size();
      try {
        sc.kgp = score_kgp(decaying, KgpOptions{cfg_.kgp_modes});
      } catch (const Error& e) {
        sc.kgp_error = e;
      }

      const FixedPoint fp = predicted_fixed_point(decomp, cfg_.lambda_tol);
      diag.unit_modes = fp.modes_used;
      diag.fixed_point_imag = fp.discarded_imag;
      diag.fixed_point_distance = (fp.theta - theta).norm();
      sc.kmp = score_kmp(fp.theta);
      sc.fixed_point = fp.theta;
    } catch (const Error& e) {
      sc.koopman_error = e;
      diag.status = errc_name(e.code());
      diag.message = e.what();
    }
    return sc;
  }

  PruneMask build_mask(Strategy s, const EpochScores& sc, const Compression& c,
                       const LayerMap& map, std::size_t epoch) const {
    const auto need = [](const std::optional<ScoreVector>& v,
                         const std::optional<Error>& err) -> const ScoreVector& {
      if (!v) throw err.value_or(Error(Errc::InvalidArgument, "scores unavailable"));
      return *v;
    };
    switch (s) {
      case Strategy::Gmp: return global_mask(*sc.gmp, c, map);
      case Strategy::Kmp: return global_mask(need(sc.kmp, sc.koopman_error), c, map);
      case Strategy::KmpLayer:
        if (!sc.fixed_point) throw *sc.koopman_error;
        return score_kmp_layerwise(*sc.fixed_point, map, c);
      case Strategy::Kgp:
        return global_mask(need(sc.kgp, sc.kgp_error ? sc.kgp_error : sc.koopman_error), c, map);
      case Strategy::Ggp: return global_mask(*sc.ggp, c, map);
      case Strategy::Jgp: return global_mask(*sc.jgp, c, map);
      case Strategy::Lsp: {
        const ScoreVector& ref = cfg_.lsp_reference == Strategy::Kmp
                                     ? need(sc.kmp, sc.koopman_error)
                                     : *sc.gmp;
        return layer_shuffle_mask(global_mask(ref, c, map), mask_seed(seed_, epoch, c.value()));
      }
      case Strategy::Random: return random_mask(map, c, mask_seed(seed_, epoch, c.value()));
    }
    throw Error(Errc::InvalidArgument, "unhandled strategy");
  }

  void process_epoch(const TrainEpochResult& res, std::size_t epoch) {
    EpochDiagnostics diag;
    diag.seed = seed_;
    diag.epoch = epoch;
    diag.tau = res.log.iterations();
    diag.train_loss = res.epoch_loss;
    const EvalResult base = evaluate(cfg_.network, res.params, test_);
    diag.accuracy = base.accuracy;

    if (cfg_.write_trajectories) {
      std::filesystem::create_directories(cfg_.out_dir / "trajectories");
      save_trajectory(cfg_.out_dir / "trajectories" /
                          ("traj_s" + std::to_string(seed_) + "_e" + std::to_string(epoch) + ".bin"),
                      res.log);
    }

    const EpochScores sc = score_epoch(res, diag);
    for (Strategy s : strategies_) {
      for (double cv : compressions_) {
        RunRecord rec;
        rec.seed = seed_;
        rec.epoch = epoch;
        rec.strategy = s;
        rec.compression = cv;
        rec.accuracy_unpruned = base.accuracy;
        try {
          const PruneMask mask = build_mask(s, sc, Compression(cv), res.params.layer_map, epoch);
          rec.kept = mask.kept();
          const FlatParams pruned = apply_mask(res.params, mask);
          const EvalResult ev = evaluate(cfg_.network, pruned, test_);
          rec.accuracy_pruned = ev.accuracy;
          rec.loss_pruned = ev.mean_loss;
          if (cfg_.refine) {
            const TrainEpochResult refined = train_epoch(cfg_.network, pruned, train_, ordering_,
                                                         epoch + 1, cfg_.train.lr, mask.m);
            const EvalResult rv = evaluate(cfg_.network, refined.params, test_);
            rec.accuracy_refined = rv.accuracy;
            rec.loss_refined = rv.mean_loss;
          }
          out_.masks.emplace(MaskKey{s, epoch, seed_, cv}, mask);
        } catch (const Error& e) {
          rec.status = errc_name(e.code());
          rec.message = e.what();
        }
        out_.records.push_back(std::move(rec));
      }
    }
    out_.diagnostics.push_back(std::move(diag));
  }

  const ExperimentConfig& cfg_;
  const Dataset& train_;
  const Dataset& test_;
  std::uint64_t seed_;
  DataOrdering ordering_;
  std::vector<Strategy> strategies_;
  std::vector<double> compressions_;
  Dataset score_batch_;
  SeedOutput out_;
};

void summarize_values(const std::vector<double>& v, double& mean, double& sd, double& lo,
                      double& hi) {
  if (v.empty()) {
    mean = sd = lo = hi = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  double sum = 0.0;
  for (double x : v) sum += x;
  mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  sd = std::sqrt(ss / static_cast<double>(v.size()));
  lo = *std::min_element(v.begin(), v.end());
  hi = *std::max_element(v.begin(), v.end());
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::pair<Dataset, Dataset> load_datasets(const ExperimentConfig& config) {
  if (config.data.source == DataSourceKind::Synthetic) {
    BlobsOptions opts;
    opts.classes = config.data.classes;
    opts.spread = config.data.spread;
    opts.size = config.data.train_size;
    Dataset train = make_blobs(config.data.seed, opts);
    opts.size = config.data.test_size;
    Dataset test = make_blobs(splitmix64(config.data.seed) ^ 0x7e57ULL, opts);
    return {std::move(train), std::move(test)};
  }
  Dataset train = load_idx(config.data.train_images, config.data.train_labels, config.data.classes);
  Dataset test = config.data.test_images.empty()
                     ? train
                     : load_idx(config.data.test_images, config.data.test_labels, config.data.classes);
  return {std::move(train), std::move(test)};
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto [train, test] = load_datasets(config);
  if (static_cast<std::size_t>(train.inputs.cols()) != config.network.layer_sizes.front() ||
      static_cast<std::size_t>(train.targets.cols()) != config.network.layer_sizes.back()) {
    throw Error(Errc::ShapeMismatch, "dataset dimensions do not match network.layers");
  }

  const std::size_t n = config.seeds.size();
  std::vector<SeedOutput> outputs(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  const std::size_t workers = std::max<std::size_t>(1, std::min(n, config.threads ? config.threads : n));
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, train = std::cref(train), test = std::cref(test)] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
          try {
            outputs[i] = SeedRunner(config, train, test, config.seeds[i]).run();
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ExperimentResult result;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return config.seeds[a] < config.seeds[b]; });
  for (std::size_t i : order) {
    SeedOutput& o = outputs[i];
    result.records.insert(result.records.end(), o.records.begin(), o.records.end());
    result.diagnostics.insert(result.diagnostics.end(), o.diagnostics.begin(), o.diagnostics.end());
    result.masks.merge(o.masks);
    result.seconds_per_seed[config.seeds[i]] = o.seconds;
  }
  return result;
}

std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records) {
  std::map<std::tuple<std::size_t, Strategy, double>, std::vector<const RunRecord*>> groups;
  for (const RunRecord& r : records) groups[{r.epoch, r.strategy, r.compression}].push_back(&r);
  std::vector<SummaryRow> rows;
  for (const auto& [key, recs] : groups) {
    SummaryRow row;
    std::tie(row.epoch, row.strategy, row.compression) = key;
    std::vector<double> pruned, refined;
    for (const RunRecord* r : recs) {
      if (!r->ok()) continue;
      pruned.push_back(r->accuracy_pruned);
      if (r->accuracy_refined) refined.push_back(*r->accuracy_refined);
    }
    row.n = pruned.size();
    row.n_refined = refined.size();
    summarize_values(pruned, row.mean_pruned, row.std_pruned, row.min_pruned, row.max_pruned);
    summarize_values(refined, row.mean_refined, row.std_refined, row.min_refined, row.max_refined);
    rows.push_back(row);
  }
  return rows;
}

std::vector<OverlapRow> overlap_table(const std::map<MaskKey, PruneMask>& masks,
                                      const std::vector<OverlapPairing>& pairings) {
  std::set<double> compressions;
  std::set<std::uint64_t> seeds;
  for (const auto& [key, mask] : masks) {
    compressions.insert(key.compression);
    seeds.insert(key.seed);
  }
  std::vector<OverlapRow> rows;
  for (const OverlapPairing& p : pairings) {
    for (double c : compressions) {
      OverlapRow row;
      row.pairing = p;
      row.compression = c;
      std::vector<double> values;
      for (std::uint64_t seed : seeds) {
        const auto a = masks.find(MaskKey{p.a.strategy, p.a.epoch, seed, c});
        const auto b = masks.find(MaskKey{p.b.strategy, p.b.epoch, seed, c});
        if (a == masks.end() || b == masks.end()) continue;
        try {
          values.push_back(mask_overlap(a->second, b->second));
        } catch (const Error& e) {
          row.status = errc_name(e.code());
        }
      }
      if (values.empty() && row.status == "ok") continue;
      row.n = values.size();
      summarize_values(values, row.mean, row.std, row.min, row.max);
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<OverlapPairing> default_pairings(const ExperimentConfig& config) {
  std::vector<OverlapPairing> out;
  const auto has = [&](Strategy s) {
    return std::find(config.strategies.begin(), config.strategies.end(), s) != config.strategies.end();
  };
  std::vector<std::size_t> epochs = config.train.snapshot_epochs;
  std::sort(epochs.begin(), epochs.end());
  epochs.erase(std::unique(epochs.begin(), epochs.end()), epochs.end());
  if (has(Strategy::Kmp) && has(Strategy::Gmp)) {
    for (std::size_t e : epochs) out.push_back({{Strategy::Kmp, e}, {Strategy::Gmp, e}});
  }
  if (has(Strategy::Kmp)) {
    for (std::size_t i = 0; i < epochs.size(); ++i) {
      for (std::size_t j = i + 1; j < epochs.size(); ++j) {
        out.push_back({{Strategy::Kmp, epochs[i]}, {Strategy::Kmp, epochs[j]}});
      }
    }
  }
  return out;
}

double overlap_trend(const std::vector<OverlapRow>& rows, double compression) {
  std::vector<double> distance, overlap;
  for (const OverlapRow& r : rows) {
    if (r.compression != compression || r.status != "ok" || r.n == 0) continue;
    if (r.pairing.a.strategy != r.pairing.b.strategy || r.pairing.a.epoch == r.pairing.b.epoch) continue;
    const auto ea = static_cast<double>(r.pairing.a.epoch);
    const auto eb = static_cast<double>(r.pairing.b.epoch);
    distance.push_back(std::abs(eb - ea));
    overlap.push_back(r.mean);
  }
  if (distance.size() < 3) return std::numeric_limits<double>::quiet_NaN();
  const std::vector<double> rx = average_ranks(distance);
  const std::vector<double> ry = average_ranks(overlap);
  const double m = (static_cast<double>(rx.size()) + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - m) * (ry[i] - m);
    sxx += (rx[i] - m) * (rx[i] - m);
    syy += (ry[i] - m) * (ry[i] - m);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

std::vector<SpectrumRow> spectrum_rows(const KoopmanDecomposition& decomp, double lambda_tol,
                                       double norm_floor) {
  double largest = 0.0;
  for (const KoopmanTriplet& t : decomp.triplets) {
    if (is_decaying_candidate(t, lambda_tol)) largest = std::max(largest, t.norm);
  }
  std::vector<SpectrumRow> rows;
  rows.reserve(decomp.triplets.size());
  for (const KoopmanTriplet& t : decomp.triplets) {
    const bool kgp = largest > 0.0 && is_decaying_candidate(t, lambda_tol) && t.norm >= norm_floor * largest;
    rows.push_back({t.lambda.real(), t.lambda.imag(), t.norm, kgp});
  }
  return rows;
}

}  // namespace kprune
