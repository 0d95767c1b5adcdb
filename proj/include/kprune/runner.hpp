// SPDX-License-Identifier: Apache-2.0
//
// Config-driven pipeline: train, snapshot, decompose, prune across a
// strategy x compression sweep, optionally refine, evaluate, tabulate.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "kprune/data.hpp"
#include "kprune/koopman.hpp"
#include "kprune/pruning.hpp"
#include "kprune/trainer.hpp"

namespace kprune {

enum class DataSourceKind { Synthetic, Idx };

struct DataConfig {
  DataSourceKind source = DataSourceKind::Synthetic;
  std::uint64_t seed = 7;
  std::size_t train_size = 2048;
  std::size_t test_size = 1024;
  std::size_t classes = 4;
  double spread = 1.0;
  std::filesystem::path train_images, train_labels, test_images, test_labels;
};

struct TrainConfig {
  double lr = 0.05;
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  std::vector<std::size_t> snapshot_epochs{1, 5, 10, 20, 50};  // 1-based
};

struct ExperimentConfig {
  NetworkSpec network = NetworkSpec::uniform({2, 32, 32, 4}, Activation::Tanh, Loss::CrossEntropy);
  DataConfig data;
  TrainConfig train;
  std::vector<Strategy> strategies{Strategy::Gmp, Strategy::Kmp, Strategy::KmpLayer,
                                   Strategy::Kgp, Strategy::Ggp, Strategy::Jgp,
                                   Strategy::Lsp, Strategy::Random};
  std::vector<double> compressions{1, 2, 4, 8, 16, 32, 64};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  bool refine = true;
  std::size_t kgp_modes = 1;
  std::size_t score_batch = 256;  // first examples of the training set
  Strategy lsp_reference = Strategy::Gmp;
  double lambda_tol = kDefaultLambdaTol;
  double norm_floor = kDefaultNormFloor;
  double sv_floor = kDefaultSvFloor;
  ModeKind mode_kind = ModeKind::Exact;
  std::filesystem::path out_dir = "kprune_out";
  bool write_masks = false;
  bool write_trajectories = false;
  std::size_t threads = 0;  // 0: one worker per seed

  void validate() const;
};

/// Sets one dotted key ("train.lr") from its text value. Unknown keys and
/// unparsable values throw Error{Config}.
void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Flat "key = value" lines; '#' starts a comment; "[section]" prefixes
/// following keys with "section.".
ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path);
/// Every key with its effective value, parseable by parse_config.
std::string config_text(const ExperimentConfig& config);

struct RunRecord {
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  Strategy strategy = Strategy::Gmp;
  double compression = 1.0;
  std::string status = "ok";  // "ok" or an error code name
  std::string message;
  std::size_t kept = 0;
  double accuracy_unpruned = 0.0;
  double accuracy_pruned = 0.0;
  double loss_pruned = 0.0;
  std::optional<double> accuracy_refined;
  std::optional<double> loss_refined;

  bool ok() const noexcept { return status == "ok"; }
};

struct SpectrumRow {
  double re_lambda = 0.0;
  double im_lambda = 0.0;
  double norm = 0.0;
  bool kgp = false;
};

struct EpochDiagnostics {
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  std::string status = "ok";
  std::string message;
  std::size_t tau = 0;
  std::size_t rank = 0;
  double consistency_residual = 0.0;
  double amplitude_residual = 0.0;
  std::size_t unit_modes = 0;
  double fixed_point_imag = 0.0;
  double fixed_point_distance = 0.0;  // |theta_star - theta(tau)|_2
  std::size_t decaying_modes = 0;
  double train_loss = 0.0;
  double accuracy = 0.0;
  std::vector<SpectrumRow> spectrum;
};

struct MaskKey {
  Strategy strategy;
  std::size_t epoch;
  std::uint64_t seed;
  double compression;
  auto operator<=>(const MaskKey&) const = default;
};

struct ExperimentResult {
  std::vector<RunRecord> records;  // ordered by (seed, epoch, strategy, c)
  std::vector<EpochDiagnostics> diagnostics;
  std::map<MaskKey, PruneMask> masks;
  std::map<std::uint64_t, double> seconds_per_seed;  // wall clock, not written to CSVs
};

/// Train/test data for a config.
std::pair<Dataset, Dataset> load_datasets(const ExperimentConfig& config);

ExperimentResult run_experiment(const ExperimentConfig& config);

struct SummaryRow {
  std::size_t epoch = 0;
  Strategy strategy = Strategy::Gmp;
  double compression = 1.0;
  std::size_t n = 0;  // successful seeds
  double mean_pruned = 0, std_pruned = 0, min_pruned = 0, max_pruned = 0;
  double mean_refined = 0, std_refined = 0, min_refined = 0, max_refined = 0;
  std::size_t n_refined = 0;
};

/// Across-seed mean, population standard deviation, min and max.
std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records);

struct MaskSide {
  Strategy strategy;
  std::size_t epoch;
};

struct OverlapPairing {
  MaskSide a;
  MaskSide b;
};

struct OverlapRow {
  OverlapPairing pairing;
  double compression = 1.0;
  std::size_t n = 0;
  double mean = 0, std = 0, min = 0, max = 0;
  std::string status = "ok";
};

/// Per (pairing, c): overlap of the two masks for each seed present on both
/// sides, aggregated across seeds. Pairs whose kept counts differ yield a
/// row with status UnequalCompression.
std::vector<OverlapRow> overlap_table(const std::map<MaskKey, PruneMask>& masks,
                                      const std::vector<OverlapPairing>& pairings);

/// KMP vs GMP at every epoch, and KMP vs KMP for every epoch pair.
std::vector<OverlapPairing> default_pairings(const ExperimentConfig& config);

/// Spearman rank correlation between epoch distance and mean overlap for the
/// same-strategy rows at compression c (negative: overlap decays with
/// distance). NaN with fewer than 3 rows.
double overlap_trend(const std::vector<OverlapRow>& rows, double compression);

/// One row per triplet: re_lambda, im_lambda, norm, kgp flag.
std::vector<SpectrumRow> spectrum_rows(const KoopmanDecomposition& decomp, double lambda_tol,
                                       double norm_floor);
void write_spectrum_csv(std::ostream& out, const std::vector<SpectrumRow>& rows);

void write_records_csv(std::ostream& out, const std::vector<RunRecord>& records);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
void write_overlap_csv(std::ostream& out, const std::vector<OverlapRow>& rows);
void write_diagnostics_csv(std::ostream& out, const std::vector<EpochDiagnostics>& diags);
/// Compression (log2 axis) vs mean accuracy per strategy for one epoch.
void write_accuracy_svg(std::ostream& out, const std::vector<SummaryRow>& rows, std::size_t epoch);

/// Writes records.csv, summary.csv, overlap.csv, overlap_trend.csv,
/// diagnostics.csv, spectrum_s<seed>_e<epoch>.csv, accuracy_e<epoch>.svg and
/// config.txt under out_dir; masks/ when enabled.
void write_outputs(const ExperimentResult& result, const ExperimentConfig& config,
                   const std::filesystem::path& out_dir);

}  // namespace kprune
