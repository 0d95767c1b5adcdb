// SPDX-License-Identifier: Apache-2.0
//
// kprune: Koopman-based pruning experiments from the command line.
//
//   kprune run <config> [--seed N]... [--out-dir D] [--compressions 1,2,4] [--strategies gmp,kmp]
//   kprune overlap <mask-files...> --pairing=all|first|consecutive
//   kprune spectrum <trajectory-file>
//   kprune decompose <trajectory-file> --out=<dir>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kprune/io.hpp"
#include "kprune/koopman.hpp"
#include "kprune/pruning.hpp"
#include "kprune/runner.hpp"

namespace {

struct KoopmanFlags {
  double lambda_tol = kprune::kDefaultLambdaTol;
  double norm_floor = kprune::kDefaultNormFloor;
  double sv_floor = kprune::kDefaultSvFloor;
  bool projected = false;

  void attach(CLI::App* app) {
    app->add_option("--lambda-tol", lambda_tol, "tolerance for |lambda - 1|");
    app->add_option("--norm-floor", norm_floor, "relative norm floor for decaying modes");
    app->add_option("--sv-floor", sv_floor, "relative singular value floor");
    app->add_flag("--projected", projected, "use projected DMD modes");
  }

  kprune::KoopmanDecomposition decompose_file(const std::string& path) const {
    const kprune::TrajectoryLog log = kprune::load_trajectory(path);
    kprune::DmdOptions opts;
    opts.sv_floor = sv_floor;
    opts.modes = projected ? kprune::ModeKind::Projected : kprune::ModeKind::Exact;
    return kprune::decompose(
        kprune::SnapshotMatrix(log.snapshots, {log.epoch, log.seed, log.spec_hash}), opts);
  }
};

int cmd_run(const std::string& config_path, const std::vector<std::uint64_t>& seeds,
            const std::string& out_dir, const std::string& compressions,
            const std::string& strategies) {
  kprune::ExperimentConfig cfg = kprune::load_config(config_path);
  if (!seeds.empty()) cfg.seeds = seeds;
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (!compressions.empty()) kprune::set_config_value(cfg, "prune.compressions", compressions);
  if (!strategies.empty()) kprune::set_config_value(cfg, "prune.strategies", strategies);
  cfg.validate();

  const kprune::ExperimentResult result = kprune::run_experiment(cfg);
  kprune::write_outputs(result, cfg, cfg.out_dir);
  std::size_t failed = 0;
  for (const auto& r : result.records) failed += !r.ok();
  for (const auto& [seed, secs] : result.seconds_per_seed) {
    std::fprintf(stderr, "seed %llu: %.2f s\n", static_cast<unsigned long long>(seed), secs);
  }
  std::fprintf(stderr, "%zu records (%zu marked failed) written to %s\n", result.records.size(),
               failed, cfg.out_dir.string().c_str());
  return 0;
}

int cmd_overlap(const std::vector<std::string>& files, const std::string& pairing) {
  std::vector<kprune::PruneMask> masks;
  for (const auto& f : files) masks.push_back(kprune::load_mask(f));
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    for (std::size_t j = i + 1; j < masks.size(); ++j) {
      if (pairing == "all" || (pairing == "first" && i == 0) ||
          (pairing == "consecutive" && j == i + 1)) {
        pairs.emplace_back(i, j);
      }
    }
  }
  std::cout << "mask_a,mask_b,overlap,status\n";
  for (auto [i, j] : pairs) {
    std::cout << files[i] << ',' << files[j] << ',';
    try {
      std::cout << kprune::format_double(kprune::mask_overlap(masks[i], masks[j])) << ",ok\n";
    } catch (const kprune::Error& e) {
      std::cout << ',' << kprune::errc_name(e.code()) << '\n';
    }
  }
  return 0;
}

int cmd_spectrum(const std::string& path, const KoopmanFlags& flags) {
  const auto decomp = flags.decompose_file(path);
  kprune::write_spectrum_csv(std::cout,
                             kprune::spectrum_rows(decomp, flags.lambda_tol, flags.norm_floor));
  return 0;
}

int cmd_decompose(const std::string& path, const std::string& out_dir, const KoopmanFlags& flags) {
  const auto decomp = flags.decompose_file(path);
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "decomposition.csv");
    kprune::write_decomposition_csv(out, decomp);
  }
  {
    std::ofstream out(dir / "spectrum.csv");
    kprune::write_spectrum_csv(out, kprune::spectrum_rows(decomp, flags.lambda_tol, flags.norm_floor));
  }
  try {
    const auto fp = kprune::predicted_fixed_point(decomp, flags.lambda_tol);
    kprune::save_mode_store(dir / "modes.bin", fp,
                            kprune::decaying_modes(decomp, flags.norm_floor, flags.lambda_tol));
  } catch (const kprune::Error& e) {
    std::fprintf(stderr, "no mode store written: %s\n", e.what());
  }
  std::fprintf(stderr, "rank %zu, consistency residual %.3e, amplitude residual %.3e\n",
               decomp.rank, decomp.consistency_residual, decomp.amplitude_residual);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Koopman mode decomposition of training trajectories and pruning sweeps"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a train/decompose/prune/evaluate experiment");
  std::string config_path, out_dir, compressions, strategies;
  std::vector<std::uint64_t> seeds;
  run->add_option("config", config_path, "config file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seeds, "seed(s) overriding run.seeds");
  run->add_option("--out-dir", out_dir, "output directory overriding run.out_dir");
  run->add_option("--compressions", compressions, "comma-separated compressions");
  run->add_option("--strategies", strategies, "comma-separated strategies");

  auto* overlap = app.add_subcommand("overlap", "overlap of saved masks");
  std::vector<std::string> mask_files;
  std::string pairing = "all";
  overlap->add_option("masks", mask_files, "mask files")->required()->expected(2, -1);
  overlap->add_option("--pairing", pairing, "all, first or consecutive")
      ->check(CLI::IsMember({"all", "first", "consecutive"}));

  KoopmanFlags flags;
  auto* spectrum = app.add_subcommand("spectrum", "eigenvalue table of a trajectory file");
  std::string traj_path;
  spectrum->add_option("trajectory", traj_path, "trajectory file")->required()->check(CLI::ExistingFile);
  flags.attach(spectrum);

  auto* decompose = app.add_subcommand("decompose", "full decomposition export");
  std::string decompose_out;
  decompose->add_option("trajectory", traj_path, "trajectory file")->required()->check(CLI::ExistingFile);
  decompose->add_option("--out", decompose_out, "output directory")->required();
  flags.attach(decompose);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, seeds, out_dir, compressions, strategies);
    if (*overlap) return cmd_overlap(mask_files, pairing);
    if (*spectrum) return cmd_spectrum(traj_path, flags);
    if (*decompose) return cmd_decompose(traj_path, decompose_out, flags);
  } catch (const kprune::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
