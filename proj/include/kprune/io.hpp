// SPDX-License-Identifier: Apache-2.0
//
// On-disk formats.
//
// Trajectory / mode store: little-endian u64 rows, u64 cols, then
// rows * cols f64 values in column-major order. A sidecar text manifest
// "<file>.manifest" carries key=value provenance lines.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "kprune/koopman.hpp"
#include "kprune/trainer.hpp"

namespace kprune {

void write_matrix_bin(const std::filesystem::path& path, const DenseMatrix& m);
DenseMatrix read_matrix_bin(const std::filesystem::path& path);

using Manifest = std::map<std::string, std::string>;
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
/// Empty when the file does not exist.
Manifest read_manifest(const std::filesystem::path& path);
std::filesystem::path manifest_path(const std::filesystem::path& data_path);

void save_trajectory(const std::filesystem::path& path, const TrajectoryLog& log);
TrajectoryLog load_trajectory(const std::filesystem::path& path);

/// Columns: theta_star, then re/im pairs for each selected scaled mode.
void save_mode_store(const std::filesystem::path& path, const FixedPoint& fixed_point,
                     const std::vector<KoopmanTriplet>& selected);

/// "index,re_lambda,im_lambda,re_phi,im_phi,norm"
void write_decomposition_csv(std::ostream& out, const KoopmanDecomposition& decomp);

/// Round-trip-safe text for a double: "%.15g" when that parses back
/// exactly, "%.17g" otherwise.
std::string format_double(double v);

}  // namespace kprune
