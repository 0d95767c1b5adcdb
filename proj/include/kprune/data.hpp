// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>

#include "kprune/trainer.hpp"

namespace kprune {

struct BlobsOptions {
  std::size_t size = 2048;
  std::size_t classes = 4;
  double radius = 2.0 * 1.4142135623730951;  // centers at (+-2, +-2) for 4 classes
  double spread = 1.0;                       // per-axis standard deviation
};

/// Balanced 2-D Gaussian blobs, class centers evenly spaced on a circle.
/// Example i has label i % classes. Pure function of (seed, options).
Dataset make_blobs(std::uint64_t seed, const BlobsOptions& options = {});

/// One-hot targets for the given labels.
Eigen::MatrixXd one_hot(std::span<const int> labels, std::size_t classes);

/// Reads an IDX image file (magic 0x00000803, u8 pixels) and label file
/// (magic 0x00000801). Pixels are scaled to [0, 1] and flattened row-major.
/// `classes` of 0 means max label + 1.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t classes = 0);

}  // namespace kprune
