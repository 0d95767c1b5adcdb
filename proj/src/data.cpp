// SPDX-License-Identifier: Apache-2.0

#include "kprune/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <vector>

#include "kprune/random.hpp"

namespace kprune {

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t at) {
  if (at + 4 > buf.size()) throw Error(Errc::Io, "truncated IDX header");
  return (std::uint32_t{buf[at]} << 24) | (std::uint32_t{buf[at + 1]} << 16) |
         (std::uint32_t{buf[at + 2]} << 8) | std::uint32_t{buf[at + 3]};
}

}  // namespace

Eigen::MatrixXd one_hot(std::span<const int> labels, std::size_t classes) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels.size()),
                                            static_cast<Eigen::Index>(classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw Error(Errc::InvalidArgument, "label out of range");
    }
    t(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return t;
}

Dataset make_blobs(std::uint64_t seed, const BlobsOptions& options) {
  if (options.size == 0 || options.classes == 0) {
    throw Error(Errc::InvalidArgument, "blobs need size and classes >= 1");
  }
  auto rng = make_rng(seed, kStreamData);
  Dataset data;
  data.inputs.resize(static_cast<Eigen::Index>(options.size), 2);
  data.labels.resize(options.size);
  const double phase = std::numbers::pi / 4.0;
  for (std::size_t i = 0; i < options.size; ++i) {
    const auto k = static_cast<int>(i % options.classes);
    const double angle = phase + 2.0 * std::numbers::pi * k / static_cast<double>(options.classes);
    const auto row = static_cast<Eigen::Index>(i);
    data.inputs(row, 0) = options.radius * std::cos(angle) + options.spread * standard_normal(rng);
    data.inputs(row, 1) = options.radius * std::sin(angle) + options.spread * standard_normal(rng);
    data.labels[i] = k;
  }
  data.targets = one_hot(data.labels, options.classes);
  return data;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t classes) {
  const auto img = read_file(images);
  const auto lab = read_file(labels);
  if (read_be32(img, 0) != 0x00000803) throw Error(Errc::Io, images.string() + ": bad IDX image magic");
  if (read_be32(lab, 0) != 0x00000801) throw Error(Errc::Io, labels.string() + ": bad IDX label magic");

  const std::size_t count = read_be32(img, 4);
  const std::size_t rows = read_be32(img, 8);
  const std::size_t cols = read_be32(img, 12);
  const std::size_t label_count = read_be32(lab, 4);
  if (count != label_count) throw Error(Errc::Io, "IDX image and label counts differ");
  const std::size_t pixels = rows * cols;
  if (img.size() < 16 + count * pixels) throw Error(Errc::Io, "truncated IDX image data");
  if (lab.size() < 8 + count) throw Error(Errc::Io, "truncated IDX label data");

  Dataset data;
  data.inputs.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(pixels));
  data.labels.resize(count);
  int max_label = 0;
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t p = 0; p < pixels; ++p) {
      data.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) =
          img[16 + i * pixels + p] / 255.0;
    }
    data.labels[i] = lab[8 + i];
    max_label = std::max(max_label, data.labels[i]);
  }
  data.targets = one_hot(data.labels, classes ? classes : static_cast<std::size_t>(max_label) + 1);
  return data;
}

}  // namespace kprune
