// SPDX-License-Identifier: Apache-2.0

#include "kprune/io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>

namespace kprune {

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw Error(Errc::Io, "truncated matrix header");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

void put_f64(std::ostream& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  if (std::strtod(buf, nullptr) != v) std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_matrix_bin(const std::filesystem::path& path, const DenseMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  put_u64(out, m.rows());
  put_u64(out, m.cols());
  for (double d : m.data()) put_f64(out, d);
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

DenseMatrix read_matrix_bin(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  const std::uint64_t rows = get_u64(in);
  const std::uint64_t cols = get_u64(in);
  if (cols != 0 && rows > (std::uint64_t{1} << 40) / cols) {
    throw Error(Errc::Io, path.string() + ": implausible matrix shape");
  }
  std::vector<double> values(rows * cols);
  for (double& d : values) d = std::bit_cast<double>(get_u64(in));
  return DenseMatrix(rows, cols, std::move(values));
}

std::filesystem::path manifest_path(const std::filesystem::path& data_path) {
  return std::filesystem::path(data_path.string() + ".manifest");
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  for (const auto& [k, v] : manifest) out << k << '=' << v << '\n';
}

Manifest read_manifest(const std::filesystem::path& path) {
  Manifest m;
  std::ifstream in(path);
  if (!in) return m;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (line.empty() || line[0] == '#' || eq == std::string::npos) continue;
    m[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return m;
}

void save_trajectory(const std::filesystem::path& path, const TrajectoryLog& log) {
  write_matrix_bin(path, log.snapshots);
  char hash[24];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(log.spec_hash));
  write_manifest(manifest_path(path), {{"epoch", std::to_string(log.epoch)},
                                       {"seed", std::to_string(log.seed)},
                                       {"spec_hash", hash}});
}

TrajectoryLog load_trajectory(const std::filesystem::path& path) {
  TrajectoryLog log;
  log.snapshots = read_matrix_bin(path);
  const Manifest m = read_manifest(manifest_path(path));
  if (auto it = m.find("epoch"); it != m.end()) log.epoch = std::stoull(it->second);
  if (auto it = m.find("seed"); it != m.end()) log.seed = std::stoull(it->second);
  if (auto it = m.find("spec_hash"); it != m.end()) log.spec_hash = std::stoull(it->second, nullptr, 16);
  return log;
}

void save_mode_store(const std::filesystem::path& path, const FixedPoint& fixed_point,
                     const std::vector<KoopmanTriplet>& selected) {
  const auto n = fixed_point.theta.size();
  Eigen::MatrixXd cols(n, static_cast<Eigen::Index>(1 + 2 * selected.size()));
  cols.col(0) = fixed_point.theta;
  Manifest manifest{{"col0", "theta_star"}, {"modes", std::to_string(selected.size())}};
  for (std::size_t i = 0; i < selected.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(1 + 2 * i);
    cols.col(c) = selected[i].scaled_mode.real();
    cols.col(c + 1) = selected[i].scaled_mode.imag();
    const std::string lam = format_double(selected[i].lambda.real()) + "," +
                            format_double(selected[i].lambda.imag());
    manifest["col" + std::to_string(c)] = "re_mode" + std::to_string(i) + " lambda=" + lam;
    manifest["col" + std::to_string(c + 1)] = "im_mode" + std::to_string(i) + " lambda=" + lam;
  }
  write_matrix_bin(path, DenseMatrix(std::move(cols)));
  write_manifest(manifest_path(path), manifest);
}

void write_decomposition_csv(std::ostream& out, const KoopmanDecomposition& decomp) {
  out << "index,re_lambda,im_lambda,re_phi,im_phi,norm\n";
  for (std::size_t i = 0; i < decomp.triplets.size(); ++i) {
    const KoopmanTriplet& t = decomp.triplets[i];
    out << i << ',' << format_double(t.lambda.real()) << ',' << format_double(t.lambda.imag())
        << ',' << format_double(t.amplitude.real()) << ',' << format_double(t.amplitude.imag())
        << ',' << format_double(t.norm) << '\n';
  }
}

}  // namespace kprune
