// SPDX-License-Identifier: Apache-2.0
//
// Independent reference computations shared by the unit and acceptance
// tests. Nothing here calls into the code paths it is used to check.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "kprune/trainer.hpp"

namespace kprune::oracle {

/// Affine map theta(t+1) = A theta(t) + b whose initial displacement from the
/// fixed point excites a chosen set of eigenvalues.
struct PlantedSystem {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd fixed_point;  // (I - A)^-1 b
  Eigen::VectorXd theta0;
  std::vector<std::complex<double>> excited;  // eigenvalues present in theta(0) - fixed_point
  Eigen::MatrixXd trajectory;                 // N x (tau + 1), by iterating the map
};

inline double urand(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Random planted system. The first `excited_blocks` diagonal blocks of the
/// planted real Schur-like form are excited; a block is either a real
/// eigenvalue or a 2x2 rotation-scaling block for a conjugate pair. All
/// eigenvalue moduli lie in [0.2, 0.97] and excited eigenvalues are spaced
/// at least `min_gap` apart.
inline PlantedSystem planted_system(std::uint64_t seed, int n, int excited_blocks, int tau,
                                    double min_gap = 0.08) {
  std::mt19937_64 rng(seed);
  PlantedSystem sys;
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
  std::vector<std::pair<int, int>> blocks;  // (start, size)
  int i = 0;
  int made = 0;
  while (i < n) {
    const bool want_pair = i + 1 < n && urand(rng, 0, 1) < 0.4;
    for (int attempt = 0;; ++attempt) {
      std::vector<std::complex<double>> cand;
      double re = 0, im = 0;
      if (want_pair) {
        const double r = urand(rng, 0.3, 0.97);
        const double ang = urand(rng, 0.3, 2.8);
        re = r * std::cos(ang);
        im = r * std::sin(ang);
        cand = {{re, im}, {re, -im}};
      } else {
        const double mag = urand(rng, 0.2, 0.97);
        re = urand(rng, 0, 1) < 0.75 ? mag : -mag;
        cand = {{re, 0.0}};
      }
      bool ok = true;
      if (made < excited_blocks) {
        for (const auto& c : cand) {
          if (std::abs(c - 1.0) < min_gap) ok = false;
          for (const auto& e : sys.excited) {
            if (std::abs(c - e) < min_gap) ok = false;
          }
        }
      }
      if (ok || attempt > 200) {
        if (want_pair) {
          S(i, i) = re;
          S(i, i + 1) = im;
          S(i + 1, i) = -im;
          S(i + 1, i + 1) = re;
        } else {
          S(i, i) = re;
        }
        if (made < excited_blocks) sys.excited.insert(sys.excited.end(), cand.begin(), cand.end());
        blocks.emplace_back(i, want_pair ? 2 : 1);
        ++made;
        break;
      }
    }
    i += want_pair ? 2 : 1;
  }

  // Well-conditioned random basis: identity plus a small random perturbation.
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) P(r, c) += urand(rng, -0.3, 0.3) / std::sqrt(double(n));
  sys.A = P * S * P.inverse();

  sys.fixed_point.resize(n);
  for (int r = 0; r < n; ++r) sys.fixed_point(r) = urand(rng, -1.0, 1.0);
  sys.b = (Eigen::MatrixXd::Identity(n, n) - sys.A) * sys.fixed_point;

  Eigen::VectorXd disp = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < std::min<int>(excited_blocks, static_cast<int>(blocks.size())); ++k) {
    const auto [start, size] = blocks[static_cast<std::size_t>(k)];
    for (int j = 0; j < size; ++j) disp += urand(rng, 0.5, 1.5) * P.col(start + j);
  }
  sys.theta0 = sys.fixed_point + disp;

  sys.trajectory.resize(n, tau + 1);
  sys.trajectory.col(0) = sys.theta0;
  for (int t = 0; t < tau; ++t) sys.trajectory.col(t + 1) = sys.A * sys.trajectory.col(t) + sys.b;
  return sys;
}

/// Scalar-loop evaluation of a fully connected net for one input.
inline std::vector<double> naive_forward(const NetworkSpec& spec, const Eigen::VectorXd& theta,
                                         std::vector<double> x) {
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    const std::size_t in = spec.layer_sizes[l];
    const std::size_t out = spec.layer_sizes[l + 1];
    std::vector<double> y(out);
    for (std::size_t o = 0; o < out; ++o) {
      double acc = theta(static_cast<Eigen::Index>(offset + in * out + o));
      for (std::size_t k = 0; k < in; ++k) {
        acc += theta(static_cast<Eigen::Index>(offset + o * in + k)) * x[k];
      }
      const bool hidden = l + 2 < spec.layer_sizes.size();
      if (hidden) {
        switch (spec.activations[l]) {
          case Activation::Relu: acc = acc > 0 ? acc : 0; break;
          case Activation::Tanh: acc = std::tanh(acc); break;
          case Activation::Identity: break;
        }
      }
      y[o] = acc;
    }
    x = std::move(y);
    offset += in * out + out;
  }
  return x;
}

/// Mean loss over a batch computed with naive_forward.
inline double naive_loss(const NetworkSpec& spec, const Eigen::VectorXd& theta,
                         const Dataset& data) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::vector<double> x(static_cast<std::size_t>(data.inputs.cols()));
    for (std::size_t k = 0; k < x.size(); ++k) {
      x[k] = data.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    }
    const std::vector<double> out = naive_forward(spec, theta, x);
    if (spec.loss == Loss::CrossEntropy) {
      const double m = *std::max_element(out.begin(), out.end());
      double s = 0.0;
      for (double o : out) s += std::exp(o - m);
      total += m + std::log(s) - out[static_cast<std::size_t>(data.labels[i])];
    } else {
      double s = 0.0;
      for (std::size_t o = 0; o < out.size(); ++o) {
        const double d = out[o] - data.targets(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(o));
        s += d * d;
      }
      total += s / static_cast<double>(out.size());
    }
  }
  return total / static_cast<double>(data.size());
}

/// Central differences of naive_loss with step h.
inline Eigen::VectorXd finite_difference_gradient(const NetworkSpec& spec,
                                                  const Eigen::VectorXd& theta,
                                                  const Dataset& data, double h = 1e-5) {
  Eigen::VectorXd g(theta.size());
  Eigen::VectorXd work = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    work(i) = theta(i) + h;
    const double up = naive_loss(spec, work, data);
    work(i) = theta(i) - h;
    const double down = naive_loss(spec, work, data);
    work(i) = theta(i);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

/// Top-k indices by a full stable sort on descending score.
inline std::vector<std::size_t> stable_sort_top_k(const Eigen::VectorXd& scores, std::size_t k) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(scores.size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return scores(static_cast<Eigen::Index>(a)) > scores(static_cast<Eigen::Index>(b));
  });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Random dataset with `classes` labels and d-dimensional Gaussian inputs.
inline Dataset random_dataset(std::mt19937_64& rng, std::size_t m, std::size_t d,
                              std::size_t classes) {
  Dataset data;
  std::normal_distribution<double> normal;
  data.inputs.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < data.inputs.size(); ++i) data.inputs.data()[i] = normal(rng);
  data.targets = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(classes));
  for (std::size_t i = 0; i < m; ++i) {
    const int y = static_cast<int>(rng() % classes);
    data.labels.push_back(y);
    data.targets(static_cast<Eigen::Index>(i), y) = 1.0;
  }
  return data;
}

/// Maximum over coordinates of |a - b| / max(|a|, |b|, floor).
inline double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                 double floor = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a(i)), std::abs(b(i)), floor});
    worst = std::max(worst, std::abs(a(i) - b(i)) / denom);
  }
  return worst;
}

}  // namespace kprune::oracle
