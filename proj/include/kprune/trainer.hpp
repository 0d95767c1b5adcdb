// SPDX-License-Identifier: Apache-2.0
//
// Deterministic feedforward training engine: fully connected layers, plain
// SGD in a fixed per-epoch data order, and a per-iteration parameter log.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kprune/linalg.hpp"

namespace kprune {

enum class Activation { Relu, Tanh, Identity };
enum class Loss { CrossEntropy, Mse };

const char* to_string(Activation a) noexcept;
const char* to_string(Loss l) noexcept;
Activation parse_activation(const std::string& s);
Loss parse_loss(const std::string& s);

struct NetworkSpec {
  std::vector<std::size_t> layer_sizes;  // input width first, output width last
  std::vector<Activation> activations;   // one per hidden layer
  Loss loss = Loss::CrossEntropy;

  /// Same activation on every hidden layer.
  static NetworkSpec uniform(std::vector<std::size_t> sizes, Activation act, Loss loss);

  std::size_t num_layers() const noexcept { return layer_sizes.size() - 1; }  // affine layers
  std::size_t num_params() const;
  /// Canonical text form, used for hashing.
  std::string canonical() const;
  /// FNV-1a of canonical().
  std::uint64_t hash() const;
  void validate() const;
};

enum class ParamKind : std::uint8_t { Weight, Bias };

struct ParamSlot {
  std::uint32_t layer;
  ParamKind kind;
  bool operator==(const ParamSlot&) const = default;
};

/// Maps every flat parameter index to its layer. Layer l occupies a
/// contiguous block: weights (row-major, out x in) then biases.
class LayerMap {
 public:
  LayerMap() = default;
  explicit LayerMap(const NetworkSpec& spec);
  /// Single anonymous layer of n parameters.
  static LayerMap single(std::size_t n);

  std::size_t size() const noexcept { return slots_.size(); }
  std::size_t num_layers() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  const ParamSlot& operator[](std::size_t i) const { return slots_[i]; }
  /// [begin, end) flat range of layer l.
  std::size_t layer_begin(std::size_t l) const { return offsets_[l]; }
  std::size_t layer_end(std::size_t l) const { return offsets_[l + 1]; }

 private:
  std::vector<ParamSlot> slots_;
  std::vector<std::size_t> offsets_;
};

struct FlatParams {
  Eigen::VectorXd theta;
  LayerMap layer_map;

  std::size_t size() const noexcept { return static_cast<std::size_t>(theta.size()); }
};

/// Labelled dataset; one example per row of `inputs`.
struct Dataset {
  Eigen::MatrixXd inputs;    // M x d_in
  std::vector<int> labels;   // class ids, used by cross-entropy and accuracy
  Eigen::MatrixXd targets;   // M x d_out, one-hot for classification or regression targets

  std::size_t size() const noexcept { return labels.size(); }
};

/// Fixed data orderings: the permutation for an epoch is a pure function of
/// (seed, epoch).
class DataOrdering {
 public:
  DataOrdering(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed);

  std::vector<std::size_t> permutation(std::size_t epoch) const;
  std::size_t batch_size() const noexcept { return batch_size_; }
  std::size_t dataset_size() const noexcept { return dataset_size_; }
  std::uint64_t seed() const noexcept { return seed_; }
  /// ceil(M / batch_size).
  std::size_t iterations_per_epoch() const noexcept {
    return (dataset_size_ + batch_size_ - 1) / batch_size_;
  }

 private:
  std::size_t dataset_size_;
  std::size_t batch_size_;
  std::uint64_t seed_;
};

/// Parameter snapshots of one epoch: column t is theta after t updates.
struct TrajectoryLog {
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
  std::uint64_t spec_hash = 0;
  DenseMatrix snapshots;  // N x (tau + 1)

  std::size_t iterations() const noexcept { return snapshots.cols() - 1; }
};

/// Forward pass cache: activations[0] is the input batch, activations[l + 1]
/// the output of affine layer l after its nonlinearity (rows are examples).
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;
  const Eigen::MatrixXd& output() const { return activations.back(); }
};

FlatParams init_params(const NetworkSpec& spec, std::uint64_t seed);

/// Runs the batch through the net. The output layer is always affine; for
/// cross-entropy the outputs are logits.
ForwardCache forward(const NetworkSpec& spec, const FlatParams& params,
                     const Eigen::MatrixXd& inputs);

/// Mean loss over the batch.
double batch_loss(const NetworkSpec& spec, const Eigen::MatrixXd& outputs,
                  std::span<const int> labels, const Eigen::MatrixXd& targets);

/// Reverse-mode gradient of the mean batch loss with respect to every
/// parameter, given a cache from forward() on the same batch.
Eigen::VectorXd backward(const NetworkSpec& spec, const FlatParams& params,
                         const ForwardCache& cache, std::span<const int> labels,
                         const Eigen::MatrixXd& targets);

/// Rows `indices` of a dataset.
Dataset gather(const Dataset& data, std::span<const std::size_t> indices);

/// Mean gradient over a designated batch.
Eigen::VectorXd average_gradient(const NetworkSpec& spec, const FlatParams& params,
                                 const Dataset& batch);

/// Gradient oracle for the generic SGD loop: fills `grad` for the batch and
/// returns the batch loss at `theta`.
using GradientFn = std::function<double(const Eigen::VectorXd& theta,
                                        std::span<const std::size_t> batch,
                                        Eigen::VectorXd& grad)>;

struct EpochResult {
  Eigen::VectorXd theta;  // theta after the epoch
  DenseMatrix snapshots;  // N x (tau + 1)
  double mean_batch_loss = 0.0;
};

/// Plain SGD over one epoch of a fixed ordering. With a mask, masked-out
/// coordinates are re-zeroed after every update.
EpochResult sgd_epoch(const GradientFn& gradient, const Eigen::VectorXd& theta0,
                      const DataOrdering& ordering, std::size_t epoch, double learning_rate,
                      const std::optional<std::vector<std::uint8_t>>& mask = std::nullopt);

struct TrainEpochResult {
  FlatParams params;
  TrajectoryLog log;
  double epoch_loss = 0.0;  // mean of the per-batch losses seen during the epoch
};

TrainEpochResult train_epoch(const NetworkSpec& spec, const FlatParams& params,
                             const Dataset& data, const DataOrdering& ordering, std::size_t epoch,
                             double learning_rate,
                             const std::optional<std::vector<std::uint8_t>>& mask = std::nullopt);

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

EvalResult evaluate(const NetworkSpec& spec, const FlatParams& params, const Dataset& data);

}  // namespace kprune
