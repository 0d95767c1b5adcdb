// SPDX-License-Identifier: Apache-2.0

#include "kprune/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "kprune/random.hpp"

namespace kprune {

namespace {

using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                   Eigen::RowMajor>>;
using RowMajorMutMap =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

Eigen::Index idx(std::size_t n) { return static_cast<Eigen::Index>(n); }

void apply_activation(Activation act, Eigen::MatrixXd& z) {
  switch (act) {
    case Activation::Relu: z = z.cwiseMax(0.0); break;
    case Activation::Tanh: z = z.array().tanh().matrix(); break;
    case Activation::Identity: break;
  }
}

// Derivative expressed through the post-activation value.
void scale_by_derivative(Activation act, const Eigen::MatrixXd& post, Eigen::MatrixXd& delta) {
  switch (act) {
    case Activation::Relu:
      delta = (post.array() > 0.0).select(delta, 0.0);
      break;
    case Activation::Tanh:
      delta.array() *= 1.0 - post.array().square();
      break;
    case Activation::Identity: break;
  }
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp().matrix();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

void check_batch(const NetworkSpec& spec, const Eigen::MatrixXd& outputs,
                 std::span<const int> labels, const Eigen::MatrixXd& targets) {
  const auto out = idx(spec.layer_sizes.back());
  if (outputs.cols() != out) throw Error(Errc::ShapeMismatch, "output width mismatch");
  if (spec.loss == Loss::CrossEntropy) {
    if (labels.size() != static_cast<std::size_t>(outputs.rows())) {
      throw Error(Errc::ShapeMismatch, "label count does not match batch");
    }
    for (int y : labels) {
      if (y < 0 || y >= out) throw Error(Errc::ShapeMismatch, "label out of range");
    }
  } else if (targets.rows() != outputs.rows() || targets.cols() != out) {
    throw Error(Errc::ShapeMismatch, "target shape does not match outputs");
  }
}

}  // namespace

const char* to_string(Activation a) noexcept {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "?";
}

const char* to_string(Loss l) noexcept {
  return l == Loss::CrossEntropy ? "cross_entropy" : "mse";
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  if (s == "identity") return Activation::Identity;
  throw Error(Errc::InvalidArgument, "unknown activation '" + s + "'");
}

Loss parse_loss(const std::string& s) {
  if (s == "cross_entropy") return Loss::CrossEntropy;
  if (s == "mse") return Loss::Mse;
  throw Error(Errc::InvalidArgument, "unknown loss '" + s + "'");
}

NetworkSpec NetworkSpec::uniform(std::vector<std::size_t> sizes, Activation act, Loss loss) {
  NetworkSpec spec;
  const std::size_t hidden = sizes.size() >= 2 ? sizes.size() - 2 : 0;
  spec.layer_sizes = std::move(sizes);
  spec.activations.assign(hidden, act);
  spec.loss = loss;
  spec.validate();
  return spec;
}

void NetworkSpec::validate() const {
  if (layer_sizes.size() < 2) throw Error(Errc::InvalidArgument, "network needs >= 2 layer sizes");
  for (std::size_t s : layer_sizes) {
    if (s == 0) throw Error(Errc::InvalidArgument, "layer sizes must be >= 1");
  }
  if (activations.size() != layer_sizes.size() - 2) {
    throw Error(Errc::InvalidArgument, "need one activation per hidden layer");
  }
}

std::size_t NetworkSpec::num_params() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    n += layer_sizes[l + 1] * (layer_sizes[l] + 1);
  }
  return n;
}

std::string NetworkSpec::canonical() const {
  std::ostringstream os;
  os << "layers=";
  for (std::size_t i = 0; i < layer_sizes.size(); ++i) os << (i ? "," : "") << layer_sizes[i];
  os << ";act=";
  for (std::size_t i = 0; i < activations.size(); ++i) {
    os << (i ? "," : "") << to_string(activations[i]);
  }
  os << ";loss=" << to_string(loss);
  return os.str();
}

std::uint64_t NetworkSpec::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

LayerMap::LayerMap(const NetworkSpec& spec) {
  spec.validate();
  offsets_.push_back(0);
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const std::size_t in = spec.layer_sizes[l];
    const std::size_t out = spec.layer_sizes[l + 1];
    slots_.insert(slots_.end(), in * out, ParamSlot{static_cast<std::uint32_t>(l), ParamKind::Weight});
    slots_.insert(slots_.end(), out, ParamSlot{static_cast<std::uint32_t>(l), ParamKind::Bias});
    offsets_.push_back(slots_.size());
  }
}

LayerMap LayerMap::single(std::size_t n) {
  LayerMap map;
  map.slots_.assign(n, ParamSlot{0, ParamKind::Weight});
  map.offsets_ = {0, n};
  return map;
}

DataOrdering::DataOrdering(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed)
    : dataset_size_(dataset_size), batch_size_(batch_size), seed_(seed) {
  if (dataset_size == 0) throw Error(Errc::InvalidArgument, "empty dataset");
  if (batch_size == 0) throw Error(Errc::InvalidArgument, "batch size must be >= 1");
}

std::vector<std::size_t> DataOrdering::permutation(std::size_t epoch) const {
  std::vector<std::size_t> perm(dataset_size_);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  auto rng = make_rng(seed_, kStreamOrdering, epoch);
  shuffle(std::span<std::size_t>(perm), rng);
  return perm;
}

FlatParams init_params(const NetworkSpec& spec, std::uint64_t seed) {
  FlatParams params{Eigen::VectorXd::Zero(idx(spec.num_params())), LayerMap(spec)};
  auto rng = make_rng(seed, kStreamInit);
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const std::size_t in = spec.layer_sizes[l];
    const std::size_t out = spec.layer_sizes[l + 1];
    const double half_width = std::sqrt(6.0 / static_cast<double>(in + out));
    for (std::size_t i = 0; i < in * out; ++i) {
      params.theta(idx(offset + i)) = half_width * (2.0 * uniform01(rng) - 1.0);
    }
    offset += in * out + out;  // biases stay zero
  }
  return params;
}

ForwardCache forward(const NetworkSpec& spec, const FlatParams& params,
                     const Eigen::MatrixXd& inputs) {
  if (inputs.cols() != idx(spec.layer_sizes.front())) {
    throw Error(Errc::ShapeMismatch, "input width " + std::to_string(inputs.cols()) +
                                         " != " + std::to_string(spec.layer_sizes.front()));
  }
  if (params.size() != spec.num_params()) {
    throw Error(Errc::ShapeMismatch, "parameter count does not match network");
  }
  ForwardCache cache;
  cache.activations.reserve(spec.num_layers() + 1);
  cache.activations.push_back(inputs);
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const auto in = idx(spec.layer_sizes[l]);
    const auto out = idx(spec.layer_sizes[l + 1]);
    const RowMajorMap w(params.theta.data() + offset, out, in);
    const Eigen::Map<const Eigen::RowVectorXd> b(params.theta.data() + offset + out * in, out);
    Eigen::MatrixXd z = cache.activations.back() * w.transpose();
    z.rowwise() += b;
    if (l + 1 < spec.num_layers()) apply_activation(spec.activations[l], z);
    cache.activations.push_back(std::move(z));
    offset += static_cast<std::size_t>(out * in + out);
  }
  return cache;
}

double batch_loss(const NetworkSpec& spec, const Eigen::MatrixXd& outputs,
                  std::span<const int> labels, const Eigen::MatrixXd& targets) {
  check_batch(spec, outputs, labels, targets);
  const auto batch = static_cast<double>(outputs.rows());
  if (outputs.rows() == 0) return 0.0;
  if (spec.loss == Loss::CrossEntropy) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < outputs.rows(); ++i) {
      const double m = outputs.row(i).maxCoeff();
      const double lse = m + std::log((outputs.row(i).array() - m).exp().sum());
      total += lse - outputs(i, labels[static_cast<std::size_t>(i)]);
    }
    return total / batch;
  }
  return (outputs - targets).squaredNorm() / (batch * static_cast<double>(outputs.cols()));
}

Eigen::VectorXd backward(const NetworkSpec& spec, const FlatParams& params,
                         const ForwardCache& cache, std::span<const int> labels,
                         const Eigen::MatrixXd& targets) {
  if (cache.activations.size() != spec.num_layers() + 1) {
    throw Error(Errc::ShapeMismatch, "forward cache does not match network depth");
  }
  if (params.size() != spec.num_params()) {
    throw Error(Errc::ShapeMismatch, "parameter count does not match network");
  }
  const Eigen::MatrixXd& outputs = cache.output();
  check_batch(spec, outputs, labels, targets);
  const auto batch = static_cast<double>(outputs.rows());

  // dL/dz at the output layer.
  Eigen::MatrixXd delta;
  if (spec.loss == Loss::CrossEntropy) {
    delta = softmax_rows(outputs);
    for (Eigen::Index i = 0; i < delta.rows(); ++i) delta(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
    delta /= batch;
  } else {
    delta = 2.0 * (outputs - targets) / (batch * static_cast<double>(outputs.cols()));
  }

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.theta.size());
  std::size_t offset = params.size();
  for (std::size_t l = spec.num_layers(); l-- > 0;) {
    const auto in = idx(spec.layer_sizes[l]);
    const auto out = idx(spec.layer_sizes[l + 1]);
    offset -= static_cast<std::size_t>(out * in + out);
    const Eigen::MatrixXd& a_in = cache.activations[l];
    RowMajorMutMap gw(grad.data() + offset, out, in);
    gw = delta.transpose() * a_in;
    grad.segment(idx(offset) + out * in, out) = delta.colwise().sum().transpose();
    if (l > 0) {
      const RowMajorMap w(params.theta.data() + offset, out, in);
      Eigen::MatrixXd next = delta * w;
      scale_by_derivative(spec.activations[l - 1], a_in, next);
      delta = std::move(next);
    }
  }
  return grad;
}

Dataset gather(const Dataset& data, std::span<const std::size_t> indices) {
  Dataset out;
  out.inputs.resize(idx(indices.size()), data.inputs.cols());
  out.targets.resize(idx(indices.size()), data.targets.cols());
  out.labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto src = idx(indices[i]);
    out.inputs.row(idx(i)) = data.inputs.row(src);
    if (data.targets.rows() > 0) out.targets.row(idx(i)) = data.targets.row(src);
    out.labels[i] = data.labels[indices[i]];
  }
  return out;
}

Eigen::VectorXd average_gradient(const NetworkSpec& spec, const FlatParams& params,
                                 const Dataset& batch) {
  if (batch.size() == 0) throw Error(Errc::InvalidArgument, "scoring batch is empty");
  const ForwardCache cache = forward(spec, params, batch.inputs);
  return backward(spec, params, cache, batch.labels, batch.targets);
}

EpochResult sgd_epoch(const GradientFn& gradient, const Eigen::VectorXd& theta0,
                      const DataOrdering& ordering, std::size_t epoch, double learning_rate,
                      const std::optional<std::vector<std::uint8_t>>& mask) {
  const auto n = theta0.size();
  Eigen::VectorXd keep;
  if (mask) {
    if (mask->size() != static_cast<std::size_t>(n)) {
      throw Error(Errc::LengthMismatch, "mask length does not match parameters");
    }
    keep.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) keep(i) = (*mask)[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  }

  const std::vector<std::size_t> perm = ordering.permutation(epoch);
  const std::size_t iters = ordering.iterations_per_epoch();
  Eigen::MatrixXd snaps(n, idx(iters + 1));
  snaps.col(0) = theta0;

  EpochResult result;
  result.theta = theta0;
  Eigen::VectorXd grad(n);
  double loss_sum = 0.0;
  for (std::size_t it = 0; it < iters; ++it) {
    const std::size_t begin = it * ordering.batch_size();
    const std::size_t end = std::min(begin + ordering.batch_size(), perm.size());
    const std::span<const std::size_t> batch(perm.data() + begin, end - begin);
    grad.setZero();
    loss_sum += gradient(result.theta, batch, grad);
    result.theta -= learning_rate * grad;
    if (mask) result.theta.array() *= keep.array();
    snaps.col(idx(it + 1)) = result.theta;
  }
  result.mean_batch_loss = loss_sum / static_cast<double>(iters);
  result.snapshots = DenseMatrix(std::move(snaps));
  return result;
}

TrainEpochResult train_epoch(const NetworkSpec& spec, const FlatParams& params,
                             const Dataset& data, const DataOrdering& ordering, std::size_t epoch,
                             double learning_rate,
                             const std::optional<std::vector<std::uint8_t>>& mask) {
  if (ordering.dataset_size() != data.size()) {
    throw Error(Errc::ShapeMismatch, "ordering does not cover the dataset");
  }
  FlatParams work = params;
  const GradientFn grad_fn = [&](const Eigen::VectorXd& theta, std::span<const std::size_t> batch,
                                 Eigen::VectorXd& grad) {
    work.theta = theta;
    const Dataset b = gather(data, batch);
    const ForwardCache cache = forward(spec, work, b.inputs);
    grad = backward(spec, work, cache, b.labels, b.targets);
    return batch_loss(spec, cache.output(), b.labels, b.targets);
  };
  EpochResult epoch_result = sgd_epoch(grad_fn, params.theta, ordering, epoch, learning_rate, mask);

  TrainEpochResult out;
  out.params = FlatParams{std::move(epoch_result.theta), params.layer_map};
  out.log.epoch = epoch;
  out.log.seed = ordering.seed();
  out.log.spec_hash = spec.hash();
  out.log.snapshots = std::move(epoch_result.snapshots);
  out.epoch_loss = epoch_result.mean_batch_loss;
  return out;
}

EvalResult evaluate(const NetworkSpec& spec, const FlatParams& params, const Dataset& data) {
  EvalResult result;
  if (data.size() == 0) return result;
  const ForwardCache cache = forward(spec, params, data.inputs);
  const Eigen::MatrixXd& out = cache.output();
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < out.cols(); ++j) {
      if (out(i, j) > out(i, best)) best = j;
    }
    if (best == data.labels[static_cast<std::size_t>(i)]) ++correct;
  }
  result.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  result.mean_loss = batch_loss(spec, out, data.labels, data.targets);
  return result;
}

}  // namespace kprune
