#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "clap/numkit/dense.hpp"
#include "clap/rng.hpp"

namespace clap::numkit {

// A parameter tensor paired with its gradient buffer, in a fixed traversal
// order. The optimizer and the gradient checker both walk these.
struct ParamRef {
  std::span<double> value;
  std::span<double> grad;
};

// y = x W^T + b, W is (out, in).
struct AffineLayer {
  DenseMatrix weight;
  std::vector<double> bias;
  DenseMatrix grad_weight;
  std::vector<double> grad_bias;

  AffineLayer(std::size_t in, std::size_t out)
      : weight(out, in, 0.0),
        bias(out, 0.0),
        grad_weight(out, in, 0.0),
        grad_bias(out, 0.0) {}

  // Uniform in +/- sqrt(6 / (fan_in + fan_out)), zero bias.
  static AffineLayer glorot(std::size_t in, std::size_t out, Rng& rng);

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
};

struct ReluLayer {};

// Per-column standardization: batch statistics in training mode, frozen
// running statistics in eval mode (where the layer is a fixed affine map).
struct StandardizeLayer {
  std::vector<double> running_mean;
  std::vector<double> running_var;  // entries stay > 0
  std::vector<double> scale;
  std::vector<double> shift;
  std::vector<double> grad_scale;
  std::vector<double> grad_shift;
  double eps = 1e-5;
  double momentum = 0.1;

  explicit StandardizeLayer(std::size_t dim, double eps_ = 1e-5,
                            double momentum_ = 0.1)
      : running_mean(dim, 0.0),
        running_var(dim, 1.0),
        scale(dim, 1.0),
        shift(dim, 0.0),
        grad_scale(dim, 0.0),
        grad_shift(dim, 0.0),
        eps(eps_),
        momentum(momentum_) {}

  std::size_t dim() const { return scale.size(); }
};

using Layer = std::variant<AffineLayer, ReluLayer, StandardizeLayer>;

struct StandardizeCache {
  std::vector<double> inv_std;
  DenseMatrix xhat;
  bool batch_stats = false;  // true when training-mode statistics were used
};

// Activation record from one forward call; consumed by exactly that
// stack's next backward call.
struct StackTape {
  std::vector<DenseMatrix> inputs;       // input to layer k
  std::vector<StandardizeCache> caches;  // parallel; unused for non-BN layers
  std::uint64_t seq = 0;
};

class LayerStack {
 public:
  LayerStack() = default;
  explicit LayerStack(std::vector<Layer> layers);

  void push(Layer layer);
  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return layers_[i]; }
  const Layer& layer(std::size_t i) const { return layers_[i]; }

  // Dimension of the first / last shaped layer; 0 when none.
  std::size_t in_dim() const;
  std::size_t out_dim() const;

  bool training() const { return training_; }
  void set_training(bool t) { training_ = t; }

  // Eval-only fast path; requires training() == false.
  DenseMatrix forward_eval(const DenseMatrix& batch) const;
  // Records a tape for backward. Updates running statistics when training.
  DenseMatrix forward(const DenseMatrix& batch, StackTape& tape);
  // Fills layer gradient buffers (overwrites) and returns grad wrt input.
  DenseMatrix backward(const StackTape& tape, const DenseMatrix& grad_output);

  void zero_grads();
  std::vector<ParamRef> param_refs();
  std::size_t param_count() const;

  // FNV over parameter and running-statistic values, in traversal order.
  std::uint64_t state_checksum() const;

 private:
  void validate_dims() const;

  std::vector<Layer> layers_;
  bool training_ = false;
  std::uint64_t seq_ = 0;
};

}  // namespace clap::numkit
