#include "clap/numkit/layers.hpp"

#include <algorithm>
#include <cmath>

namespace clap::numkit {

AffineLayer AffineLayer::glorot(std::size_t in, std::size_t out, Rng& rng) {
  AffineLayer layer(in, out);
  double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  for (double& w : layer.weight.data()) w = rng.uniform(-bound, bound);
  return layer;
}

LayerStack::LayerStack(std::vector<Layer> layers) : layers_(std::move(layers)) {
  validate_dims();
}

void LayerStack::push(Layer layer) {
  layers_.push_back(std::move(layer));
  validate_dims();
}

void LayerStack::validate_dims() const {
  std::size_t dim = 0;  // 0 = not yet pinned
  for (const Layer& l : layers_) {
    if (const auto* a = std::get_if<AffineLayer>(&l)) {
      if (dim != 0 && a->in_dim() != dim)
        throw ConfigError("layer stack: affine input dimension mismatch");
      dim = a->out_dim();
    } else if (const auto* s = std::get_if<StandardizeLayer>(&l)) {
      if (dim != 0 && s->dim() != dim)
        throw ConfigError("layer stack: standardize dimension mismatch");
      dim = s->dim();
    }
  }
}

std::size_t LayerStack::in_dim() const {
  for (const Layer& l : layers_) {
    if (const auto* a = std::get_if<AffineLayer>(&l)) return a->in_dim();
    if (const auto* s = std::get_if<StandardizeLayer>(&l)) return s->dim();
  }
  return 0;
}

std::size_t LayerStack::out_dim() const {
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    if (const auto* a = std::get_if<AffineLayer>(&*it)) return a->out_dim();
    if (const auto* s = std::get_if<StandardizeLayer>(&*it)) return s->dim();
  }
  return 0;
}

namespace {

DenseMatrix affine_forward(const AffineLayer& layer, const DenseMatrix& x) {
  if (x.cols() != layer.in_dim())
    throw ConfigError("affine forward: input dimension mismatch");
  DenseMatrix y = matmul_bt(x, layer.weight);
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < y.cols(); ++j) y(i, j) += layer.bias[j];
  return y;
}

DenseMatrix relu_forward(const DenseMatrix& x) {
  DenseMatrix y = x;
  for (double& v : y.data())
    if (v < 0.0) v = 0.0;
  return y;
}

DenseMatrix standardize_forward(StandardizeLayer& layer, const DenseMatrix& x,
                                bool training, StandardizeCache* cache) {
  if (x.cols() != layer.dim())
    throw ConfigError("standardize forward: input dimension mismatch");
  std::size_t n = x.rows();
  std::size_t d = x.cols();
  DenseMatrix y(n, d);
  std::vector<double> mean(d, 0.0), var(d, 0.0), inv_std(d, 0.0);

  if (training) {
    for (std::size_t j = 0; j < d; ++j) {
      double m = 0.0;
      for (std::size_t i = 0; i < n; ++i) m += x(i, j);
      m /= static_cast<double>(n);
      double v = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double c = x(i, j) - m;
        v += c * c;
      }
      v /= static_cast<double>(n);
      mean[j] = m;
      var[j] = v;
      layer.running_mean[j] =
          (1.0 - layer.momentum) * layer.running_mean[j] + layer.momentum * m;
      layer.running_var[j] =
          (1.0 - layer.momentum) * layer.running_var[j] + layer.momentum * v;
    }
  } else {
    mean = layer.running_mean;
    var = layer.running_var;
  }
  for (std::size_t j = 0; j < d; ++j)
    inv_std[j] = 1.0 / std::sqrt(var[j] + layer.eps);

  DenseMatrix xhat(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double h = (x(i, j) - mean[j]) * inv_std[j];
      xhat(i, j) = h;
      y(i, j) = layer.scale[j] * h + layer.shift[j];
    }
  }
  if (cache) {
    cache->inv_std = std::move(inv_std);
    cache->xhat = std::move(xhat);
    cache->batch_stats = training;
  }
  return y;
}

DenseMatrix standardize_forward_const(const StandardizeLayer& layer,
                                      const DenseMatrix& x) {
  if (x.cols() != layer.dim())
    throw ConfigError("standardize forward: input dimension mismatch");
  DenseMatrix y(x.rows(), x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j) {
    double inv = 1.0 / std::sqrt(layer.running_var[j] + layer.eps);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      y(i, j) =
          layer.scale[j] * (x(i, j) - layer.running_mean[j]) * inv +
          layer.shift[j];
    }
  }
  return y;
}

}  // namespace

DenseMatrix LayerStack::forward_eval(const DenseMatrix& batch) const {
  if (training_)
    throw UsageError("forward_eval called on a stack in training mode");
  DenseMatrix cur = batch;
  for (const Layer& l : layers_) {
    if (const auto* a = std::get_if<AffineLayer>(&l)) {
      cur = affine_forward(*a, cur);
    } else if (std::holds_alternative<ReluLayer>(l)) {
      cur = relu_forward(cur);
    } else {
      cur = standardize_forward_const(std::get<StandardizeLayer>(l), cur);
    }
  }
  return cur;
}

DenseMatrix LayerStack::forward(const DenseMatrix& batch, StackTape& tape) {
  tape.inputs.clear();
  tape.caches.assign(layers_.size(), {});
  tape.inputs.reserve(layers_.size());
  DenseMatrix cur = batch;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    tape.inputs.push_back(cur);
    Layer& l = layers_[k];
    if (auto* a = std::get_if<AffineLayer>(&l)) {
      cur = affine_forward(*a, cur);
    } else if (std::holds_alternative<ReluLayer>(l)) {
      cur = relu_forward(cur);
    } else {
      cur = standardize_forward(std::get<StandardizeLayer>(l), cur, training_,
                                &tape.caches[k]);
    }
  }
  tape.seq = ++seq_;
  return cur;
}

DenseMatrix LayerStack::backward(const StackTape& tape,
                                 const DenseMatrix& grad_output) {
  if (tape.seq != seq_ || tape.inputs.size() != layers_.size())
    throw UsageError("backward: stale tape for this stack");
  DenseMatrix grad = grad_output;
  for (std::size_t idx = layers_.size(); idx-- > 0;) {
    Layer& l = layers_[idx];
    const DenseMatrix& x = tape.inputs[idx];
    if (auto* a = std::get_if<AffineLayer>(&l)) {
      if (grad.cols() != a->out_dim())
        throw UsageError("backward: gradient dimension mismatch");
      // written in place: optimizer ParamRef spans alias these buffers
      DenseMatrix gw = matmul_at(grad, x);
      std::copy(gw.data().begin(), gw.data().end(),
                a->grad_weight.data().begin());
      for (std::size_t j = 0; j < a->out_dim(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < grad.rows(); ++i) s += grad(i, j);
        a->grad_bias[j] = s;
      }
      grad = matmul(grad, a->weight);
    } else if (std::holds_alternative<ReluLayer>(l)) {
      DenseMatrix next(grad.rows(), grad.cols());
      for (std::size_t i = 0; i < grad.size(); ++i)
        next.data()[i] = x.data()[i] > 0.0 ? grad.data()[i] : 0.0;
      grad = std::move(next);
    } else {
      auto* s = std::get_if<StandardizeLayer>(&l);
      const StandardizeCache& cache = tape.caches[idx];
      std::size_t n = grad.rows();
      std::size_t d = grad.cols();
      DenseMatrix next(n, d);
      for (std::size_t j = 0; j < d; ++j) {
        double gscale = 0.0, gshift = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          gscale += grad(i, j) * cache.xhat(i, j);
          gshift += grad(i, j);
        }
        s->grad_scale[j] = gscale;
        s->grad_shift[j] = gshift;
        if (cache.batch_stats) {
          // dx = inv_std/N * (N*dxhat - sum(dxhat) - xhat * sum(dxhat*xhat))
          double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            double dxh = grad(i, j) * s->scale[j];
            sum_dxhat += dxh;
            sum_dxhat_xhat += dxh * cache.xhat(i, j);
          }
          double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t i = 0; i < n; ++i) {
            double dxh = grad(i, j) * s->scale[j];
            next(i, j) = cache.inv_std[j] *
                         (dxh - inv_n * sum_dxhat -
                          cache.xhat(i, j) * inv_n * sum_dxhat_xhat);
          }
        } else {
          for (std::size_t i = 0; i < n; ++i)
            next(i, j) = grad(i, j) * s->scale[j] * cache.inv_std[j];
        }
      }
      grad = std::move(next);
    }
  }
  return grad;
}

void LayerStack::zero_grads() {
  for (Layer& l : layers_) {
    if (auto* a = std::get_if<AffineLayer>(&l)) {
      a->grad_weight.fill(0.0);
      for (double& g : a->grad_bias) g = 0.0;
    } else if (auto* s = std::get_if<StandardizeLayer>(&l)) {
      for (double& g : s->grad_scale) g = 0.0;
      for (double& g : s->grad_shift) g = 0.0;
    }
  }
}

std::vector<ParamRef> LayerStack::param_refs() {
  std::vector<ParamRef> refs;
  for (Layer& l : layers_) {
    if (auto* a = std::get_if<AffineLayer>(&l)) {
      refs.push_back({a->weight.data(), a->grad_weight.data()});
      refs.push_back({a->bias, a->grad_bias});
    } else if (auto* s = std::get_if<StandardizeLayer>(&l)) {
      refs.push_back({s->scale, s->grad_scale});
      refs.push_back({s->shift, s->grad_shift});
    }
  }
  return refs;
}

std::size_t LayerStack::param_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers_) {
    if (const auto* a = std::get_if<AffineLayer>(&l)) {
      n += a->weight.size() + a->bias.size();
    } else if (const auto* s = std::get_if<StandardizeLayer>(&l)) {
      n += 2 * s->dim();
    }
  }
  return n;
}

std::uint64_t LayerStack::state_checksum() const {
  std::uint64_t h = kFnvOffset;
  for (const Layer& l : layers_) {
    if (const auto* a = std::get_if<AffineLayer>(&l)) {
      h = checksum(a->weight.data(), h);
      h = checksum(a->bias, h);
    } else if (const auto* s = std::get_if<StandardizeLayer>(&l)) {
      h = checksum(s->scale, h);
      h = checksum(s->shift, h);
      h = checksum(s->running_mean, h);
      h = checksum(s->running_var, h);
    }
  }
  return h;
}

}  // namespace clap::numkit
