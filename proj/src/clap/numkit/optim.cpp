#include "clap/numkit/optim.hpp"

#include <cmath>

namespace clap::numkit {

double SgdConfig::lr(int epoch, ParamGroup group) const {
  double base =
      group == ParamGroup::kBackbone ? base_lr_backbone : base_lr_heads;
  int drops = epoch / decay_every_epochs;
  // Repeated multiplication keeps the trace bit-identical to the update
  // sequence a trainer would apply incrementally.
  double lr = base;
  for (int i = 0; i < drops; ++i) lr *= decay_gamma;
  return lr;
}

void SgdConfig::validate() const {
  if (!(base_lr_backbone > 0.0) || !(base_lr_heads > 0.0))
    throw ConfigError("sgd: base learning rates must be positive");
  if (!(decay_gamma > 0.0) || decay_gamma > 1.0)
    throw ConfigError("sgd: decay_gamma must be in (0, 1]");
  if (decay_every_epochs < 1)
    throw ConfigError("sgd: decay_every_epochs must be >= 1");
}

void sgd_step(std::span<GroupedParams> groups, int epoch,
              const SgdConfig& cfg) {
  cfg.validate();
  for (const GroupedParams& g : groups) {
    for (const ParamRef& p : g.params) {
      if (p.value.size() != p.grad.size())
        throw UsageError("sgd_step: value/grad length mismatch");
      for (double gv : p.grad) {
        if (!std::isfinite(gv))
          throw NumericError("sgd_step: non-finite gradient, step rejected");
      }
    }
  }
  for (GroupedParams& g : groups) {
    double lr = cfg.lr(epoch, g.group);
    for (ParamRef& p : g.params) {
      for (std::size_t i = 0; i < p.value.size(); ++i)
        p.value[i] -= lr * p.grad[i];
    }
  }
}

}  // namespace clap::numkit
