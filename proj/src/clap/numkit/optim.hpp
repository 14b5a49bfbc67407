#pragma once

#include <span>
#include <vector>

#include "clap/numkit/layers.hpp"

namespace clap::numkit {

enum class ParamGroup { kBackbone, kHeads };

// Step-decayed SGD: lr(e) = base * gamma^floor(e / decay_every_epochs),
// with separate base rates for the backbone and the head group.
struct SgdConfig {
  double base_lr_backbone = 1e-4;
  double base_lr_heads = 2e-2;
  double decay_gamma = 0.01;
  int decay_every_epochs = 2;

  double lr(int epoch, ParamGroup group) const;
  void validate() const;
};

struct GroupedParams {
  ParamGroup group;
  std::vector<ParamRef> params;
};

// p <- p - lr(epoch, group) * grad. Rejects the whole step when any
// gradient entry is non-finite.
void sgd_step(std::span<GroupedParams> groups, int epoch,
              const SgdConfig& cfg);

}  // namespace clap::numkit
