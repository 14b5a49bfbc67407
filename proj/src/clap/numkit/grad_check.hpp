#pragma once

#include <functional>
#include <span>

#include "clap/numkit/layers.hpp"

namespace clap::numkit {

struct GradCheckOptions {
  double step = 1e-5;            // central-difference half step
  std::size_t max_coords = 512;  // above this, a seeded random subset
  std::uint64_t subset_seed = 17;
};

// Compares the supplied analytic gradients against central finite
// differences of loss_fn, perturbing each parameter coordinate in place
// (every coordinate, or a seeded random subset when there are more than
// max_coords). Relative error uses denominator max(|a|, |n|, 1e-8).
// loss_fn must be a deterministic function of the referenced values.
double max_relative_gradient_error(const std::function<double()>& loss_fn,
                                   std::span<const ParamRef> params,
                                   const GradCheckOptions& opts = {});

}  // namespace clap::numkit
