#include "clap/numkit/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace clap::numkit {

double max_relative_gradient_error(const std::function<double()>& loss_fn,
                                   std::span<const ParamRef> params,
                                   const GradCheckOptions& opts) {
  if (!(opts.step > 1e-7 && opts.step < 1e-3))
    throw UsageError("grad check: step must lie in (1e-7, 1e-3)");

  struct Coord {
    std::size_t param;
    std::size_t offset;
  };
  std::vector<Coord> coords;
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (params[p].value.size() != params[p].grad.size())
      throw UsageError("grad check: value/grad length mismatch");
    for (std::size_t k = 0; k < params[p].value.size(); ++k)
      coords.push_back({p, k});
  }

  if (coords.size() > opts.max_coords) {
    Rng rng(opts.subset_seed);
    // Partial Fisher-Yates: the first max_coords entries become the sample.
    for (std::size_t i = 0; i < opts.max_coords; ++i) {
      std::size_t j = static_cast<std::size_t>(rng.uniform_int(
          static_cast<std::int64_t>(i),
          static_cast<std::int64_t>(coords.size() - 1)));
      std::swap(coords[i], coords[j]);
    }
    coords.resize(opts.max_coords);
  }

  double max_rel = 0.0;
  for (const Coord& c : coords) {
    double& v = params[c.param].value[c.offset];
    double saved = v;
    v = saved + opts.step;
    double plus = loss_fn();
    v = saved - opts.step;
    double minus = loss_fn();
    v = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus))
      throw NumericError("grad check: non-finite loss");
    double numeric = (plus - minus) / (2.0 * opts.step);
    double analytic = params[c.param].grad[c.offset];
    double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
    max_rel = std::max(max_rel, std::fabs(analytic - numeric) / denom);
  }
  return max_rel;
}

}  // namespace clap::numkit
