#include "fuse/screening.hpp"

#include <cmath>

namespace fuse {

AdmittedSet screen(const ConstraintSet& cs, const State& x, const ScreeningConfig& cfg) {
  AdmittedSet out;
  out.raw_size = cs.constraints.size();
  out.indices.reserve(cs.constraints.size());
  out.residuals.reserve(cs.constraints.size());
  for (std::uint32_t j = 0; j < cs.constraints.size(); ++j) {
    const Constraint& c = cs.constraints[j];
    const double r = residual_only(c, x);
    if (cfg.enabled && (c.q < cfg.tau_q || std::abs(r) > cfg.tau_r)) continue;
    out.indices.push_back(j);
    out.residuals.push_back(r);
  }
  return out;
}

}  // namespace fuse
