#pragma once

#include <cstdint>
#include <vector>

#include "fuse/association.hpp"
#include "fuse/state.hpp"

namespace fuse {

struct ScreeningConfig {
  double tau_q = 0.9;   // structural quality threshold, in [0, 1]
  double tau_r = 0.3;   // residual magnitude bound (m)
  bool enabled = true;  // disabled screening admits everything (ablation)
};

/// Indices admitted by screening plus the residuals evaluated there.
struct AdmittedSet {
  std::vector<std::uint32_t> indices;      // into the raw ConstraintSet
  std::vector<double> residuals;           // r_j at the screening pose
  std::size_t raw_size = 0;
};

/// Admissibility filter: keep j with q_j >= tau_q and |r_j(x)| <= tau_r.
/// Residuals are evaluated at the propagated (pre-update) pose.
AdmittedSet screen(const ConstraintSet& cs, const State& x, const ScreeningConfig& cfg);

}  // namespace fuse
