#pragma once

#include <optional>
#include <string>

#include "fuse/association.hpp"
#include "fuse/belief.hpp"
#include "fuse/degeneracy.hpp"
#include "fuse/screening.hpp"

namespace fuse {

enum class BackendKind { kEskf, kIeskf, kNano };

BackendKind backend_kind_from_string(const std::string& s);
std::string to_string(BackendKind k);

/// Exteroceptive evidence for one update cycle.
struct UpdateBatch {
  ConstraintSet cs;
  AdmittedSet admitted;
  double meas_var = 0.05 * 0.05;  // isotropic per-constraint variance (m^2)
  std::optional<GatingResult> gate;
};

struct BackendConfig {
  BackendKind kind = BackendKind::kIeskf;
  int max_iters = 4;        // ieskf / nano
  double conv_tol = 1e-6;   // tangent-norm step tolerance
  double nano_step = 1.0;   // natural-gradient step in (0, 1]
  BlockMask freeze = {{false, false, true, true, false, false, false, false}};

  void validate() const;
};

struct UpdateResult {
  GaussianBelief belief;
  bool degenerate_scan = false;  // empty admitted set, belief unchanged
  int iterations = 0;
  bool converged = true;
};

/// Single entry point; dispatches on cfg.kind. Switching the kind changes no
/// other module's inputs or outputs. Frozen blocks keep their mean bits and
/// covariance rows/columns. When a gate is present the correction increment
/// is gated before retraction and the covariance update preserves prior
/// variance along fully gated directions.
UpdateResult update(const GaussianBelief& belief, const UpdateBatch& batch,
                    const BackendConfig& cfg);

/// Single linearization at the anchor; Joseph-form covariance.
UpdateResult eskf_update(const GaussianBelief& belief, const UpdateBatch& batch,
                         const BackendConfig& cfg);

/// Iterated relinearization around updated nominal states, prior transported
/// to the original anchor; covariance updated once at convergence. Throws
/// DivergedError when the step norm doubles three iterations in a row.
UpdateResult ieskf_update(const GaussianBelief& belief, const UpdateBatch& batch,
                          const BackendConfig& cfg);

/// Natural-gradient descent on the KL-plus-expected-log-likelihood energy
/// over (mu, P), with the expected log-likelihood linearized at the running
/// mean. Exact Kalman posterior in the linear-Gaussian case.
UpdateResult nano_update(const GaussianBelief& belief, const UpdateBatch& batch,
                         const BackendConfig& cfg);

/// Stacked residual vector and Jacobian of the admitted constraints at x.
void stack_residuals(const ConstraintSet& cs, const AdmittedSet& admitted, const State& x,
                     VecX& r, MatX23& H);

}  // namespace fuse
