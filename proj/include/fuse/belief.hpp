#pragma once

#include "fuse/state.hpp"
#include "fuse/types.hpp"

namespace fuse {

/// Gaussian belief over the tangent space at a nominal state anchor.
struct GaussianBelief {
  State mean;                      // nominal anchor x_hat
  Mat23 cov = Mat23::Identity();   // tangent-space covariance P

  /// Minimum eigenvalue of the symmetrized covariance (hygiene checks).
  double min_cov_eigenvalue() const;

  /// True when cov is symmetric within tol and its spectrum is above floor.
  bool covariance_ok(double sym_tol = 1e-9, double eig_floor = -1e-10) const;
};

}  // namespace fuse
