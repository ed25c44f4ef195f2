#pragma once

#include "fuse/state.hpp"
#include "fuse/types.hpp"

namespace fuse {

struct ImuSample {
  double t = 0.0;
  Vec3 omega = Vec3::Zero();  // measured angular rate (rad/s)
  Vec3 acc = Vec3::Zero();    // measured specific force (m/s^2)
};

/// Continuous-time noise densities of the IMU model.
struct NoiseConfig {
  double sigma_g = 2e-3;    // rad/s/sqrt(Hz)
  double sigma_a = 2e-2;    // m/s^2/sqrt(Hz)
  double sigma_bg = 2e-5;   // rad/s^2/sqrt(Hz)
  double sigma_ba = 2e-4;   // m/s^3/sqrt(Hz)

  void validate() const;
};

/// Discrete-time tangent-space error dynamics dx' = F dx + G w with noise
/// order w = (n_g, n_a, n_bg, n_ba).
struct PropagationJacobians {
  Mat23 F = Mat23::Identity();
  Mat23x12 G = Mat23x12::Zero();
};

/// Strapdown step: R <- R exp((w - b_g) dt), v <- v + (R(a - b_a) + g) dt,
/// p <- p + v dt + 0.5 (R(a - b_a) + g) dt^2. Biases, extrinsics and gravity
/// are unchanged. Requires 0 < dt <= 0.1.
State propagate_nominal(const State& x, const ImuSample& u, double dt,
                        double gravity_magnitude = kDefaultGravityMagnitude);

/// First-order F, G consistent with propagate_nominal under boxplus
/// perturbation.
PropagationJacobians error_state_jacobians(const State& x, const ImuSample& u, double dt,
                                           double gravity_magnitude = kDefaultGravityMagnitude);

/// Q_d = diag(sigma^2) * dt, blocks in the (n_g, n_a, n_bg, n_ba) order.
Mat12 process_noise_discrete(const NoiseConfig& noise, double dt);

/// F P F^T + G Q_d G^T, symmetrized. Rejects inputs whose minimum eigenvalue
/// is below -1e-8.
Mat23 propagate_covariance(const Mat23& P, const PropagationJacobians& jac, const Mat12& Qd,
                           double dt);

}  // namespace fuse
