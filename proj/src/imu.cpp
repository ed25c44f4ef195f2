#include "fuse/imu.hpp"

#include <Eigen/Dense>
#include <stdexcept>

namespace fuse {

void NoiseConfig::validate() const {
  if (!(sigma_g > 0.0 && sigma_a > 0.0 && sigma_bg > 0.0 && sigma_ba > 0.0)) {
    throw std::invalid_argument("NoiseConfig: all densities must be positive");
  }
}

namespace {
void check_dt(double dt) {
  if (!(dt > 0.0 && dt <= 0.1)) {
    throw std::invalid_argument("propagation: dt must lie in (0, 0.1] s");
  }
}
}  // namespace

State propagate_nominal(const State& x, const ImuSample& u, double dt,
                        double gravity_magnitude) {
  check_dt(dt);
  const Vec3 omega_hat = u.omega - x.b_g;
  const Vec3 accel_body = u.acc - x.b_a;
  const Vec3 accel_world = x.r_wi * accel_body + x.gravity_vec(gravity_magnitude);

  State out = x;
  out.p_wi = x.p_wi + x.v_wi * dt + 0.5 * accel_world * dt * dt;
  out.v_wi = x.v_wi + accel_world * dt;
  out.r_wi = x.r_wi * Rotation3::exp(omega_hat * dt);
  return out;
}

PropagationJacobians error_state_jacobians(const State& x, const ImuSample& u, double dt,
                                           double gravity_magnitude) {
  check_dt(dt);
  const Vec3 omega_hat = (u.omega - x.b_g) * dt;
  const Vec3 accel_body = u.acc - x.b_a;
  const Mat3 R = x.r_wi.matrix();
  const Mat3 jr = so3_right_jacobian(omega_hat);
  const Mat3 accel_skew = R * skew(accel_body);
  // d g_vec / d(delta g) in the chart at the current gravity direction.
  const Mat3x2 dgrav =
      -gravity_magnitude * skew(x.gravity_dir.vector()) * x.gravity_dir.tangent_basis();

  PropagationJacobians jac;
  Mat23& F = jac.F;

  F.block<3, 3>(blk::kP, blk::kV) = Mat3::Identity() * dt;
  F.block<3, 3>(blk::kP, blk::kTheta) = -0.5 * dt * dt * accel_skew;
  F.block<3, 3>(blk::kP, blk::kBa) = -0.5 * dt * dt * R;
  F.block<3, 2>(blk::kP, blk::kG) = 0.5 * dt * dt * dgrav;

  F.block<3, 3>(blk::kTheta, blk::kTheta) = so3_exp(omega_hat).transpose();
  F.block<3, 3>(blk::kTheta, blk::kBg) = -jr * dt;

  F.block<3, 3>(blk::kV, blk::kTheta) = -accel_skew * dt;
  F.block<3, 3>(blk::kV, blk::kBa) = -R * dt;
  F.block<3, 2>(blk::kV, blk::kG) = dgrav * dt;

  Mat23x12& G = jac.G;
  G.block<3, 3>(blk::kTheta, 0) = -jr;                       // n_g
  G.block<3, 3>(blk::kP, 3) = -0.5 * dt * R;                 // n_a (second order)
  G.block<3, 3>(blk::kV, 3) = -R;                            // n_a
  G.block<3, 3>(blk::kBg, 6) = Mat3::Identity();             // n_bg
  G.block<3, 3>(blk::kBa, 9) = Mat3::Identity();             // n_ba
  return jac;
}

Mat12 process_noise_discrete(const NoiseConfig& noise, double dt) {
  noise.validate();
  check_dt(dt);
  Mat12 q = Mat12::Zero();
  q.diagonal().segment<3>(0).setConstant(noise.sigma_g * noise.sigma_g * dt);
  q.diagonal().segment<3>(3).setConstant(noise.sigma_a * noise.sigma_a * dt);
  q.diagonal().segment<3>(6).setConstant(noise.sigma_bg * noise.sigma_bg * dt);
  q.diagonal().segment<3>(9).setConstant(noise.sigma_ba * noise.sigma_ba * dt);
  return q;
}

Mat23 propagate_covariance(const Mat23& P, const PropagationJacobians& jac, const Mat12& Qd,
                           double dt) {
  check_dt(dt);
  const Mat23 Psym = 0.5 * (P + P.transpose());
  Eigen::SelfAdjointEigenSolver<Mat23> eig(Psym, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-8) {
    throw std::invalid_argument("propagate_covariance: input covariance is not PSD");
  }
  const Mat23 out = jac.F * Psym * jac.F.transpose() + jac.G * Qd * jac.G.transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace fuse
