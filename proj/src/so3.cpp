#include "fuse/so3.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace fuse {

namespace {
constexpr double kSmallAngle = 1e-8;
}  // namespace

Mat3 so3_exp(const Vec3& omega) {
  if (!omega.allFinite()) {
    throw std::invalid_argument("so3_exp: non-finite rotation vector");
  }
  const double theta = omega.norm();
  const Mat3 w = skew(omega);
  if (theta < kSmallAngle) {
    // Second-order series; error O(theta^3) is below double precision here.
    return Mat3::Identity() + w + 0.5 * w * w;
  }
  const double s = std::sin(theta) / theta;
  const double c = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + s * w + c * w * w;
}

Vec3 so3_log(const Mat3& R) {
  if (rotation_defect(R) > 1e-6) {
    throw std::invalid_argument("so3_log: input is not a rotation matrix");
  }
  const double cos_theta = std::clamp((R.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  const Vec3 axis_raw(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));

  if (theta < 1e-6) {
    // R ~= I + skew(omega); axis_raw = 2*omega to first order.
    return 0.5 * axis_raw;
  }
  if (theta > M_PI - 1e-6) {
    // Near pi the off-diagonal difference vanishes; recover the axis from
    // the symmetric part: R ~= I + (1 - cos)*aa^T ... -> aa^T = (R + I)/2 at pi.
    Mat3 s = 0.5 * (R + Mat3::Identity());
    int i = 0;
    s.diagonal().maxCoeff(&i);
    Vec3 axis = s.col(i) / std::sqrt(std::max(s(i, i), 1e-12));
    axis.normalize();
    // Fix the sign so that the result is consistent with axis_raw when the
    // latter is not exactly zero.
    if (axis_raw.dot(axis) < 0.0) axis = -axis;
    return theta * axis;
  }
  return (0.5 * theta / std::sin(theta)) * axis_raw;
}

Mat3 so3_right_jacobian(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 w = skew(omega);
  if (theta < kSmallAngle) {
    return Mat3::Identity() - 0.5 * w + (1.0 / 6.0) * w * w;
  }
  const double t2 = theta * theta;
  const double a = (1.0 - std::cos(theta)) / t2;
  const double b = (theta - std::sin(theta)) / (t2 * theta);
  return Mat3::Identity() - a * w + b * w * w;
}

Mat3 project_to_so3(const Mat3& M) {
  Eigen::JacobiSVD<Mat3> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 R = svd.matrixU() * svd.matrixV().transpose();
  if (R.determinant() < 0.0) {
    Mat3 d = Mat3::Identity();
    d(2, 2) = -1.0;
    R = svd.matrixU() * d * svd.matrixV().transpose();
  }
  return R;
}

double rotation_defect(const Mat3& R) {
  return (R * R.transpose() - Mat3::Identity()).norm() + std::abs(R.determinant() - 1.0);
}

}  // namespace fuse
