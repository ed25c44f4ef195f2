#pragma once

#include "fuse/types.hpp"

namespace fuse {

/// Skew-symmetric (cross-product) matrix of v.
inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

/// Exponential map so(3) -> SO(3), Rodrigues form with a series branch
/// below ||omega|| < 1e-8. Throws std::invalid_argument on non-finite input.
Mat3 so3_exp(const Vec3& omega);

/// Principal logarithm SO(3) -> so(3), ||result|| <= pi. Stable near 0 and
/// pi. Throws std::invalid_argument if R is not orthonormal within 1e-6.
Vec3 so3_log(const Mat3& R);

/// Right Jacobian of SO(3): exp(omega + d) ~= exp(omega) exp(Jr(omega) d).
Mat3 so3_right_jacobian(const Vec3& omega);

/// Nearest rotation matrix in Frobenius norm (polar projection).
Mat3 project_to_so3(const Mat3& M);

/// Frobenius distance of R*R^T from the identity plus |det - 1|.
double rotation_defect(const Mat3& R);

}  // namespace fuse
