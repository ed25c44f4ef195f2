#pragma once

#include <array>
#include <cstdint>

#include "fuse/so3.hpp"
#include "fuse/types.hpp"

namespace fuse {

// Tangent-vector block layout (frozen contract; every F, G, H, Lambda
// matrix in the project uses these offsets):
//   [0..2]   delta p_WI        (m)
//   [3..5]   delta theta_WI    (rad, right perturbation R*exp(dtheta))
//   [6..8]   delta p_IL        (m, extrinsic)
//   [9..11]  delta theta_IL    (rad, extrinsic)
//   [12..14] delta v_WI        (m/s)
//   [15..17] delta b_g         (rad/s)
//   [18..20] delta b_a         (m/s^2)
//   [21..22] delta g           (2-dof S^2 chart at the linearization point)
namespace blk {
inline constexpr int kP = 0;
inline constexpr int kTheta = 3;
inline constexpr int kPil = 6;
inline constexpr int kThetaIl = 9;
inline constexpr int kV = 12;
inline constexpr int kBg = 15;
inline constexpr int kBa = 18;
inline constexpr int kG = 21;
}  // namespace blk

enum class StateBlock : int {
  kPosition = 0,
  kRotation = 1,
  kExtrinsicPos = 2,
  kExtrinsicRot = 3,
  kVelocity = 4,
  kGyroBias = 5,
  kAccelBias = 6,
  kGravity = 7,
};
inline constexpr int kNumBlocks = 8;

/// Per-block freeze mask; frozen blocks are held fixed by estimator updates.
using BlockMask = std::array<bool, kNumBlocks>;

/// Offset and width of a block in the 23-d tangent vector.
int block_offset(StateBlock b);
int block_dim(StateBlock b);

/// Expand a per-block mask into 23 per-dimension flags.
std::array<bool, kTangentDim> expand_mask(const BlockMask& mask);

/// Rotation stored as an orthonormal 3x3 matrix. Composition chains are
/// renormalized by polar projection every kRenormInterval compositions.
class Rotation3 {
 public:
  static constexpr int kRenormInterval = 1000;

  Rotation3() : m_(Mat3::Identity()) {}

  /// Validates orthonormality within tol (Frobenius) and det = +1.
  static Rotation3 from_matrix(const Mat3& m, double tol = 1e-9);

  static Rotation3 exp(const Vec3& omega) { return Rotation3(so3_exp(omega), 1); }
  static Rotation3 identity() { return Rotation3(); }

  Vec3 log() const { return so3_log(m_); }

  Rotation3 operator*(const Rotation3& rhs) const;
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

  Rotation3 inverse() const { return Rotation3(m_.transpose(), compositions_); }

  const Mat3& matrix() const { return m_; }
  Mat3 transposed() const { return m_.transpose(); }
  int compositions() const { return compositions_; }

  void renormalize() {
    m_ = project_to_so3(m_);
    compositions_ = 0;
  }

 private:
  Rotation3(const Mat3& m, int compositions) : m_(m), compositions_(compositions) {}

  Mat3 m_;
  int compositions_ = 0;
};

/// Unit vector on S^2 perturbed through a 2-dof tangent chart.
class UnitVector3 {
 public:
  UnitVector3() : v_(0, 0, 1) {}

  /// Normalizes the input; throws std::invalid_argument on a near-zero vector.
  static UnitVector3 from_vector(const Vec3& v);

  const Vec3& vector() const { return v_; }

  /// Orthonormal completion [b1 b2] of v (columns span the tangent plane,
  /// [b1 b2 v] right-handed). Recomputed at each call, deterministic.
  Mat3x2 tangent_basis() const;

  /// Retraction: rotate v about basis*delta (a tangent-plane rotation vector).
  UnitVector3 boxplus(const Vec2& delta) const;

  /// Inverse retraction expressed in *this*'s tangent basis; the result norm
  /// equals the geodesic angle to other. Throws DegenerateChartError for
  /// antipodal directions.
  Vec2 boxminus(const UnitVector3& other) const;

 private:
  explicit UnitVector3(const Vec3& v) : v_(v) {}
  Vec3 v_;
};

/// Compound-manifold state of the LiDAR-IMU estimator.
struct State {
  Vec3 p_wi = Vec3::Zero();          // IMU position in world (m)
  Rotation3 r_wi;                    // IMU orientation in world
  Vec3 p_il = Vec3::Zero();          // LiDAR position in IMU frame (m)
  Rotation3 r_il;                    // LiDAR orientation in IMU frame
  Vec3 v_wi = Vec3::Zero();          // IMU velocity in world (m/s)
  Vec3 b_g = Vec3::Zero();           // gyroscope bias (rad/s)
  Vec3 b_a = Vec3::Zero();           // accelerometer bias (m/s^2)
  UnitVector3 gravity_dir;           // gravity direction on S^2 (z-up world: -z)

  State() { gravity_dir = UnitVector3::from_vector(Vec3(0, 0, -1)); }

  /// Gravity vector in m/s^2 given the fixed magnitude.
  Vec3 gravity_vec(double magnitude = kDefaultGravityMagnitude) const {
    return magnitude * gravity_dir.vector();
  }
};

using TangentVector = Vec23;

/// Manifold retraction: vector blocks add, rotation blocks right-multiply by
/// so3_exp, the gravity block retracts on S^2. Throws std::invalid_argument
/// on non-finite delta.
State boxplus(const State& x, const TangentVector& delta);

/// Blockwise inverse of boxplus; the gravity difference is expressed in x's
/// tangent basis.
TangentVector boxminus(const State& y, const State& x);

}  // namespace fuse
