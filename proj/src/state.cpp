#include "fuse/state.hpp"

#include <cmath>
#include <stdexcept>

#include "fuse/errors.hpp"

namespace fuse {

int block_offset(StateBlock b) {
  switch (b) {
    case StateBlock::kPosition: return blk::kP;
    case StateBlock::kRotation: return blk::kTheta;
    case StateBlock::kExtrinsicPos: return blk::kPil;
    case StateBlock::kExtrinsicRot: return blk::kThetaIl;
    case StateBlock::kVelocity: return blk::kV;
    case StateBlock::kGyroBias: return blk::kBg;
    case StateBlock::kAccelBias: return blk::kBa;
    case StateBlock::kGravity: return blk::kG;
  }
  throw std::invalid_argument("block_offset: unknown block");
}

int block_dim(StateBlock b) {
  return b == StateBlock::kGravity ? 2 : 3;
}

std::array<bool, kTangentDim> expand_mask(const BlockMask& mask) {
  std::array<bool, kTangentDim> out{};
  for (int b = 0; b < kNumBlocks; ++b) {
    const auto sb = static_cast<StateBlock>(b);
    for (int i = 0; i < block_dim(sb); ++i) {
      out[block_offset(sb) + i] = mask[b];
    }
  }
  return out;
}

Rotation3 Rotation3::from_matrix(const Mat3& m, double tol) {
  if (!m.allFinite() || rotation_defect(m) > tol) {
    throw std::invalid_argument("Rotation3: matrix is not orthonormal with det +1");
  }
  return Rotation3(m, 0);
}

Rotation3 Rotation3::operator*(const Rotation3& rhs) const {
  Rotation3 out(m_ * rhs.m_, std::max(compositions_, rhs.compositions_) + 1);
  if (out.compositions_ >= kRenormInterval) {
    out.renormalize();
  }
  return out;
}

UnitVector3 UnitVector3::from_vector(const Vec3& v) {
  const double n = v.norm();
  if (!std::isfinite(n) || n < 1e-12) {
    throw std::invalid_argument("UnitVector3: cannot normalize a near-zero vector");
  }
  return UnitVector3(v / n);
}

Mat3x2 UnitVector3::tangent_basis() const {
  // Cross with the coordinate axis least aligned with v, then complete.
  int k = 0;
  v_.cwiseAbs().minCoeff(&k);
  Vec3 e = Vec3::Zero();
  e(k) = 1.0;
  const Vec3 b1 = v_.cross(e).normalized();
  const Vec3 b2 = v_.cross(b1);  // unit because v_ and b1 are orthonormal
  Mat3x2 basis;
  basis.col(0) = b1;
  basis.col(1) = b2;
  return basis;
}

UnitVector3 UnitVector3::boxplus(const Vec2& delta) const {
  if (!delta.allFinite()) {
    throw std::invalid_argument("UnitVector3::boxplus: non-finite delta");
  }
  const Vec3 omega = tangent_basis() * delta;
  return UnitVector3(so3_exp(omega) * v_);
}

Vec2 UnitVector3::boxminus(const UnitVector3& other) const {
  // Rotation vector carrying *this* onto other, expressed in this basis.
  const Vec3 cross = v_.cross(other.v_);
  const double sin_theta = cross.norm();
  const double cos_theta = v_.dot(other.v_);
  if (sin_theta < 1e-12) {
    if (cos_theta > 0.0) {
      return Vec2::Zero();
    }
    throw DegenerateChartError("UnitVector3::boxminus: antipodal directions");
  }
  const double theta = std::atan2(sin_theta, cos_theta);
  const Vec3 omega = (theta / sin_theta) * cross;
  return tangent_basis().transpose() * omega;
}

State boxplus(const State& x, const TangentVector& delta) {
  if (!delta.allFinite()) {
    throw std::invalid_argument("boxplus: non-finite tangent vector");
  }
  State y = x;
  y.p_wi = x.p_wi + delta.segment<3>(blk::kP);
  y.r_wi = x.r_wi * Rotation3::exp(delta.segment<3>(blk::kTheta));
  y.p_il = x.p_il + delta.segment<3>(blk::kPil);
  y.r_il = x.r_il * Rotation3::exp(delta.segment<3>(blk::kThetaIl));
  y.v_wi = x.v_wi + delta.segment<3>(blk::kV);
  y.b_g = x.b_g + delta.segment<3>(blk::kBg);
  y.b_a = x.b_a + delta.segment<3>(blk::kBa);
  y.gravity_dir = x.gravity_dir.boxplus(delta.segment<2>(blk::kG));
  return y;
}

TangentVector boxminus(const State& y, const State& x) {
  TangentVector d;
  d.segment<3>(blk::kP) = y.p_wi - x.p_wi;
  d.segment<3>(blk::kTheta) = so3_log(x.r_wi.transposed() * y.r_wi.matrix());
  d.segment<3>(blk::kPil) = y.p_il - x.p_il;
  d.segment<3>(blk::kThetaIl) = so3_log(x.r_il.transposed() * y.r_il.matrix());
  d.segment<3>(blk::kV) = y.v_wi - x.v_wi;
  d.segment<3>(blk::kBg) = y.b_g - x.b_g;
  d.segment<3>(blk::kBa) = y.b_a - x.b_a;
  d.segment<2>(blk::kG) = x.gravity_dir.boxminus(y.gravity_dir);
  return d;
}

}  // namespace fuse
