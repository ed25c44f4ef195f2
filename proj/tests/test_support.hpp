// Shared test oracles: finite differences, brute-force kNN, random state
// draws. These stay independent of the implementation paths they check.
#pragma once

#include <random>
#include <vector>

#include "fuse/association.hpp"
#include "fuse/imu.hpp"
#include "fuse/state.hpp"

namespace fuse::test {

inline Vec3 random_vec3(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  return Vec3(g(rng), g(rng), g(rng));
}

inline State random_state(std::mt19937_64& rng) {
  State x;
  x.p_wi = random_vec3(rng, 2.0);
  x.r_wi = Rotation3::exp(random_vec3(rng, 0.6));
  x.p_il = random_vec3(rng, 0.1);
  x.r_il = Rotation3::exp(random_vec3(rng, 0.2));
  x.v_wi = random_vec3(rng, 1.0);
  x.b_g = random_vec3(rng, 0.01);
  x.b_a = random_vec3(rng, 0.05);
  x.gravity_dir = UnitVector3::from_vector(Vec3(0, 0, -1)).boxplus(
      Vec2(std::normal_distribution<double>(0, 0.05)(rng),
           std::normal_distribution<double>(0, 0.05)(rng)));
  return x;
}

/// Central finite differences of the propagation map in the tangent space:
/// column i approximates d/dh boxminus(prop(x boxplus h e_i), prop(x)).
inline Mat23 fd_propagation_jacobian(const State& x, const ImuSample& u, double dt,
                                     double h = 1e-6) {
  const State nominal_next = propagate_nominal(x, u, dt);
  Mat23 F;
  for (int i = 0; i < kTangentDim; ++i) {
    TangentVector e = TangentVector::Zero();
    e(i) = h;
    const State plus = propagate_nominal(boxplus(x, e), u, dt);
    e(i) = -h;
    const State minus = propagate_nominal(boxplus(x, e), u, dt);
    F.col(i) = (boxminus(plus, nominal_next) - boxminus(minus, nominal_next)) / (2.0 * h);
  }
  return F;
}

/// Central finite differences of the point-to-plane residual.
inline RowVec23 fd_residual_jacobian(const Constraint& c, const State& x, double h = 1e-6) {
  RowVec23 H;
  for (int i = 0; i < kTangentDim; ++i) {
    TangentVector e = TangentVector::Zero();
    e(i) = h;
    const double plus = residual_only(c, boxplus(x, e));
    e(i) = -h;
    const double minus = residual_only(c, boxplus(x, e));
    H(i) = (plus - minus) / (2.0 * h);
  }
  return H;
}

/// Brute-force kNN with (distance^2, insertion order) ordering.
inline std::vector<Vec3> brute_force_knn(const std::vector<Vec3>& points, const Vec3& q, int k) {
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    scored.emplace_back((points[i] - q).squaredNorm(), i);
  }
  std::sort(scored.begin(), scored.end());
  std::vector<Vec3> out;
  const std::size_t n = std::min<std::size_t>(k, scored.size());
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(points[scored[i].second]);
  return out;
}

}  // namespace fuse::test
