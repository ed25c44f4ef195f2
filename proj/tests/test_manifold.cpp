#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "fuse/errors.hpp"
#include "fuse/state.hpp"
#include "test_support.hpp"

using namespace fuse;

TEST_CASE("so3_exp basics") {
  CHECK((so3_exp(Vec3::Zero()) - Mat3::Identity()).norm() == doctest::Approx(0.0));

  // 90 degrees about z maps x onto y.
  const Mat3 r = so3_exp(Vec3(0, 0, M_PI / 2));
  CHECK((r * Vec3(1, 0, 0) - Vec3(0, 1, 0)).norm() < 1e-12);

  CHECK_THROWS_AS(so3_exp(Vec3(std::nan(""), 0, 0)), std::invalid_argument);
}

TEST_CASE("so3 log/exp round trips") {
  const Vec3 omega(0.3, -0.2, 0.1);
  CHECK((so3_log(so3_exp(omega)) - omega).norm() < 1e-10);

  CHECK(so3_log(Mat3::Identity()).norm() == doctest::Approx(0.0));

  // pi about x is the boundary branch.
  const Vec3 pi_x = so3_log(so3_exp(Vec3(M_PI, 0, 0)));
  CHECK(std::abs(pi_x.norm() - M_PI) < 1e-9);
  CHECK(std::abs(std::abs(pi_x.x()) - M_PI) < 1e-9);

  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    const Mat3 r = so3_exp(test::random_vec3(rng, 1.2));
    CHECK((so3_exp(so3_log(r)) - r).norm() < 1e-9);
  }

  // Near-pi random axes.
  for (int i = 0; i < 50; ++i) {
    const Vec3 axis = test::random_vec3(rng).normalized();
    const Mat3 r = so3_exp(axis * (M_PI - 1e-8));
    CHECK((so3_exp(so3_log(r)) - r).norm() < 1e-8);
  }

  CHECK_THROWS_AS(so3_log(2.0 * Mat3::Identity()), std::invalid_argument);
}

TEST_CASE("small-angle series branch") {
  const Vec3 tiny(1e-10, -2e-10, 5e-11);
  const Mat3 r = so3_exp(tiny);
  CHECK((so3_log(r) - tiny).norm() < 1e-15);
}

TEST_CASE("rotation invariants under long composition chains") {
  std::mt19937_64 rng(11);
  Rotation3 r;
  for (int i = 0; i < 20000; ++i) {
    r = r * Rotation3::exp(test::random_vec3(rng, 0.05));
  }
  CHECK(rotation_defect(r.matrix()) < 1e-7);
}

TEST_CASE("boxplus identity and position block") {
  std::mt19937_64 rng(3);
  const State x = test::random_state(rng);

  const State same = boxplus(x, TangentVector::Zero());
  CHECK(boxminus(same, x).norm() == doctest::Approx(0.0));

  State ident;
  TangentVector d = TangentVector::Zero();
  d.segment<3>(blk::kP) = Vec3(1, 2, 3);
  const State moved = boxplus(ident, d);
  CHECK((moved.p_wi - Vec3(1, 2, 3)).norm() == doctest::Approx(0.0));

  TangentVector bad = TangentVector::Zero();
  bad(0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(boxplus(x, bad), std::invalid_argument);
}

TEST_CASE("retraction consistency: (x boxplus d) boxminus x = d") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 3e-4);
  for (int trial = 0; trial < 200; ++trial) {
    const State x = test::random_state(rng);
    TangentVector d;
    for (int i = 0; i < kTangentDim; ++i) d(i) = g(rng);
    const TangentVector rec = boxminus(boxplus(x, d), x);
    CHECK((rec - d).norm() < 1e-9);
  }
}

TEST_CASE("local additivity error decays quadratically") {
  std::mt19937_64 rng(9);
  const State x = test::random_state(rng);
  TangentVector d1, d2;
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < kTangentDim; ++i) {
    d1(i) = g(rng);
    d2(i) = g(rng);
  }

  auto error_at = [&](double scale) {
    const State a = boxplus(boxplus(x, scale * d1), scale * d2);
    const State b = boxplus(x, scale * (d1 + d2));
    return boxminus(a, b).norm();
  };

  const double e1 = error_at(1e-2);
  const double e2 = error_at(5e-3);
  const double e3 = error_at(2.5e-3);
  // Halving the perturbation should shrink the defect by about 4x.
  CHECK(e2 < e1 / 2.5);
  CHECK(e3 < e2 / 2.5);
}

TEST_CASE("gravity chart geodesic distance") {
  const UnitVector3 g0 = UnitVector3::from_vector(Vec3(0, 0, -1));
  // Rotate by 0.1 rad about a tangent axis.
  const Mat3x2 basis = g0.tangent_basis();
  const Vec3 axis = basis.col(0);
  const UnitVector3 g1 = UnitVector3::from_vector(so3_exp(0.1 * axis) * g0.vector());

  const Vec2 d = g0.boxminus(g1);
  CHECK(std::abs(d.norm() - 0.1) < 1e-9);

  // Round trip through the chart.
  const UnitVector3 back = g0.boxplus(d);
  CHECK((back.vector() - g1.vector()).norm() < 1e-12);

  // Antipodal directions have no chart.
  const UnitVector3 up = UnitVector3::from_vector(Vec3(0, 0, 1));
  CHECK_THROWS_AS(g0.boxminus(up), DegenerateChartError);
}

TEST_CASE("tangent basis is an orthonormal completion") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 100; ++i) {
    const UnitVector3 v = UnitVector3::from_vector(test::random_vec3(rng));
    const Mat3x2 b = v.tangent_basis();
    CHECK(std::abs(b.col(0).norm() - 1.0) < 1e-12);
    CHECK(std::abs(b.col(1).norm() - 1.0) < 1e-12);
    CHECK(std::abs(b.col(0).dot(b.col(1))) < 1e-12);
    CHECK(std::abs(b.col(0).dot(v.vector())) < 1e-12);
    CHECK(std::abs(b.col(1).dot(v.vector())) < 1e-12);
    // Right-handed completion: b1 x b2 = v.
    CHECK((b.col(0).cross(b.col(1)) - v.vector()).norm() < 1e-12);
  }
}

TEST_CASE("freeze mask expansion") {
  BlockMask mask{};
  mask[static_cast<int>(StateBlock::kExtrinsicPos)] = true;
  mask[static_cast<int>(StateBlock::kGravity)] = true;
  const auto dims = expand_mask(mask);
  int frozen = 0;
  for (bool b : dims) frozen += b ? 1 : 0;
  CHECK(frozen == 5);
  CHECK(dims[blk::kPil]);
  CHECK(dims[blk::kG]);
  CHECK(dims[blk::kG + 1]);
  CHECK_FALSE(dims[blk::kP]);
}
