#include "fuse/association.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace fuse {

LidarPose lidar_pose(const State& x) {
  LidarPose pose;
  pose.rotation = x.r_wi.matrix() * x.r_il.matrix();
  pose.translation = x.r_wi * x.p_il + x.p_wi;
  return pose;
}

std::vector<Vec3> deskew(std::span<const TimedPoint> scan, const StateHistory& hist,
                         double t_ref) {
  const LidarPose ref = lidar_pose(hist.query(t_ref));
  const Mat3 ref_rot_t = ref.rotation.transpose();

  std::vector<Vec3> out;
  out.reserve(scan.size());
  for (const TimedPoint& tp : scan) {
    const LidarPose at_point = lidar_pose(hist.query(tp.t));
    const Vec3 world = at_point.apply(tp.p);
    out.push_back(ref_rot_t * (world - ref.translation));
  }
  return out;
}

std::vector<Point3> knn(const SpatialIndex& index, const Point3& p, int k) {
  std::vector<Point3> out;
  for (const Vec3& v : index.knn(p.xyz, k)) {
    out.push_back({v, PointFrame::kWorld});
  }
  return out;
}

std::optional<PlanePrimitive> fit_plane(std::span<const Vec3> neighbors,
                                        const Vec3& sensor_origin, const PlaneFitConfig& cfg) {
  if (static_cast<int>(neighbors.size()) < cfg.min_points) return std::nullopt;

  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : neighbors) centroid += p;
  centroid /= static_cast<double>(neighbors.size());

  Mat3 cov = Mat3::Zero();
  for (const Vec3& p : neighbors) {
    const Vec3 d = p - centroid;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(neighbors.size());

  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Vec3 evals = eig.eigenvalues();  // ascending
  const double total = evals.sum();
  // Collinear (or coincident) neighborhoods have no defined planarity.
  if (total <= 1e-18 || evals(1) <= 1e-12 * std::max(evals(2), 1e-30)) return std::nullopt;

  PlanePrimitive plane;
  plane.planarity = 1.0 - 3.0 * std::max(evals(0), 0.0) / total;
  if (plane.planarity < cfg.min_planarity) return std::nullopt;

  Vec3 n = eig.eigenvectors().col(0);
  const double toward_sensor = n.dot(sensor_origin - centroid);
  if (toward_sensor < 0.0) {
    n = -n;
  } else if (toward_sensor == 0.0) {
    // Grazing: pick the deterministic sign (first nonzero component positive).
    for (int i = 0; i < 3; ++i) {
      if (n(i) != 0.0) {
        if (n(i) < 0.0) n = -n;
        break;
      }
    }
  }
  plane.n = n;
  plane.d = -n.dot(centroid);
  plane.support_count = static_cast<int>(neighbors.size());

  for (const Vec3& p : neighbors) {
    if (std::abs(n.dot(p) + plane.d) > cfg.max_point_dist) return std::nullopt;
  }
  return plane;
}

ConstraintSet associate(const SpatialIndex& index, std::span<const Vec3> scan_deskewed,
                        const State& x_pred, double stamp, const AssocConfig& cfg) {
  ConstraintSet cs;
  cs.stamp = stamp;
  if (index.size() == 0) return cs;

  const LidarPose pose = lidar_pose(x_pred);
  cs.constraints.reserve(scan_deskewed.size());
  for (std::uint32_t i = 0; i < scan_deskewed.size(); ++i) {
    const Vec3 world = pose.apply(scan_deskewed[i]);
    const std::vector<Vec3> neighbors = index.knn(world, cfg.knn);
    const auto plane = fit_plane(neighbors, pose.translation, cfg.fit);
    if (!plane) continue;
    Constraint c;
    c.p_l = scan_deskewed[i];
    c.n = plane->n;
    c.d = plane->d;
    c.q = plane->planarity;
    c.w = 1.0;
    c.point_index = i;
    cs.constraints.push_back(c);
  }
  return cs;
}

std::pair<double, RowVec23> residual_and_jacobian(const Constraint& c, const State& x) {
  const Mat3 r_wi = x.r_wi.matrix();
  const Mat3 r_il = x.r_il.matrix();
  const Vec3 p_in_imu = r_il * c.p_l + x.p_il;
  const Vec3 p_world = r_wi * p_in_imu + x.p_wi;
  const double r = c.n.dot(p_world) + c.d;

  RowVec23 H = RowVec23::Zero();
  const Eigen::RowVector3d nt = c.n.transpose();
  H.segment<3>(blk::kP) = nt;
  H.segment<3>(blk::kTheta) = -nt * r_wi * skew(p_in_imu);
  H.segment<3>(blk::kPil) = nt * r_wi;
  H.segment<3>(blk::kThetaIl) = -nt * r_wi * r_il * skew(c.p_l);
  return {r, H};
}

double residual_only(const Constraint& c, const State& x) {
  const Vec3 p_world = x.r_wi * (x.r_il * c.p_l + x.p_il) + x.p_wi;
  return c.n.dot(p_world) + c.d;
}

}  // namespace fuse
