#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fuse/history.hpp"
#include "fuse/spatial_index.hpp"
#include "fuse/state.hpp"
#include "fuse/types.hpp"

namespace fuse {

enum class PointFrame { kSensor, kWorld };

struct Point3 {
  Vec3 xyz = Vec3::Zero();
  PointFrame frame = PointFrame::kSensor;
};

/// Planar primitive n^T p + d = 0 with a structural quality score.
struct PlanePrimitive {
  Vec3 n = Vec3::UnitZ();   // unit normal, sign fixed toward the sensor
  double d = 0.0;           // offset (m)
  double planarity = 0.0;   // 1 - 3*l3/(l1+l2+l3) of the fit covariance
  int support_count = 0;
};

/// Residual-ready point-to-plane correspondence.
struct Constraint {
  Vec3 p_l = Vec3::Zero();   // motion-compensated point, sensor frame
  Vec3 n = Vec3::UnitZ();    // plane normal (world)
  double d = 0.0;            // plane offset (world, m)
  double q = 0.0;            // quality (planarity of the source primitive)
  double w = 1.0;            // weight
  std::uint32_t point_index = 0;  // index into the deskewed scan
};

struct ConstraintSet {
  std::vector<Constraint> constraints;
  double stamp = 0.0;  // shared scan reference time
};

struct PlaneFitConfig {
  int min_points = 5;
  double min_planarity = 0.9;
  double max_point_dist = 0.1;  // m, fit acceptance
};

struct AssocConfig {
  int knn = 5;
  PlaneFitConfig fit;
};

/// World-from-LiDAR pose composed from the state and extrinsics.
struct LidarPose {
  Mat3 rotation;
  Vec3 translation;
  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
};
LidarPose lidar_pose(const State& x);

/// Re-expresses each scan point in the sensor frame at t_ref using history
/// queries at the point's own timestamp: p' = T_ref^-1 T(t_point) p.
/// Throws std::out_of_range when the history does not span the scan window
/// (the caller defers the scan, it is not dropped).
std::vector<Vec3> deskew(std::span<const TimedPoint> scan, const StateHistory& hist,
                         double t_ref);

/// k nearest stored points wrapped as world-frame Point3 values.
std::vector<Point3> knn(const SpatialIndex& index, const Point3& p, int k);

/// Least-squares plane through the neighbors; normal from the smallest
/// eigenvector of the centered covariance, sign fixed so that
/// n . (sensor_origin - centroid) > 0. Returns nullopt when the neighborhood
/// is too small, not planar enough, collinear, or too thick.
std::optional<PlanePrimitive> fit_plane(std::span<const Vec3> neighbors,
                                        const Vec3& sensor_origin,
                                        const PlaneFitConfig& cfg = {});

/// Converts a deskewed scan plus the propagated state into a residual-ready
/// constraint set. Points without an acceptable plane fit are dropped; an
/// empty result is legal and flags a degenerate scan.
ConstraintSet associate(const SpatialIndex& index, std::span<const Vec3> scan_deskewed,
                        const State& x_pred, double stamp, const AssocConfig& cfg = {});

/// Point-to-plane residual r = n^T p_W + d and its analytic 1x23 Jacobian in
/// the frozen tangent layout. Freeze-mask zeroing is the consumer's job.
std::pair<double, RowVec23> residual_and_jacobian(const Constraint& c, const State& x);

/// Residual only (screening and iterated relinearization hot path).
double residual_only(const Constraint& c, const State& x);

}  // namespace fuse
