#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "fuse/history.hpp"
#include "fuse/imu.hpp"
#include "fuse/state.hpp"
#include "fuse/types.hpp"

namespace fuse::sim {

/// Finite rectangular patch: corner + two orthogonal unit edges with extents.
struct Patch {
  Vec3 corner = Vec3::Zero();
  Vec3 e1 = Vec3::UnitX();
  Vec3 e2 = Vec3::UnitY();
  double len1 = 1.0;
  double len2 = 1.0;
  Vec3 normal() const { return e1.cross(e2).normalized(); }
};

enum class ScenePreset { kCorridor, kRoom, kLLoop };

struct World {
  std::vector<Patch> patches;
  ScenePreset preset = ScenePreset::kCorridor;
};

/// Corridor: two walls at +-width/2, floor at z = 0, ceiling at z = height,
/// axis along +x over [x0, x0 + length]. No end caps: the axis direction is
/// constrained only by sensor noise, which is the degeneracy under study.
World make_corridor(double length = 40.0, double width = 3.0, double height = 2.5,
                    double x0 = -2.0);
World make_room(double lx = 8.0, double ly = 6.0, double height = 2.5);
World make_l_loop(double leg = 18.0, double width = 3.0, double height = 2.5);
World make_world(ScenePreset preset);

/// Piecewise constant-twist trajectory: constant world-frame linear velocity
/// and constant body-frame angular velocity per segment. Pose and velocity
/// have closed forms, and the history module's linear/geodesic interpolation
/// is exact on each segment.
struct TrajectorySegment {
  double duration = 1.0;      // s
  Vec3 v_world = Vec3::Zero();    // m/s
  Vec3 omega_body = Vec3::Zero(); // rad/s
};

struct TrajectorySpec {
  Vec3 p0 = Vec3::Zero();
  Rotation3 r0;
  std::vector<TrajectorySegment> segments;

  double total_duration() const;
};

struct PoseVel {
  Vec3 p = Vec3::Zero();
  Rotation3 r;
  Vec3 v = Vec3::Zero();
};

/// Closed-form pose/velocity at t (clamped to the trajectory span).
PoseVel pose_at(const TrajectorySpec& spec, double t);

/// Terminal-minus-start pose discrepancy (closed-loop validation).
std::pair<double, double> loop_closure_error(const TrajectorySpec& spec);

struct TruthSample {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
  Rotation3 r;
  Vec3 v = Vec3::Zero();
};

struct SimConfig {
  double imu_rate = 200.0;    // Hz
  double lidar_rate = 10.0;   // Hz
  int rays_per_scan = 2000;
  double range_sigma = 0.01;  // m
  double max_range = 30.0;    // m
  NoiseConfig imu_noise;
  Vec3 gyro_bias0 = Vec3(0.002, -0.0015, 0.001);   // rad/s
  Vec3 accel_bias0 = Vec3(0.03, -0.02, 0.04);      // m/s^2
  bool noise_free = false;    // zero noise and zero biases
  std::uint64_t seed = 42;
  double gravity_magnitude = kDefaultGravityMagnitude;
  Vec3 gravity_dir = Vec3(0, 0, -1);

  void validate() const;
};

/// Exact trajectory samples at the given rate over the spec's duration.
std::vector<TruthSample> generate_truth(const TrajectorySpec& spec, double rate);

/// IMU stream inverting the strapdown propagation model between consecutive
/// truth samples: omega_m = log(R_k^T R_{k+1})/dt + b_g + n_g and
/// a_m = R_k^T((v_{k+1}-v_k)/dt - g_vec) + b_a + n_a. Biases follow seeded
/// random walks; noise_free zeroes noise and biases.
std::vector<ImuSample> synthesize_imu(const std::vector<TruthSample>& truth,
                                      const SimConfig& cfg);

using PoseFn = std::function<PoseVel(double)>;

/// Ray-cast scan with per-point timestamps uniform over one scan period;
/// each point is expressed in the sensor frame at its own emission time.
/// Rays missing all patches (or beyond max_range) are dropped.
LidarScan synthesize_scan(const World& world, const PoseFn& pose_fn, double t_ref,
                          const SimConfig& cfg, std::uint64_t scan_index);

/// Full mixed-rate sequence (IMU + LiDAR records interleaved by timestamp).
std::vector<SensorRecord> make_sequence(const World& world, const TrajectorySpec& spec,
                                        const SimConfig& cfg, double duration);

/// Default desk-scale corridor traversal: stationary lead-in, out-and-back
/// along +x with in-place turns, closing the loop. Segment boundaries fall
/// halfway between IMU samples so the sample-and-hold IMU inversion is exact.
TrajectorySpec default_corridor_trajectory(double imu_rate = 200.0);

/// Scene-appropriate default trajectory (corridor traversal, room loop,
/// L-loop legs).
TrajectorySpec default_trajectory(ScenePreset preset, double imu_rate = 200.0);

// Line-oriented sequence file:
//   IMU t wx wy wz ax ay az
//   PTS t_ref n            (followed by n lines: t_point x y z)
void write_sequence(const std::vector<SensorRecord>& records, std::ostream& os);
void write_sequence_file(const std::vector<SensorRecord>& records, const std::string& path);
std::vector<SensorRecord> read_sequence(std::istream& is);
std::vector<SensorRecord> read_sequence_file(const std::string& path);

// Ground-truth file: t px py pz qw qx qy qz vx vy vz
void write_truth(const std::vector<TruthSample>& truth, std::ostream& os);
void write_truth_file(const std::vector<TruthSample>& truth, const std::string& path);
std::vector<TruthSample> read_truth(std::istream& is);
std::vector<TruthSample> read_truth_file(const std::string& path);

}  // namespace fuse::sim
