#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "fuse/backends.hpp"
#include "fuse/history.hpp"
#include "fuse/map_policy.hpp"
#include "fuse/sim.hpp"

namespace fuse {

struct GateSettings {
  bool enabled = true;
  GateMode mode = GateMode::kLinear;
  // Absolute eigenvalue threshold; <= 0 selects the scan-size-invariant
  // auto rule thresh = 10 * m_admitted * 1e-3.
  double lambda_thresh = 0.0;

  double effective_thresh(std::size_t admitted_count) const {
    return lambda_thresh > 0.0 ? lambda_thresh
                               : 10.0 * static_cast<double>(admitted_count) * 1e-3;
  }
};

struct PipelineConfig {
  ScreeningConfig screening;
  GateSettings gate;
  BackendConfig backend;
  IndexKind index_kind = IndexKind::kHashVoxel;
  MapMode mode = MapMode::kMapping;
  double meas_sigma = 0.05;       // m, isotropic per-constraint
  NoiseConfig imu_noise;          // filter-side densities
  double horizon = 2.0;           // s
  double map_voxel = 0.5;         // m
  int map_cap = 20;               // points per voxel
  AssocConfig assoc;
  bool no_covprop = false;        // ablation: hold P through propagation
  double gravity_magnitude = kDefaultGravityMagnitude;
  double init_window = 0.5;       // s of accelerometer mean for gravity init

  // Initial belief (diagonal covariance).
  double init_var_pos = 1e-4;
  double init_var_rot = 1e-4;
  double init_var_ext = 1e-6;
  double init_var_vel = 1e-2;
  double init_var_bias = 1e-4;
  double init_var_grav = 1e-4;

  void validate() const;
};

/// key = value / [section] config text; unknown keys are rejected.
PipelineConfig parse_config(const std::string& text);
PipelineConfig parse_config_file(const std::string& path);

struct TrajPoint {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
};

struct RunTiming {
  double mean_ms = 0.0;
  double p95_ms = 0.0;
  double max_ms = 0.0;
};

struct RunCounts {
  std::uint64_t imu_records = 0;
  std::uint64_t scans_total = 0;
  std::uint64_t scans_processed = 0;
  std::uint64_t degenerate_scans = 0;
  std::uint64_t constraints_raw = 0;
  std::uint64_t constraints_admitted = 0;
  std::uint64_t ingest_rejected = 0;
  std::uint64_t associate_calls = 0;
  std::uint64_t screen_calls = 0;
  std::uint64_t gate_calls = 0;
  std::uint64_t update_calls = 0;
};

struct DriftResult {
  double dx = 0.0, dy = 0.0, dz = 0.0;
  double error = 0.0;  // Euclidean norm of (dx, dy, dz)
};

struct RunReport {
  bool failed = false;
  int fail_scan = -1;
  std::string fail_reason;
  DriftResult drift;
  double path_length = 0.0;
  RunTiming timing;
  RunCounts counts;
  std::vector<TrajPoint> trajectory;     // corrected states at scan references
  std::vector<std::string> trace;        // per-scan instrumented stage tags
};

/// Terminal estimated-minus-truth position at the last common timestamp.
/// Throws std::invalid_argument when there is no overlap.
DriftResult compute_drift(const std::vector<TrajPoint>& estimate,
                          const std::vector<sim::TruthSample>& truth);

/// Full run: IMU records propagate nominal state and covariance into the
/// history; a LiDAR scan is processed at the first IMU timestamp past its
/// window (deskew, associate, screen, gate, update, map policy). The first
/// truth pose initializes the belief; gravity comes from the early
/// accelerometer mean. A numerical error or terminal error above 10% of the
/// path length marks the run as failed.
RunReport run_pipeline(const std::vector<SensorRecord>& records,
                       const std::vector<sim::TruthSample>& truth, const PipelineConfig& cfg,
                       const PersistentMap* map_in = nullptr, PersistentMap* map_out = nullptr);

struct AblationRow {
  std::string name;
  RunReport report;
};

/// {full, no-gate, no-screen, no-covprop} with identical inputs; per-run
/// failures are carried in the row, siblings still run.
std::vector<AblationRow> run_ablation_suite(const std::vector<SensorRecord>& records,
                                            const std::vector<sim::TruthSample>& truth,
                                            const PipelineConfig& base);

/// Axis label (X/Y/Z) of the dominant / least drift component.
std::pair<std::string, std::string> drift_axes(const DriftResult& d);

/// JSON report (timing fields are the only non-deterministic content).
std::string report_to_json(const RunReport& report);
std::string ablation_to_json(const std::vector<AblationRow>& rows);

/// TUM-style trajectory lines: t px py pz qx qy qz qw.
void write_trajectory_file(const std::vector<TrajPoint>& traj, const std::string& path);

}  // namespace fuse
