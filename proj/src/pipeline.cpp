#include "fuse/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fuse/errors.hpp"

namespace fuse {

using json = nlohmann::json;

DriftResult compute_drift(const std::vector<TrajPoint>& estimate,
                          const std::vector<sim::TruthSample>& truth) {
  if (estimate.empty() || truth.empty()) {
    throw std::invalid_argument("compute_drift: empty trajectory");
  }
  for (auto it = estimate.rbegin(); it != estimate.rend(); ++it) {
    auto match = std::lower_bound(truth.begin(), truth.end(), it->t - 1e-9,
                                  [](const sim::TruthSample& s, double t) { return s.t < t; });
    if (match != truth.end() && std::abs(match->t - it->t) <= 1e-9) {
      const Vec3 d = it->p - match->p;
      DriftResult out;
      out.dx = d.x();
      out.dy = d.y();
      out.dz = d.z();
      out.error = d.norm();
      return out;
    }
  }
  throw std::invalid_argument("compute_drift: no overlapping timestamps");
}

std::pair<std::string, std::string> drift_axes(const DriftResult& d) {
  const double a[3] = {std::abs(d.dx), std::abs(d.dy), std::abs(d.dz)};
  const char* names[3] = {"X", "Y", "Z"};
  int dom = 0, least = 0;
  for (int i = 1; i < 3; ++i) {
    if (a[i] > a[dom]) dom = i;
    if (a[i] < a[least]) least = i;
  }
  return {names[dom], names[least]};
}

namespace {

// Tangent dimensions the LiDAR residual couples to directly (position and
// rotation, plus extrinsics when estimated). The degeneracy analysis is
// restricted to these; prior-driven dimensions pass the gate unattenuated.
std::vector<int> gating_dims(const BackendConfig& backend) {
  std::vector<int> dims;
  const StateBlock measured[] = {StateBlock::kPosition, StateBlock::kRotation,
                                 StateBlock::kExtrinsicPos, StateBlock::kExtrinsicRot};
  for (StateBlock b : measured) {
    if (backend.freeze[static_cast<int>(b)]) continue;
    for (int i = 0; i < block_dim(b); ++i) dims.push_back(block_offset(b) + i);
  }
  return dims;
}

Mat23 initial_covariance(const PipelineConfig& cfg) {
  Mat23 P = Mat23::Zero();
  P.diagonal().segment<3>(blk::kP).setConstant(cfg.init_var_pos);
  P.diagonal().segment<3>(blk::kTheta).setConstant(cfg.init_var_rot);
  P.diagonal().segment<3>(blk::kPil).setConstant(cfg.init_var_ext);
  P.diagonal().segment<3>(blk::kThetaIl).setConstant(cfg.init_var_ext);
  P.diagonal().segment<3>(blk::kV).setConstant(cfg.init_var_vel);
  P.diagonal().segment<3>(blk::kBg).setConstant(cfg.init_var_bias);
  P.diagonal().segment<3>(blk::kBa).setConstant(cfg.init_var_bias);
  P.diagonal().segment<2>(blk::kG).setConstant(cfg.init_var_grav);
  return P;
}

double path_length_of(const std::vector<sim::TruthSample>& truth) {
  double len = 0.0;
  for (std::size_t i = 1; i < truth.size(); ++i) len += (truth[i].p - truth[i - 1].p).norm();
  return len;
}

struct ScanStats {
  std::vector<double> update_ms;

  RunTiming summarize() const {
    RunTiming t;
    if (update_ms.empty()) return t;
    std::vector<double> sorted = update_ms;
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    for (double v : sorted) sum += v;
    t.mean_ms = sum / static_cast<double>(sorted.size());
    const auto p95_idx = static_cast<std::size_t>(
        std::ceil(0.95 * static_cast<double>(sorted.size()))) - 1;
    t.p95_ms = sorted[std::min(p95_idx, sorted.size() - 1)];
    t.max_ms = sorted.back();
    return t;
  }
};

}  // namespace

RunReport run_pipeline(const std::vector<SensorRecord>& records,
                       const std::vector<sim::TruthSample>& truth, const PipelineConfig& cfg,
                       const PersistentMap* map_in, PersistentMap* map_out) {
  cfg.validate();
  if (truth.empty()) throw std::invalid_argument("run_pipeline: empty truth (needed for init)");

  RunReport report;
  report.path_length = path_length_of(truth);

  // Gravity direction from the early accelerometer mean at the initial
  // attitude: stationary samples measure a = -R^T g_vec + b_a + noise.
  Vec3 acc_mean = Vec3::Zero();
  std::uint64_t acc_count = 0;
  const double t_begin = truth.front().t;
  for (const SensorRecord& rec : records) {
    if (rec.source != SensorSource::kImu) continue;
    if (rec.t > t_begin + cfg.init_window) break;
    acc_mean += std::get<ImuSample>(rec.payload).acc;
    ++acc_count;
  }
  State x0;
  x0.p_wi = truth.front().p;
  x0.r_wi = truth.front().r;
  if (acc_count > 0) {
    acc_mean /= static_cast<double>(acc_count);
    const Vec3 g_world = -(truth.front().r * acc_mean);
    if (g_world.norm() > 1e-6) x0.gravity_dir = UnitVector3::from_vector(g_world);
  }

  GaussianBelief belief;
  belief.mean = x0;
  belief.cov = initial_covariance(cfg);

  StateHistory history(cfg.horizon);

  // Localization runs start from the provided map's points; mapping runs
  // start empty.
  PersistentMap map(cfg.index_kind, cfg.map_voxel, cfg.mode, cfg.map_cap);
  if (map_in) {
    map = PersistentMap(map_in->kind(), map_in->voxel_size(), cfg.mode,
                        map_in->per_voxel_cap());
    map.insert_points(map_in->index().points_in_insertion_order());
  }

  StreamIngest ingest;
  std::deque<LidarScan> pending_scans;
  std::optional<ImuSample> held_sample;
  double held_t = 0.0;
  bool initialized = false;
  ScanStats stats;
  const std::vector<int> gate_dims = gating_dims(cfg.backend);
  const double meas_var = cfg.meas_sigma * cfg.meas_sigma;

  auto process_scan = [&](const LidarScan& scan) {
    const auto tic = std::chrono::steady_clock::now();
    const double t_up = history.newest_tau();
    std::string trace = "scan@";
    {
      std::ostringstream ts;
      ts.precision(4);
      ts << std::fixed << scan.t_ref;
      trace += ts.str();
    }

    const std::vector<Vec3> deskewed = deskew(scan.points, history, t_up);
    trace += ":deskew";

    const HistoryEntry prior_entry = history.newest();
    const State& x_pred = prior_entry.state();

    ConstraintSet cs = associate(map.index(), deskewed, x_pred, scan.t_ref, cfg.assoc);
    ++report.counts.associate_calls;
    report.counts.constraints_raw += cs.constraints.size();
    trace += ":associate";

    AdmittedSet admitted = screen(cs, x_pred, cfg.screening);
    ++report.counts.screen_calls;
    report.counts.constraints_admitted += admitted.indices.size();
    trace += ":screen";

    UpdateBatch batch;
    batch.meas_var = meas_var;
    if (cfg.gate.enabled && !admitted.indices.empty()) {
      const Mat23 lambda = build_info_matrix(cs, admitted, x_pred);
      GatingConfig gcfg;
      gcfg.enabled = true;
      gcfg.mode = cfg.gate.mode;
      gcfg.lambda_thresh = cfg.gate.effective_thresh(admitted.indices.size());
      batch.gate = gate_restricted(lambda, gcfg, gate_dims);
      ++report.counts.gate_calls;
    }
    trace += ":gate";

    batch.cs = std::move(cs);
    batch.admitted = std::move(admitted);

    const UpdateResult result = update(prior_entry.belief, batch, cfg.backend);
    ++report.counts.update_calls;
    if (result.degenerate_scan) ++report.counts.degenerate_scans;
    trace += ":update";

    HistoryEntry corrected;
    corrected.tau = t_up;
    corrected.belief = result.belief;
    corrected.kind = EntryKind::kUpdated;
    history.push(corrected);

    TrajPoint tp;
    tp.t = t_up;
    tp.p = result.belief.mean.p_wi;
    tp.q = Eigen::Quaterniond(result.belief.mean.r_wi.matrix());
    report.trajectory.push_back(tp);

    // Accepted observations: the deskewed scan in world frame at the
    // posterior pose, minus points whose constraints failed screening.
    std::vector<bool> rejected(deskewed.size(), false);
    {
      std::vector<bool> is_admitted(batch.cs.constraints.size(), false);
      for (std::uint32_t j : batch.admitted.indices) is_admitted[j] = true;
      for (std::uint32_t j = 0; j < batch.cs.constraints.size(); ++j) {
        if (!is_admitted[j]) rejected[batch.cs.constraints[j].point_index] = true;
      }
    }
    const LidarPose posterior_pose = lidar_pose(result.belief.mean);
    AcceptedSet accepted;
    accepted.stamp = scan.t_ref;
    accepted.world_points.reserve(deskewed.size());
    for (std::size_t i = 0; i < deskewed.size(); ++i) {
      if (!rejected[i]) accepted.world_points.push_back(posterior_pose.apply(deskewed[i]));
    }
    map.apply_policy(accepted);
    trace += ":policy:" + to_string(map.mode());

    report.trace.push_back(std::move(trace));
    ++report.counts.scans_processed;
    const auto toc = std::chrono::steady_clock::now();
    stats.update_ms.push_back(std::chrono::duration<double, std::milli>(toc - tic).count());
  };

  try {
    for (const SensorRecord& rec : records) {
      if (!ingest.ingest(rec).accepted()) {
        ++report.counts.ingest_rejected;
        continue;
      }
      if (rec.source == SensorSource::kImu) {
        ++report.counts.imu_records;
        const ImuSample& sample = std::get<ImuSample>(rec.payload);
        if (!initialized) {
          HistoryEntry first;
          first.tau = rec.t;
          first.belief = belief;
          first.kind = EntryKind::kPropagated;
          history.push(first);
          held_sample = sample;
          held_t = rec.t;
          initialized = true;
          continue;
        }
        const double dt = rec.t - held_t;
        if (dt > 0.0 && held_sample.has_value()) {
          const HistoryEntry newest = history.newest();
          GaussianBelief next;
          next.mean =
              propagate_nominal(newest.state(), *held_sample, dt, cfg.gravity_magnitude);
          if (cfg.no_covprop) {
            next.cov = newest.belief.cov;
          } else {
            const PropagationJacobians jac = error_state_jacobians(
                newest.state(), *held_sample, dt, cfg.gravity_magnitude);
            const Mat12 qd = process_noise_discrete(cfg.imu_noise, dt);
            next.cov = propagate_covariance(newest.belief.cov, jac, qd, dt);
          }
          HistoryEntry entry;
          entry.tau = rec.t;
          entry.belief = next;
          entry.kind = EntryKind::kPropagated;
          history.push(entry);
        }
        held_sample = sample;
        held_t = rec.t;

        // A scan fires at the first IMU timestamp covering its window.
        while (!pending_scans.empty()) {
          const LidarScan& front = pending_scans.front();
          const double scan_end =
              front.points.empty() ? front.t_ref : front.points.back().t;
          if (history.newest_tau() < scan_end - 1e-12) break;
          process_scan(front);
          pending_scans.pop_front();
          if (!pending_scans.empty()) {
            history.set_prune_watermark(pending_scans.front().t_ref);
          } else {
            history.set_prune_watermark(std::nullopt);
          }
        }
      } else {
        ++report.counts.scans_total;
        const auto& scan = std::get<LidarScan>(rec.payload);
        if (scan.points.empty()) continue;
        pending_scans.push_back(scan);
        history.set_prune_watermark(pending_scans.front().t_ref);
      }
    }
  } catch (const NumericalError& e) {
    report.failed = true;
    report.fail_scan = static_cast<int>(report.counts.scans_processed);
    report.fail_reason = std::string("numerical-error: ") + e.what();
  } catch (const DivergedError& e) {
    report.failed = true;
    report.fail_scan = static_cast<int>(report.counts.scans_processed);
    report.fail_reason = std::string("diverged: ") + e.what();
  }

  report.timing = stats.summarize();
  if (!report.failed && !report.trajectory.empty()) {
    report.drift = compute_drift(report.trajectory, truth);
    if (report.path_length > 0.0 && report.drift.error > 0.1 * report.path_length) {
      report.failed = true;
      report.fail_reason = "terminal error exceeds 10% of path length";
    }
  }

  if (map_out) {
    *map_out = PersistentMap(map.kind(), map.voxel_size(), map.mode(), map.per_voxel_cap());
    map_out->insert_points(map.index().points_in_insertion_order());
  }
  return report;
}

std::vector<AblationRow> run_ablation_suite(const std::vector<SensorRecord>& records,
                                            const std::vector<sim::TruthSample>& truth,
                                            const PipelineConfig& base) {
  std::vector<AblationRow> rows;
  auto run_variant = [&](const std::string& name, const PipelineConfig& cfg) {
    AblationRow row;
    row.name = name;
    try {
      row.report = run_pipeline(records, truth, cfg);
    } catch (const std::exception& e) {
      row.report.failed = true;
      row.report.fail_reason = e.what();
    }
    rows.push_back(std::move(row));
  };

  run_variant("full", base);
  PipelineConfig no_gate = base;
  no_gate.gate.enabled = false;
  run_variant("no-gate", no_gate);
  PipelineConfig no_screen = base;
  no_screen.screening.enabled = false;
  run_variant("no-screen", no_screen);
  PipelineConfig no_covprop = base;
  no_covprop.no_covprop = true;
  run_variant("no-covprop", no_covprop);
  return rows;
}

namespace {

json report_json_object(const RunReport& r) {
  json j;
  j["failed"] = r.failed;
  if (r.failed) {
    j["fail_scan"] = r.fail_scan;
    j["fail_reason"] = r.fail_reason;
  } else {
    j["error_m"] = r.drift.error;
    j["drift_m"] = {r.drift.dx, r.drift.dy, r.drift.dz};
    const auto [dom, least] = drift_axes(r.drift);
    j["dominant_drift_axis"] = dom;
    j["least_drift_axis"] = least;
  }
  j["path_length_m"] = r.path_length;
  j["counts"] = {{"imu_records", r.counts.imu_records},
                 {"scans_total", r.counts.scans_total},
                 {"scans_processed", r.counts.scans_processed},
                 {"degenerate_scans", r.counts.degenerate_scans},
                 {"constraints_raw", r.counts.constraints_raw},
                 {"constraints_admitted", r.counts.constraints_admitted},
                 {"ingest_rejected", r.counts.ingest_rejected}};
  j["timing_ms"] = {{"mean", r.timing.mean_ms},
                    {"p95", r.timing.p95_ms},
                    {"max", r.timing.max_ms}};
  return j;
}

}  // namespace

std::string report_to_json(const RunReport& report) {
  return report_json_object(report).dump(2);
}

std::string ablation_to_json(const std::vector<AblationRow>& rows) {
  json j = json::array();
  for (const AblationRow& row : rows) {
    json r = report_json_object(row.report);
    r["variant"] = row.name;
    r["is_full"] = row.name == "full";
    j.push_back(std::move(r));
  }
  return j.dump(2);
}

void write_trajectory_file(const std::vector<TrajPoint>& traj, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ParseError("cannot open trajectory file for writing: " + path, 0);
  char buf[512];
  for (const TrajPoint& tp : traj) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n", tp.t,
                  tp.p.x(), tp.p.y(), tp.p.z(), tp.q.x(), tp.q.y(), tp.q.z(), tp.q.w());
    os << buf;
  }
}

}  // namespace fuse
