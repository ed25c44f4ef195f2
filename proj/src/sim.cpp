#include "fuse/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include <Eigen/Geometry>

#include "fuse/errors.hpp"

namespace fuse::sim {

void SimConfig::validate() const {
  if (!(imu_rate > 0.0 && lidar_rate > 0.0)) throw ConfigError("sim rates must be positive");
  if (rays_per_scan < 1) throw ConfigError("sim rays_per_scan must be >= 1");
  if (!(max_range > 0.0)) throw ConfigError("sim max_range must be positive");
}

// ---------------------------------------------------------------------------
// Worlds
// ---------------------------------------------------------------------------

namespace {
Patch rect(const Vec3& corner, const Vec3& e1, double len1, const Vec3& e2, double len2) {
  Patch p;
  p.corner = corner;
  p.e1 = e1.normalized();
  p.e2 = e2.normalized();
  p.len1 = len1;
  p.len2 = len2;
  return p;
}
}  // namespace

World make_corridor(double length, double width, double height, double x0) {
  World w;
  w.preset = ScenePreset::kCorridor;
  const double hw = width / 2.0;
  // Left wall (+y), right wall (-y), floor, ceiling. Edge order fixes the
  // outward normal toward the corridor interior.
  w.patches.push_back(rect({x0, hw, 0.0}, Vec3::UnitX(), length, Vec3::UnitZ(), height));
  w.patches.push_back(rect({x0, -hw, 0.0}, Vec3::UnitX(), length, Vec3::UnitZ(), height));
  w.patches.push_back(rect({x0, -hw, 0.0}, Vec3::UnitX(), length, Vec3::UnitY(), width));
  w.patches.push_back(rect({x0, -hw, height}, Vec3::UnitX(), length, Vec3::UnitY(), width));
  return w;
}

World make_room(double lx, double ly, double height) {
  World w;
  w.preset = ScenePreset::kRoom;
  const double hx = lx / 2.0, hy = ly / 2.0;
  w.patches.push_back(rect({-hx, -hy, 0.0}, Vec3::UnitX(), lx, Vec3::UnitY(), ly));      // floor
  w.patches.push_back(rect({-hx, -hy, height}, Vec3::UnitX(), lx, Vec3::UnitY(), ly));   // ceiling
  w.patches.push_back(rect({-hx, -hy, 0.0}, Vec3::UnitX(), lx, Vec3::UnitZ(), height));  // -y
  w.patches.push_back(rect({-hx, hy, 0.0}, Vec3::UnitX(), lx, Vec3::UnitZ(), height));   // +y
  w.patches.push_back(rect({-hx, -hy, 0.0}, Vec3::UnitY(), ly, Vec3::UnitZ(), height));  // -x
  w.patches.push_back(rect({hx, -hy, 0.0}, Vec3::UnitY(), ly, Vec3::UnitZ(), height));   // +x
  return w;
}

World make_l_loop(double leg, double width, double height) {
  World w;
  w.preset = ScenePreset::kLLoop;
  const double hw = width / 2.0;
  // Leg A along +x, leg B along +y, sharing the corner at the origin area.
  w.patches.push_back(rect({-hw, hw, 0.0}, Vec3::UnitX(), leg + 2 * hw, Vec3::UnitZ(), height));
  w.patches.push_back(rect({-hw, -hw, 0.0}, Vec3::UnitX(), leg + 2 * hw, Vec3::UnitZ(), height));
  w.patches.push_back(rect({-hw, hw, 0.0}, Vec3::UnitY(), leg, Vec3::UnitZ(), height));
  w.patches.push_back(rect({hw, hw, 0.0}, Vec3::UnitY(), leg, Vec3::UnitZ(), height));
  w.patches.push_back(rect({-hw, -hw, 0.0}, Vec3::UnitX(), leg + 2 * hw, Vec3::UnitY(), width));
  w.patches.push_back(rect({-hw, -hw, height}, Vec3::UnitX(), leg + 2 * hw, Vec3::UnitY(), width));
  w.patches.push_back(rect({-hw, hw, 0.0}, Vec3::UnitY(), leg, Vec3::UnitX(), width));
  w.patches.push_back(rect({-hw, hw, height}, Vec3::UnitY(), leg, Vec3::UnitX(), width));
  return w;
}

World make_world(ScenePreset preset) {
  switch (preset) {
    case ScenePreset::kCorridor: return make_corridor();
    case ScenePreset::kRoom: return make_room();
    case ScenePreset::kLLoop: return make_l_loop();
  }
  throw ConfigError("make_world: unknown preset");
}

// ---------------------------------------------------------------------------
// Trajectory
// ---------------------------------------------------------------------------

double TrajectorySpec::total_duration() const {
  double total = 0.0;
  for (const auto& s : segments) total += s.duration;
  return total;
}

PoseVel pose_at(const TrajectorySpec& spec, double t) {
  Vec3 p = spec.p0;
  Rotation3 r = spec.r0;
  double t0 = 0.0;
  for (const auto& seg : spec.segments) {
    if (seg.duration <= 0.0) throw ConfigError("trajectory segment duration must be positive");
    if (t < t0 + seg.duration) {
      const double s = std::max(0.0, t - t0);
      PoseVel out;
      out.p = p + seg.v_world * s;
      out.r = r * Rotation3::exp(seg.omega_body * s);
      out.v = seg.v_world;
      return out;
    }
    p += seg.v_world * seg.duration;
    r = r * Rotation3::exp(seg.omega_body * seg.duration);
    t0 += seg.duration;
  }
  PoseVel out;  // clamped to the terminal pose, at rest
  out.p = p;
  out.r = r;
  out.v = spec.segments.empty() ? Vec3::Zero() : spec.segments.back().v_world;
  return out;
}

std::pair<double, double> loop_closure_error(const TrajectorySpec& spec) {
  const PoseVel end = pose_at(spec, spec.total_duration() + 1.0);
  const double dp = (end.p - spec.p0).norm();
  const double dr = so3_log(spec.r0.transposed() * end.r.matrix()).norm();
  return {dp, dr};
}

std::vector<TruthSample> generate_truth(const TrajectorySpec& spec, double rate) {
  if (!(rate > 0.0)) throw ConfigError("generate_truth: rate must be positive");
  const double dt = 1.0 / rate;
  const double total = spec.total_duration();
  const auto n = static_cast<std::size_t>(std::floor(total / dt + 0.5)) + 1;
  std::vector<TruthSample> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * dt;
    const PoseVel pv = pose_at(spec, t);
    out.push_back({t, pv.p, pv.r, pv.v});
  }
  return out;
}

TrajectorySpec default_corridor_trajectory(double imu_rate) {
  const double dt = 1.0 / imu_rate;
  const double vx = 1.25;
  TrajectorySpec spec;
  spec.p0 = Vec3(0.0, 0.0, 1.2);
  // Velocity switches at segment boundaries are step changes; placing each
  // boundary halfway between IMU samples makes the sample-and-hold IMU
  // inversion reproduce the truth exactly (the trapezoid position rule then
  // matches the true displacement across the jump).
  spec.segments.push_back({0.5 + 0.5 * dt, Vec3::Zero(), Vec3::Zero()});             // lead-in
  spec.segments.push_back({26.0, Vec3(vx, 0, 0), Vec3::Zero()});                     // out
  spec.segments.push_back({3.0, Vec3::Zero(), Vec3(0, 0, M_PI / 3.0)});              // turn 180
  spec.segments.push_back({26.0, Vec3(-vx, 0, 0), Vec3::Zero()});                    // back
  spec.segments.push_back({3.0, Vec3::Zero(), Vec3(0, 0, M_PI / 3.0)});              // turn 180
  spec.segments.push_back({1.5 - 0.5 * dt, Vec3::Zero(), Vec3::Zero()});             // tail
  return spec;
}

TrajectorySpec default_trajectory(ScenePreset preset, double imu_rate) {
  const double dt = 1.0 / imu_rate;
  if (preset == ScenePreset::kCorridor) return default_corridor_trajectory(imu_rate);

  TrajectorySpec spec;
  if (preset == ScenePreset::kRoom) {
    // Small loop inside the 8 x 6 room.
    spec.p0 = Vec3(-2.0, 0.0, 1.2);
    spec.segments.push_back({0.5 + 0.5 * dt, Vec3::Zero(), Vec3::Zero()});
    spec.segments.push_back({8.0, Vec3(0.5, 0, 0), Vec3::Zero()});
    spec.segments.push_back({3.0, Vec3::Zero(), Vec3(0, 0, M_PI / 3.0)});
    spec.segments.push_back({8.0, Vec3(-0.5, 0, 0), Vec3::Zero()});
    spec.segments.push_back({3.0, Vec3::Zero(), Vec3(0, 0, M_PI / 3.0)});
    spec.segments.push_back({1.5 - 0.5 * dt, Vec3::Zero(), Vec3::Zero()});
    return spec;
  }
  // L-loop: down leg A, 90-degree turn, down leg B, and back.
  spec.p0 = Vec3(0.0, 0.0, 1.2);
  spec.segments.push_back({0.5 + 0.5 * dt, Vec3::Zero(), Vec3::Zero()});
  spec.segments.push_back({12.0, Vec3(1.0, 0, 0), Vec3::Zero()});
  spec.segments.push_back({2.0, Vec3::Zero(), Vec3(0, 0, M_PI / 4.0)});
  spec.segments.push_back({12.0, Vec3(0, 1.0, 0), Vec3::Zero()});
  spec.segments.push_back({2.0, Vec3::Zero(), Vec3(0, 0, M_PI / 2.0)});
  spec.segments.push_back({12.0, Vec3(0, -1.0, 0), Vec3::Zero()});
  spec.segments.push_back({2.0, Vec3::Zero(), Vec3(0, 0, M_PI / 4.0)});
  spec.segments.push_back({12.0, Vec3(-1.0, 0, 0), Vec3::Zero()});
  spec.segments.push_back({2.0, Vec3::Zero(), Vec3(0, 0, M_PI / 2.0)});
  spec.segments.push_back({1.5 - 0.5 * dt, Vec3::Zero(), Vec3::Zero()});
  return spec;
}

// ---------------------------------------------------------------------------
// IMU synthesis
// ---------------------------------------------------------------------------

std::vector<ImuSample> synthesize_imu(const std::vector<TruthSample>& truth,
                                      const SimConfig& cfg) {
  cfg.validate();
  std::vector<ImuSample> out;
  if (truth.size() < 2) return out;
  out.reserve(truth.size() - 1);

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Vec3 bg = cfg.noise_free ? Vec3::Zero() : cfg.gyro_bias0;
  Vec3 ba = cfg.noise_free ? Vec3::Zero() : cfg.accel_bias0;

  for (std::size_t k = 0; k + 1 < truth.size(); ++k) {
    const TruthSample& a = truth[k];
    const TruthSample& b = truth[k + 1];
    const double dt = b.t - a.t;
    const Vec3 g_vec = cfg.gravity_magnitude * cfg.gravity_dir.normalized();

    // Interval-mean rates inverting the strapdown step exactly.
    const Vec3 omega_true = so3_log(a.r.transposed() * b.r.matrix()) / dt;
    const Vec3 accel_world = (b.v - a.v) / dt;
    const Vec3 accel_body = a.r.transposed() * (accel_world - g_vec);

    ImuSample s;
    s.t = a.t;
    s.omega = omega_true + bg;
    s.acc = accel_body + ba;
    if (!cfg.noise_free) {
      const double sg = cfg.imu_noise.sigma_g / std::sqrt(dt);
      const double sa = cfg.imu_noise.sigma_a / std::sqrt(dt);
      s.omega += Vec3(gauss(rng), gauss(rng), gauss(rng)) * sg;
      s.acc += Vec3(gauss(rng), gauss(rng), gauss(rng)) * sa;
      const double wbg = cfg.imu_noise.sigma_bg * std::sqrt(dt);
      const double wba = cfg.imu_noise.sigma_ba * std::sqrt(dt);
      bg += Vec3(gauss(rng), gauss(rng), gauss(rng)) * wbg;
      ba += Vec3(gauss(rng), gauss(rng), gauss(rng)) * wba;
    }
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// LiDAR synthesis
// ---------------------------------------------------------------------------

namespace {

/// Ray/patch intersection distance, or +inf on a miss.
double cast_ray(const Patch& patch, const Vec3& origin, const Vec3& dir) {
  const Vec3 n = patch.normal();
  const double denom = n.dot(dir);
  if (std::abs(denom) < 1e-12) return std::numeric_limits<double>::infinity();
  const double t = n.dot(patch.corner - origin) / denom;
  if (t <= 1e-6) return std::numeric_limits<double>::infinity();
  const Vec3 hit = origin + t * dir - patch.corner;
  const double u = hit.dot(patch.e1);
  const double v = hit.dot(patch.e2);
  if (u < 0.0 || u > patch.len1 || v < 0.0 || v > patch.len2) {
    return std::numeric_limits<double>::infinity();
  }
  return t;
}

}  // namespace

LidarScan synthesize_scan(const World& world, const PoseFn& pose_fn, double t_ref,
                          const SimConfig& cfg, std::uint64_t scan_index) {
  cfg.validate();
  LidarScan scan;
  scan.t_ref = t_ref;
  const double period = 1.0 / cfg.lidar_rate;
  const int n = cfg.rays_per_scan;

  // Fixed ray table: azimuth sweeps 0..2pi over the scan (vertical fan per
  // azimuth step), elevation covers +-30 deg.
  const int n_el = 40;
  const int n_az = (n + n_el - 1) / n_el;

  std::mt19937_64 rng(cfg.seed ^ (0xda3e39cb94b95bdbULL + scan_index * 0x100000001b3ULL));
  std::normal_distribution<double> gauss(0.0, 1.0);

  scan.points.reserve(n);
  for (int i = 0; i < n; ++i) {
    const int ia = i / n_el;
    const int ie = i % n_el;
    const double az = 2.0 * M_PI * static_cast<double>(ia) / static_cast<double>(n_az);
    const double el =
        (M_PI / 6.0) * (2.0 * static_cast<double>(ie) / static_cast<double>(n_el - 1) - 1.0);
    const Vec3 dir_sensor(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
                          std::sin(el));

    const double t_point = t_ref + period * static_cast<double>(i) / static_cast<double>(n);
    const PoseVel pose = pose_fn(t_point);
    const Vec3 dir_world = pose.r * dir_sensor;

    double best = std::numeric_limits<double>::infinity();
    for (const Patch& patch : world.patches) {
      best = std::min(best, cast_ray(patch, pose.p, dir_world));
    }
    // Noise is drawn per ray regardless of hit/miss so that the stream of
    // draws (and therefore every later point) is independent of geometry.
    const double noise = cfg.noise_free ? 0.0 : cfg.range_sigma * gauss(rng);
    if (!std::isfinite(best) || best > cfg.max_range) continue;
    const double range = best + noise;
    scan.points.push_back({t_point, range * dir_sensor});
  }
  return scan;
}

std::vector<SensorRecord> make_sequence(const World& world, const TrajectorySpec& spec,
                                        const SimConfig& cfg, double duration) {
  cfg.validate();
  const double total = std::min(duration, spec.total_duration());
  const auto truth = generate_truth(spec, cfg.imu_rate);
  const auto imu = synthesize_imu(truth, cfg);

  const PoseFn pose_fn = [&spec](double t) { return pose_at(spec, t); };
  const double scan_period = 1.0 / cfg.lidar_rate;

  std::vector<SensorRecord> records;
  for (const ImuSample& s : imu) {
    if (s.t > total) break;
    SensorRecord rec;
    rec.t = s.t;
    rec.source = SensorSource::kImu;
    rec.payload = s;
    records.push_back(std::move(rec));
  }
  std::uint64_t scan_index = 0;
  for (double t_ref = 0.0; t_ref + scan_period <= total + 1e-9; t_ref += scan_period) {
    LidarScan scan = synthesize_scan(world, pose_fn, t_ref, cfg, scan_index++);
    SensorRecord rec;
    rec.t = scan.t_ref;
    rec.source = SensorSource::kLidar;
    rec.payload = std::move(scan);
    records.push_back(std::move(rec));
  }
  std::stable_sort(records.begin(), records.end(),
                   [](const SensorRecord& a, const SensorRecord& b) { return a.t < b.t; });
  return records;
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

namespace {

void write_double(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  os << buf;
}

Eigen::Quaterniond quat_of(const Rotation3& r) {
  return Eigen::Quaterniond(r.matrix());
}

}  // namespace

void write_sequence(const std::vector<SensorRecord>& records, std::ostream& os) {
  for (const SensorRecord& rec : records) {
    if (rec.source == SensorSource::kImu) {
      const auto& s = std::get<ImuSample>(rec.payload);
      os << "IMU ";
      write_double(os, s.t);
      for (int i = 0; i < 3; ++i) { os << ' '; write_double(os, s.omega(i)); }
      for (int i = 0; i < 3; ++i) { os << ' '; write_double(os, s.acc(i)); }
      os << '\n';
    } else {
      const auto& scan = std::get<LidarScan>(rec.payload);
      os << "PTS ";
      write_double(os, scan.t_ref);
      os << ' ' << scan.points.size() << '\n';
      for (const TimedPoint& tp : scan.points) {
        write_double(os, tp.t);
        for (int i = 0; i < 3; ++i) { os << ' '; write_double(os, tp.p(i)); }
        os << '\n';
      }
    }
  }
}

void write_sequence_file(const std::vector<SensorRecord>& records, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ParseError("cannot open sequence file for writing: " + path, 0);
  write_sequence(records, os);
}

std::vector<SensorRecord> read_sequence(std::istream& is) {
  std::vector<SensorRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "IMU") {
      ImuSample s;
      if (!(ss >> s.t >> s.omega.x() >> s.omega.y() >> s.omega.z() >> s.acc.x() >> s.acc.y() >>
            s.acc.z())) {
        throw ParseError("sequence: malformed IMU record", line_no);
      }
      SensorRecord rec;
      rec.t = s.t;
      rec.source = SensorSource::kImu;
      rec.payload = s;
      out.push_back(std::move(rec));
    } else if (tag == "PTS") {
      LidarScan scan;
      std::size_t n = 0;
      if (!(ss >> scan.t_ref >> n)) throw ParseError("sequence: malformed PTS header", line_no);
      scan.points.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(is, line)) throw ParseError("sequence: truncated scan", line_no);
        ++line_no;
        std::istringstream ps(line);
        TimedPoint tp;
        if (!(ps >> tp.t >> tp.p.x() >> tp.p.y() >> tp.p.z())) {
          throw ParseError("sequence: malformed point line", line_no);
        }
        scan.points.push_back(tp);
      }
      SensorRecord rec;
      rec.t = scan.t_ref;
      rec.source = SensorSource::kLidar;
      rec.payload = std::move(scan);
      out.push_back(std::move(rec));
    } else {
      throw ParseError("sequence: unknown record tag '" + tag + "'", line_no);
    }
  }
  return out;
}

std::vector<SensorRecord> read_sequence_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open sequence file: " + path, 0);
  return read_sequence(is);
}

void write_truth(const std::vector<TruthSample>& truth, std::ostream& os) {
  for (const TruthSample& s : truth) {
    const Eigen::Quaterniond q = quat_of(s.r);
    write_double(os, s.t);
    os << ' '; write_double(os, s.p.x());
    os << ' '; write_double(os, s.p.y());
    os << ' '; write_double(os, s.p.z());
    os << ' '; write_double(os, q.w());
    os << ' '; write_double(os, q.x());
    os << ' '; write_double(os, q.y());
    os << ' '; write_double(os, q.z());
    os << ' '; write_double(os, s.v.x());
    os << ' '; write_double(os, s.v.y());
    os << ' '; write_double(os, s.v.z());
    os << '\n';
  }
}

void write_truth_file(const std::vector<TruthSample>& truth, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ParseError("cannot open truth file for writing: " + path, 0);
  write_truth(truth, os);
}

std::vector<TruthSample> read_truth(std::istream& is) {
  std::vector<TruthSample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    TruthSample s;
    double qw, qx, qy, qz;
    if (!(ss >> s.t >> s.p.x() >> s.p.y() >> s.p.z() >> qw >> qx >> qy >> qz >> s.v.x() >>
          s.v.y() >> s.v.z())) {
      throw ParseError("truth: malformed line", line_no);
    }
    Eigen::Quaterniond q(qw, qx, qy, qz);
    q.normalize();
    s.r = Rotation3::from_matrix(q.toRotationMatrix(), 1e-6);
    out.push_back(s);
  }
  return out;
}

std::vector<TruthSample> read_truth_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open truth file: " + path, 0);
  return read_truth(is);
}

}  // namespace fuse::sim
