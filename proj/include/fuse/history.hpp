#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <shared_mutex>
#include <string>
#include <variant>
#include <vector>

#include "fuse/belief.hpp"
#include "fuse/imu.hpp"
#include "fuse/state.hpp"

namespace fuse {

enum class SensorSource { kImu, kLidar };

/// One LiDAR return with its own emission timestamp (sensor frame).
struct TimedPoint {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
};

/// A full scan: points carry absolute timestamps spread over the scan period.
struct LidarScan {
  double t_ref = 0.0;
  std::vector<TimedPoint> points;
};

/// Timestamped, source-tagged element of the ordered heterogeneous stream.
struct SensorRecord {
  double t = 0.0;
  SensorSource source = SensorSource::kImu;
  std::variant<ImuSample, LidarScan> payload;
};

enum class IngestStatus { kAccepted, kRejectedOutOfOrder, kRejectedNonFinite };

struct IngestResult {
  IngestStatus status = IngestStatus::kAccepted;
  bool accepted() const { return status == IngestStatus::kAccepted; }
};

/// Per-source monotonicity gate at the front of the pipeline. Rejections are
/// counted, never fatal; accepted records flow to the scheduler in arrival
/// order.
class StreamIngest {
 public:
  IngestResult ingest(const SensorRecord& rec);

  std::uint64_t accepted_count(SensorSource s) const;
  std::uint64_t rejected_count() const { return rejected_; }

 private:
  std::optional<double> last_imu_;
  std::optional<double> last_lidar_;
  std::uint64_t accepted_imu_ = 0;
  std::uint64_t accepted_lidar_ = 0;
  std::uint64_t rejected_ = 0;
};

enum class EntryKind { kPropagated, kUpdated };

struct HistoryEntry {
  double tau = 0.0;
  GaussianBelief belief;
  EntryKind kind = EntryKind::kPropagated;

  const State& state() const { return belief.mean; }
};

/// Time-ordered (timestamp, state, belief) record with interpolated query.
/// Single writer, concurrent readers; reads see a consistent snapshot.
class StateHistory {
 public:
  explicit StateHistory(double horizon_s = 2.0) : horizon_(horizon_s) {}

  /// Appends an entry. tau must exceed the newest stored tau, with one
  /// exception: an updated entry at exactly the newest tau supersedes the
  /// propagated belief written at that instant. Entries older than the
  /// horizon are pruned, except that the pair bracketing the prune
  /// watermark is always retained.
  void push(const HistoryEntry& entry);

  /// Interpolated state at t: exact entry when |t - tau| <= 1e-9, otherwise
  /// position/velocity linear, rotation geodesic, biases/extrinsics/gravity
  /// held from the earlier entry. Throws std::out_of_range outside the span.
  State query(double t) const;

  /// Oldest timestamp that pruning must keep queryable (pending deskews).
  void set_prune_watermark(std::optional<double> t);

  std::size_t size() const;
  bool empty() const;
  double oldest_tau() const;
  double newest_tau() const;
  HistoryEntry newest() const;

  /// True when [t0, t1] lies inside the stored span.
  bool spans(double t0, double t1) const;

  double horizon() const { return horizon_; }

 private:
  void prune_locked(double newest_tau);

  double horizon_;
  std::optional<double> watermark_;
  std::deque<HistoryEntry> entries_;
  mutable std::shared_mutex mutex_;
};

}  // namespace fuse
