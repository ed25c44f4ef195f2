#include "fuse/history.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>

namespace fuse {

double GaussianBelief::min_cov_eigenvalue() const {
  const Mat23 sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Mat23> eig(sym, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

bool GaussianBelief::covariance_ok(double sym_tol, double eig_floor) const {
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > sym_tol) return false;
  return min_cov_eigenvalue() >= eig_floor;
}

IngestResult StreamIngest::ingest(const SensorRecord& rec) {
  if (!std::isfinite(rec.t)) {
    ++rejected_;
    return {IngestStatus::kRejectedNonFinite};
  }
  auto& last = rec.source == SensorSource::kImu ? last_imu_ : last_lidar_;
  if (last.has_value() && rec.t <= *last) {
    ++rejected_;
    return {IngestStatus::kRejectedOutOfOrder};
  }
  last = rec.t;
  (rec.source == SensorSource::kImu ? accepted_imu_ : accepted_lidar_)++;
  return {IngestStatus::kAccepted};
}

std::uint64_t StreamIngest::accepted_count(SensorSource s) const {
  return s == SensorSource::kImu ? accepted_imu_ : accepted_lidar_;
}

void StateHistory::push(const HistoryEntry& entry) {
  std::unique_lock lock(mutex_);
  if (!entries_.empty()) {
    const HistoryEntry& newest = entries_.back();
    if (entry.tau == newest.tau && entry.kind == EntryKind::kUpdated &&
        newest.kind == EntryKind::kPropagated) {
      // An update at the same instant supersedes the propagated belief.
      entries_.back() = entry;
      return;
    }
    if (!(entry.tau > newest.tau)) {
      throw std::invalid_argument("StateHistory::push: non-monotonic timestamp");
    }
  }
  entries_.push_back(entry);
  prune_locked(entry.tau);
}

void StateHistory::prune_locked(double newest_tau) {
  const double cutoff = newest_tau - horizon_;
  while (entries_.size() > 1 && entries_.front().tau < cutoff) {
    // Keep the pair bracketing the watermark: never drop an entry if the
    // one after it is still above the watermark boundary.
    if (watermark_.has_value() && entries_[1].tau > *watermark_) break;
    entries_.pop_front();
  }
}

void StateHistory::set_prune_watermark(std::optional<double> t) {
  std::unique_lock lock(mutex_);
  watermark_ = t;
}

std::size_t StateHistory::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

bool StateHistory::empty() const {
  std::shared_lock lock(mutex_);
  return entries_.empty();
}

double StateHistory::oldest_tau() const {
  std::shared_lock lock(mutex_);
  if (entries_.empty()) throw std::out_of_range("StateHistory: empty");
  return entries_.front().tau;
}

double StateHistory::newest_tau() const {
  std::shared_lock lock(mutex_);
  if (entries_.empty()) throw std::out_of_range("StateHistory: empty");
  return entries_.back().tau;
}

HistoryEntry StateHistory::newest() const {
  std::shared_lock lock(mutex_);
  if (entries_.empty()) throw std::out_of_range("StateHistory: empty");
  return entries_.back();
}

bool StateHistory::spans(double t0, double t1) const {
  std::shared_lock lock(mutex_);
  if (entries_.empty()) return false;
  return entries_.front().tau <= t0 + 1e-9 && t1 <= entries_.back().tau + 1e-9;
}

State StateHistory::query(double t) const {
  std::shared_lock lock(mutex_);
  if (entries_.empty()) throw std::out_of_range("StateHistory::query: empty history");
  const double t_min = entries_.front().tau;
  const double t_max = entries_.back().tau;
  if (t < t_min - 1e-9 || t > t_max + 1e-9) {
    throw std::out_of_range("StateHistory::query: timestamp outside stored span");
  }

  auto upper = std::lower_bound(entries_.begin(), entries_.end(), t,
                                [](const HistoryEntry& e, double ts) { return e.tau < ts; });
  if (upper != entries_.end() && std::abs(upper->tau - t) <= 1e-9) return upper->state();
  if (upper == entries_.begin()) return upper->state();
  auto lower = std::prev(upper);
  if (std::abs(lower->tau - t) <= 1e-9 || upper == entries_.end()) return lower->state();

  const State& a = lower->state();
  const State& b = upper->state();
  const double s = (t - lower->tau) / (upper->tau - lower->tau);

  State out = a;  // biases, extrinsics, gravity held from the earlier entry
  out.p_wi = (1.0 - s) * a.p_wi + s * b.p_wi;
  out.v_wi = (1.0 - s) * a.v_wi + s * b.v_wi;
  const Vec3 dtheta = so3_log(a.r_wi.transposed() * b.r_wi.matrix());
  out.r_wi = a.r_wi * Rotation3::exp(s * dtheta);
  return out;
}

}  // namespace fuse
