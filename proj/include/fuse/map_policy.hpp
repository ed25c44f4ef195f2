#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "fuse/spatial_index.hpp"
#include "fuse/types.hpp"

namespace fuse {

enum class MapMode { kMapping, kLocalization };

MapMode map_mode_from_string(const std::string& s);
std::string to_string(MapMode m);

/// World-frame points admitted into the map after a successful update.
struct AcceptedSet {
  std::vector<Vec3> world_points;
  double stamp = 0.0;
};

/// Persistent map over a spatial index with a mode-dependent update policy.
/// Mapping inserts with a per-voxel cap (oldest point dropped on overflow);
/// localization leaves the point set untouched.
class PersistentMap {
 public:
  PersistentMap(IndexKind kind, double voxel_size, MapMode mode, int per_voxel_cap = 20);

  /// Mapping: insert the accepted points, bump the epoch. Localization:
  /// structural no-op, epoch unchanged.
  void apply_policy(const AcceptedSet& accepted);

  const SpatialIndex& index() const { return *index_; }
  MapMode mode() const { return mode_; }
  void set_mode(MapMode m) { mode_ = m; }
  std::uint64_t epoch() const { return epoch_; }
  std::size_t point_count() const { return index_->size(); }
  double voxel_size() const { return voxel_size_; }
  IndexKind kind() const { return kind_; }
  int per_voxel_cap() const { return per_voxel_cap_; }

  /// Unconditional insertion (bootstrap/loading), still cap-limited.
  void insert_points(const std::vector<Vec3>& points);

 private:
  void insert_capped(const Vec3& p);

  IndexKind kind_;
  double voxel_size_;
  MapMode mode_;
  int per_voxel_cap_;
  std::unique_ptr<SpatialIndex> index_;
  std::uint64_t epoch_ = 0;
  std::unordered_map<std::uint64_t, std::deque<std::uint64_t>> voxel_members_;
};

/// Little-endian binary map image: magic "FUSEMAP1", u32 index kind,
/// f64 voxel size, u64 count, then count x 3 f64 coordinates (m).
void save_map(const PersistentMap& map, std::ostream& os);
void save_map_file(const PersistentMap& map, const std::string& path);

/// Throws ParseError (with byte offset) on malformed input.
PersistentMap load_map(std::istream& is, MapMode mode = MapMode::kLocalization);
PersistentMap load_map_file(const std::string& path, MapMode mode = MapMode::kLocalization);

}  // namespace fuse
