#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fuse/types.hpp"

namespace fuse {

enum class IndexKind { kKdTree, kVoxelGrid, kHashVoxel };

IndexKind index_kind_from_string(const std::string& s);
std::string to_string(IndexKind k);

/// Point store with exact k-nearest-neighbor search. All realizations return
/// the same result as brute force, with distance ties broken by insertion
/// order. Single writer, concurrent readers (the map policy serializes
/// writes against association reads).
class SpatialIndex {
 public:
  virtual ~SpatialIndex() = default;

  /// Stores a point and returns its insertion id (monotonic).
  virtual std::uint64_t insert(const Vec3& p) = 0;

  /// Removes a previously inserted point. Unknown ids are ignored.
  virtual void remove(std::uint64_t id) = 0;

  /// The min(k, size()) nearest stored points by Euclidean distance,
  /// ties broken by insertion order. Empty index yields an empty list.
  virtual std::vector<Vec3> knn(const Vec3& query, int k) const = 0;

  virtual std::size_t size() const = 0;
  virtual IndexKind kind() const = 0;

  /// All live points in insertion order (serialization support).
  virtual std::vector<Vec3> points_in_insertion_order() const = 0;

  virtual double voxel_size() const { return 0.0; }
};

std::unique_ptr<SpatialIndex> make_spatial_index(IndexKind kind, double voxel_size = 0.5);

}  // namespace fuse
