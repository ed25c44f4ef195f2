#include "fuse/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <unordered_map>

#include "fuse/errors.hpp"

namespace fuse {

IndexKind index_kind_from_string(const std::string& s) {
  if (s == "kdtree") return IndexKind::kKdTree;
  if (s == "voxelgrid") return IndexKind::kVoxelGrid;
  if (s == "hashvoxel") return IndexKind::kHashVoxel;
  throw ConfigError("unknown spatial index kind: " + s);
}

std::string to_string(IndexKind k) {
  switch (k) {
    case IndexKind::kKdTree: return "kdtree";
    case IndexKind::kVoxelGrid: return "voxelgrid";
    case IndexKind::kHashVoxel: return "hashvoxel";
  }
  return "?";
}

namespace {

struct Candidate {
  double d2;
  std::uint64_t id;
  Vec3 p;
  bool operator<(const Candidate& o) const {
    return d2 < o.d2 || (d2 == o.d2 && id < o.id);
  }
};

/// Bounded best-k collector ordered by (distance^2, insertion id).
class BestK {
 public:
  explicit BestK(int k) : k_(static_cast<std::size_t>(k)) {}

  void offer(double d2, std::uint64_t id, const Vec3& p) {
    if (heap_.size() < k_) {
      heap_.push_back({d2, id, p});
      std::push_heap(heap_.begin(), heap_.end());
      return;
    }
    if (Candidate{d2, id, p} < heap_.front()) {
      std::pop_heap(heap_.begin(), heap_.end());
      heap_.back() = {d2, id, p};
      std::push_heap(heap_.begin(), heap_.end());
    }
  }

  bool full() const { return heap_.size() >= k_; }
  double worst_d2() const {
    return heap_.empty() ? std::numeric_limits<double>::infinity() : heap_.front().d2;
  }

  std::vector<Vec3> sorted_points() {
    std::sort(heap_.begin(), heap_.end());
    std::vector<Vec3> out;
    out.reserve(heap_.size());
    for (const auto& c : heap_) out.push_back(c.p);
    return out;
  }

 private:
  std::size_t k_;
  std::vector<Candidate> heap_;  // max-heap on (d2, id)
};

// ---------------------------------------------------------------------------
// kd-tree
// ---------------------------------------------------------------------------

class KdTreeIndex final : public SpatialIndex {
 public:
  std::uint64_t insert(const Vec3& p) override {
    const std::uint64_t id = next_id_++;
    points_.push_back({p, id, true});
    insert_node(static_cast<int>(points_.size()) - 1);
    ++live_;
    maybe_rebuild();
    return id;
  }

  void remove(std::uint64_t id) override {
    auto it = id_to_slot_.find(id);
    if (it == id_to_slot_.end()) return;
    if (points_[it->second].live) {
      points_[it->second].live = false;
      --live_;
      ++dead_;
    }
  }

  std::vector<Vec3> knn(const Vec3& query, int k) const override {
    if (k < 1) throw std::invalid_argument("knn: k must be >= 1");
    BestK best(k);
    if (root_ >= 0) search(root_, query, best);
    return best.sorted_points();
  }

  std::size_t size() const override { return live_; }
  IndexKind kind() const override { return IndexKind::kKdTree; }

  std::vector<Vec3> points_in_insertion_order() const override {
    std::vector<Vec3> out;
    out.reserve(live_);
    for (const auto& rec : points_) {
      if (rec.live) out.push_back(rec.p);
    }
    return out;
  }

 private:
  struct PointRec {
    Vec3 p;
    std::uint64_t id;
    bool live;
  };
  struct Node {
    int point = -1;
    int axis = 0;
    int left = -1;
    int right = -1;
  };

  void insert_node(int slot) {
    id_to_slot_[points_[slot].id] = slot;
    if (root_ < 0) {
      root_ = new_node(slot, 0);
      return;
    }
    int cur = root_;
    while (true) {
      Node& n = nodes_[cur];
      const int axis = n.axis;
      const bool go_left = points_[slot].p(axis) < points_[n.point].p(axis);
      int& child = go_left ? n.left : n.right;
      if (child < 0) {
        child = new_node(slot, (axis + 1) % 3);
        return;
      }
      cur = child;
    }
  }

  int new_node(int slot, int axis) {
    nodes_.push_back({slot, axis, -1, -1});
    return static_cast<int>(nodes_.size()) - 1;
  }

  void search(int node_idx, const Vec3& q, BestK& best) const {
    const Node& n = nodes_[node_idx];
    const PointRec& rec = points_[n.point];
    if (rec.live) {
      best.offer((rec.p - q).squaredNorm(), rec.id, rec.p);
    }
    const double diff = q(n.axis) - rec.p(n.axis);
    const int near = diff < 0.0 ? n.left : n.right;
    const int far = diff < 0.0 ? n.right : n.left;
    if (near >= 0) search(near, q, best);
    // The far side may contain equal-distance points with smaller insertion
    // ids, so descend on <= rather than <.
    if (far >= 0 && (!best.full() || diff * diff <= best.worst_d2())) {
      search(far, q, best);
    }
  }

  void maybe_rebuild() {
    // Rebuild balanced when the tree has doubled or is mostly tombstones.
    if (points_.size() < 64) return;
    if (points_.size() < rebuild_at_ && dead_ * 2 < points_.size()) return;

    std::vector<PointRec> live_points;
    live_points.reserve(live_);
    for (const auto& rec : points_) {
      if (rec.live) live_points.push_back(rec);
    }
    points_ = std::move(live_points);
    dead_ = 0;
    nodes_.clear();
    id_to_slot_.clear();
    root_ = -1;
    std::vector<int> order(points_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    for (std::size_t i = 0; i < points_.size(); ++i) id_to_slot_[points_[i].id] = static_cast<int>(i);
    root_ = build_balanced(order, 0, static_cast<int>(order.size()), 0);
    rebuild_at_ = points_.size() * 2;
  }

  int build_balanced(std::vector<int>& order, int lo, int hi, int axis) {
    if (lo >= hi) return -1;
    const int mid = lo + (hi - lo) / 2;
    std::nth_element(order.begin() + lo, order.begin() + mid, order.begin() + hi,
                     [&](int a, int b) {
                       if (points_[a].p(axis) != points_[b].p(axis)) {
                         return points_[a].p(axis) < points_[b].p(axis);
                       }
                       return points_[a].id < points_[b].id;
                     });
    const int node = new_node(order[mid], axis);
    nodes_[node].left = build_balanced(order, lo, mid, (axis + 1) % 3);
    nodes_[node].right = build_balanced(order, mid + 1, hi, (axis + 1) % 3);
    return node;
  }

  std::vector<PointRec> points_;
  std::vector<Node> nodes_;
  std::unordered_map<std::uint64_t, int> id_to_slot_;
  int root_ = -1;
  std::uint64_t next_id_ = 0;
  std::size_t live_ = 0;
  std::size_t dead_ = 0;
  std::size_t rebuild_at_ = 128;
};

// ---------------------------------------------------------------------------
// Voxel-bucket search shared by the grid and hash realizations
// ---------------------------------------------------------------------------

struct VoxelKey {
  std::int64_t x, y, z;
  bool operator==(const VoxelKey& o) const { return x == o.x && y == o.y && z == o.z; }
  bool operator<(const VoxelKey& o) const {
    if (x != o.x) return x < o.x;
    if (y != o.y) return y < o.y;
    return z < o.z;
  }
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const {
    // Large-prime mixing, common for sparse voxel hashing.
    const std::uint64_t h = static_cast<std::uint64_t>(k.x) * 73856093ULL ^
                            static_cast<std::uint64_t>(k.y) * 19349669ULL ^
                            static_cast<std::uint64_t>(k.z) * 83492791ULL;
    return static_cast<std::size_t>(h);
  }
};

struct BucketPoint {
  Vec3 p;
  std::uint64_t id;
};
using Bucket = std::vector<BucketPoint>;

inline std::int64_t voxel_coord(double v, double size) {
  return static_cast<std::int64_t>(std::floor(v / size));
}

inline VoxelKey voxel_key(const Vec3& p, double size) {
  return {voxel_coord(p.x(), size), voxel_coord(p.y(), size), voxel_coord(p.z(), size)};
}

/// Exact kNN over voxel buckets: expand Chebyshev rings around the query
/// voxel until the k-th best distance cannot be beaten by any unexplored
/// ring. Ring r >= 1 is at Euclidean distance >= (r-1)*size from the query.
template <typename BucketLookup>
std::vector<Vec3> voxel_knn(const Vec3& q, int k, double size, std::size_t total,
                            const VoxelKey& lo, const VoxelKey& hi, BucketLookup&& lookup) {
  if (k < 1) throw std::invalid_argument("knn: k must be >= 1");
  BestK best(k);
  if (total == 0) return best.sorted_points();

  const VoxelKey center = voxel_key(q, size);
  const std::int64_t max_ring =
      std::max({std::abs(center.x - lo.x), std::abs(hi.x - center.x),
                std::abs(center.y - lo.y), std::abs(hi.y - center.y),
                std::abs(center.z - lo.z), std::abs(hi.z - center.z)}) + 1;

  // Chebyshev distance from the query voxel to the occupied bounding box;
  // rings closer than this cannot contain any bucket.
  auto axis_gap = [](std::int64_t c, std::int64_t a, std::int64_t b) {
    if (c < a) return a - c;
    if (c > b) return c - b;
    return std::int64_t{0};
  };
  const std::int64_t min_ring = std::max(
      {axis_gap(center.x, lo.x, hi.x), axis_gap(center.y, lo.y, hi.y),
       axis_gap(center.z, lo.z, hi.z)});

  for (std::int64_t ring = 0; ring <= max_ring; ++ring) {
    if (best.full()) {
      const double lb = ring >= 1 ? (static_cast<double>(ring - 1) * size) : 0.0;
      if (lb * lb > best.worst_d2()) break;
    }
    if (ring < min_ring) continue;
    auto visit = [&](std::int64_t dx, std::int64_t dy, std::int64_t dz) {
      const Bucket* bucket = lookup(VoxelKey{center.x + dx, center.y + dy, center.z + dz});
      if (!bucket) return;
      for (const auto& bp : *bucket) {
        best.offer((bp.p - q).squaredNorm(), bp.id, bp.p);
      }
    };
    if (ring == 0) {
      visit(0, 0, 0);
      continue;
    }
    for (std::int64_t dx = -ring; dx <= ring; ++dx) {
      for (std::int64_t dy = -ring; dy <= ring; ++dy) {
        for (std::int64_t dz = -ring; dz <= ring; ++dz) {
          if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
          visit(dx, dy, dz);
        }
      }
    }
  }
  return best.sorted_points();
}

template <typename MapType>
class VoxelIndexBase : public SpatialIndex {
 public:
  explicit VoxelIndexBase(double voxel_size) : size_(voxel_size) {
    if (!(voxel_size > 0.0)) throw std::invalid_argument("voxel size must be positive");
  }

  std::uint64_t insert(const Vec3& p) override {
    const std::uint64_t id = next_id_++;
    const VoxelKey key = voxel_key(p, size_);
    buckets_[key].push_back({p, id});
    id_to_key_[id] = key;
    ++count_;
    lo_.x = std::min(lo_.x, key.x); lo_.y = std::min(lo_.y, key.y); lo_.z = std::min(lo_.z, key.z);
    hi_.x = std::max(hi_.x, key.x); hi_.y = std::max(hi_.y, key.y); hi_.z = std::max(hi_.z, key.z);
    return id;
  }

  void remove(std::uint64_t id) override {
    auto it = id_to_key_.find(id);
    if (it == id_to_key_.end()) return;
    auto bit = buckets_.find(it->second);
    if (bit != buckets_.end()) {
      auto& vec = bit->second;
      vec.erase(std::remove_if(vec.begin(), vec.end(),
                               [&](const BucketPoint& bp) { return bp.id == id; }),
                vec.end());
      if (vec.empty()) buckets_.erase(bit);
      --count_;
    }
    id_to_key_.erase(it);
  }

  std::vector<Vec3> knn(const Vec3& query, int k) const override {
    return voxel_knn(query, k, size_, count_, lo_, hi_, [&](const VoxelKey& key) -> const Bucket* {
      auto it = buckets_.find(key);
      return it == buckets_.end() ? nullptr : &it->second;
    });
  }

  std::size_t size() const override { return count_; }
  double voxel_size() const override { return size_; }

  std::vector<Vec3> points_in_insertion_order() const override {
    std::vector<std::pair<std::uint64_t, Vec3>> all;
    all.reserve(count_);
    for (const auto& [key, bucket] : buckets_) {
      for (const auto& bp : bucket) all.emplace_back(bp.id, bp.p);
    }
    std::sort(all.begin(), all.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Vec3> out;
    out.reserve(all.size());
    for (const auto& [id, p] : all) out.push_back(p);
    return out;
  }

 protected:
  double size_;
  MapType buckets_;
  std::unordered_map<std::uint64_t, VoxelKey> id_to_key_;
  std::uint64_t next_id_ = 0;
  std::size_t count_ = 0;
  VoxelKey lo_{0, 0, 0};
  VoxelKey hi_{0, 0, 0};
};

class VoxelGridIndex final : public VoxelIndexBase<std::map<VoxelKey, Bucket>> {
 public:
  using VoxelIndexBase::VoxelIndexBase;
  IndexKind kind() const override { return IndexKind::kVoxelGrid; }
};

class HashVoxelIndex final
    : public VoxelIndexBase<std::unordered_map<VoxelKey, Bucket, VoxelKeyHash>> {
 public:
  using VoxelIndexBase::VoxelIndexBase;
  IndexKind kind() const override { return IndexKind::kHashVoxel; }
};

}  // namespace

std::unique_ptr<SpatialIndex> make_spatial_index(IndexKind kind, double voxel_size) {
  switch (kind) {
    case IndexKind::kKdTree: return std::make_unique<KdTreeIndex>();
    case IndexKind::kVoxelGrid: return std::make_unique<VoxelGridIndex>(voxel_size);
    case IndexKind::kHashVoxel: return std::make_unique<HashVoxelIndex>(voxel_size);
  }
  throw ConfigError("make_spatial_index: unknown kind");
}

}  // namespace fuse
