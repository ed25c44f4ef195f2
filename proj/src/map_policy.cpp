#include "fuse/map_policy.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "fuse/errors.hpp"

namespace fuse {

namespace {
constexpr char kMagic[8] = {'F', 'U', 'S', 'E', 'M', 'A', 'P', '1'};

// Collision-free packed voxel key for |cell coordinate| < 2^20.
std::uint64_t voxel_cell(const Vec3& p, double size) {
  const auto cx = static_cast<std::int64_t>(std::floor(p.x() / size));
  const auto cy = static_cast<std::int64_t>(std::floor(p.y() / size));
  const auto cz = static_cast<std::int64_t>(std::floor(p.z() / size));
  constexpr std::uint64_t mask = (1ULL << 21) - 1;
  return ((static_cast<std::uint64_t>(cx) & mask) << 42) |
         ((static_cast<std::uint64_t>(cy) & mask) << 21) |
         (static_cast<std::uint64_t>(cz) & mask);
}
}  // namespace

MapMode map_mode_from_string(const std::string& s) {
  if (s == "mapping") return MapMode::kMapping;
  if (s == "localization") return MapMode::kLocalization;
  throw ConfigError("unknown map mode: " + s);
}

std::string to_string(MapMode m) {
  return m == MapMode::kMapping ? "mapping" : "localization";
}

PersistentMap::PersistentMap(IndexKind kind, double voxel_size, MapMode mode, int per_voxel_cap)
    : kind_(kind),
      voxel_size_(voxel_size),
      mode_(mode),
      per_voxel_cap_(per_voxel_cap),
      index_(make_spatial_index(kind, voxel_size)) {
  if (per_voxel_cap_ < 1) throw ConfigError("per-voxel cap must be >= 1");
}

void PersistentMap::insert_capped(const Vec3& p) {
  const std::uint64_t cell = voxel_cell(p, voxel_size_);
  auto& members = voxel_members_[cell];
  if (static_cast<int>(members.size()) >= per_voxel_cap_) {
    index_->remove(members.front());
    members.pop_front();
  }
  members.push_back(index_->insert(p));
}

void PersistentMap::apply_policy(const AcceptedSet& accepted) {
  if (mode_ == MapMode::kLocalization) return;
  for (const Vec3& p : accepted.world_points) insert_capped(p);
  ++epoch_;
}

void PersistentMap::insert_points(const std::vector<Vec3>& points) {
  for (const Vec3& p : points) insert_capped(p);
}

namespace {

template <typename T>
void write_le(std::ostream& os, T value) {
  // Little-endian host assumed (x86-64 / aarch64 LE targets).
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& is, std::size_t& offset) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw ParseError("map stream: truncated read", offset);
  offset += sizeof(T);
  return value;
}

}  // namespace

void save_map(const PersistentMap& map, std::ostream& os) {
  os.write(kMagic, sizeof(kMagic));
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(map.kind()));
  write_le<double>(os, map.voxel_size());
  const std::vector<Vec3> points = map.index().points_in_insertion_order();
  write_le<std::uint64_t>(os, points.size());
  for (const Vec3& p : points) {
    write_le<double>(os, p.x());
    write_le<double>(os, p.y());
    write_le<double>(os, p.z());
  }
}

void save_map_file(const PersistentMap& map, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ParseError("cannot open map file for writing: " + path, 0);
  save_map(map, os);
}

PersistentMap load_map(std::istream& is, MapMode mode) {
  std::size_t offset = 0;
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("map stream: bad magic", offset);
  }
  offset += sizeof(magic);

  const auto kind_raw = read_le<std::uint32_t>(is, offset);
  if (kind_raw > 2) throw ParseError("map stream: unknown index kind", offset - 4);
  const auto voxel_size = read_le<double>(is, offset);
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) {
    throw ParseError("map stream: invalid voxel size", offset - 8);
  }
  const auto count = read_le<std::uint64_t>(is, offset);

  PersistentMap map(static_cast<IndexKind>(kind_raw), voxel_size, mode);
  std::vector<Vec3> points;
  points.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const double x = read_le<double>(is, offset);
    const double y = read_le<double>(is, offset);
    const double z = read_le<double>(is, offset);
    points.emplace_back(x, y, z);
  }
  map.insert_points(points);
  return map;
}

PersistentMap load_map_file(const std::string& path, MapMode mode) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open map file: " + path, 0);
  return load_map(is, mode);
}

}  // namespace fuse
