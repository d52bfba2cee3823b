#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace scp {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;

  double operator[](int k) const { return k == 0 ? x : (k == 1 ? y : z); }
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double squared_norm(Vec3 a) { return dot(a, a); }
inline double norm(Vec3 a) { return std::sqrt(squared_norm(a)); }

// Squared Euclidean distance; every nearest-neighbour routine uses this exact
// expression so that results compare bit-for-bit.
inline double squared_distance(Vec3 a, Vec3 b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

struct PointCloud {
  std::vector<Vec3> points;
  // One value per point when present.
  std::optional<std::vector<double>> attr;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

// Throws ErrorKind::argument when a coordinate is non-finite or attr has the
// wrong length.
void validate(const PointCloud& cloud);

}  // namespace scp
