#include "scp/coords.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "scp/error.hpp"

namespace scp {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_azimuth(double y, double x) {
  double theta = std::atan2(y, x);
  if (theta < 0) theta += kTwoPi;
  // atan2 of a tiny negative y can round up to exactly 2pi after the shift.
  if (theta >= kTwoPi) theta = 0.0;
  return theta;
}

std::uint32_t round_clamped(double value, std::uint32_t max_index) {
  const double r = std::round(value);
  if (!(r > 0)) return 0;
  if (r >= static_cast<double>(max_index)) return max_index;
  return static_cast<std::uint32_t>(r);
}

}  // namespace

const char* to_string(CoordSystem system) {
  switch (system) {
    case CoordSystem::cartesian: return "cartesian";
    case CoordSystem::cylindrical: return "cylindrical";
    case CoordSystem::spherical: return "spherical";
  }
  return "unknown";
}

CoordSystem parse_coord_system(const std::string& name) {
  if (name == "cartesian") return CoordSystem::cartesian;
  if (name == "cylindrical") return CoordSystem::cylindrical;
  if (name == "spherical") return CoordSystem::spherical;
  fail(ErrorKind::config, "unknown coordinate system '" + name + "'");
}

SphPoint cart_to_sph(Vec3 p) {
  const double rho = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
  if (rho == 0) return {};
  const double c = std::clamp(p.z / rho, -1.0, 1.0);
  return {rho, wrap_azimuth(p.y, p.x), std::acos(c)};
}

Vec3 sph_to_cart(SphPoint s) {
  const double sp = std::sin(s.phi);
  return {s.rho * sp * std::cos(s.theta), s.rho * sp * std::sin(s.theta),
          s.rho * std::cos(s.phi)};
}

CylPoint cart_to_cyl(Vec3 p) {
  const double rho = std::hypot(p.x, p.y);
  if (rho == 0) return {0.0, 0.0, p.z};
  return {rho, wrap_azimuth(p.y, p.x), p.z};
}

Vec3 cyl_to_cart(CylPoint c) {
  return {c.rho * std::cos(c.theta), c.rho * std::sin(c.theta), c.z};
}

std::array<double, 3> QuantSteps::axis_steps() const {
  switch (system) {
    case CoordSystem::cartesian: return {q_primary, q_primary, q_primary};
    case CoordSystem::cylindrical: return {q_primary, q_theta, q_primary};
    case CoordSystem::spherical: return {q_primary, q_theta, q_phi};
  }
  return {q_primary, q_primary, q_primary};
}

std::int64_t count_bins(double rho_max, double q) {
  const double ratio = rho_max / q;
  return static_cast<std::int64_t>(std::ceil(ratio - 1e-9 * std::max(1.0, ratio)));
}

int depth_for_max_index(std::uint64_t max_index) {
  return std::max(1, static_cast<int>(std::bit_width(max_index)));
}

namespace {

void check_depth(int depth) {
  if (depth > kMaxDepth)
    fail(ErrorKind::config, "quantization step too fine: octree depth " +
                                std::to_string(depth) + " exceeds " +
                                std::to_string(kMaxDepth));
}

void set_angular_steps(QuantSteps& s) {
  s.q_theta = kTwoPi / static_cast<double>(s.bins - 1);
  s.q_phi = std::numbers::pi / static_cast<double>(s.bins - 1);
}

}  // namespace

QuantSteps derive_steps(CoordSystem system, double q, const PointCloud& cloud) {
  if (!(q > 0) || !std::isfinite(q))
    fail(ErrorKind::config, "quantization step must be positive");
  if (cloud.empty())
    fail(ErrorKind::argument, "cannot derive quantization steps for an empty cloud");

  QuantSteps s;
  s.system = system;
  s.q_primary = q;

  double sph_max = 0;
  Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity()};
  Vec3 hi = -1.0 * lo;
  double cyl_max = 0;
  for (const Vec3& p : cloud.points) {
    sph_max = std::max(sph_max, norm(p));
    cyl_max = std::max(cyl_max, std::hypot(p.x, p.y));
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
  }

  switch (system) {
    case CoordSystem::spherical: {
      s.rho_max = sph_max;
      s.bins = count_bins(s.rho_max, q);
      if (s.bins < 2) fail(ErrorKind::config, "quantization step too coarse");
      set_angular_steps(s);
      // The radial index reaches `bins` at rho = rho_max.
      s.depth = depth_for_max_index(static_cast<std::uint64_t>(s.bins));
      break;
    }
    case CoordSystem::cylindrical: {
      s.rho_max = cyl_max;
      s.bins = count_bins(s.rho_max, q);
      if (s.bins < 2) fail(ErrorKind::config, "quantization step too coarse");
      set_angular_steps(s);
      s.origin_offset = {0.0, 0.0, lo.z};
      const double z_top = std::round((hi.z - lo.z) / q);
      if (z_top > std::ldexp(1.0, kMaxDepth)) check_depth(kMaxDepth + 1);
      s.depth = depth_for_max_index(
          std::max(static_cast<std::uint64_t>(s.bins), static_cast<std::uint64_t>(z_top)));
      break;
    }
    case CoordSystem::cartesian: {
      // rho_max keeps the spherical extent for radial partitioning.
      s.rho_max = sph_max;
      s.origin_offset = lo;
      const double extent = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z});
      const double top = std::round(extent / q);
      if (top > std::ldexp(1.0, kMaxDepth)) check_depth(kMaxDepth + 1);
      s.bins = std::max<std::int64_t>(2, static_cast<std::int64_t>(top) + 1);
      s.depth = depth_for_max_index(static_cast<std::uint64_t>(top));
      break;
    }
  }
  check_depth(s.depth);
  return s;
}

QuantSteps steps_from_header(CoordSystem system, double q, double rho_max,
                             Vec3 origin_offset, int depth) {
  if (!(q > 0) || !std::isfinite(q))
    fail(ErrorKind::config, "quantization step must be positive");
  if (depth < 1 || depth > kMaxDepth)
    fail(ErrorKind::config, "octree depth out of range: " + std::to_string(depth));
  QuantSteps s;
  s.system = system;
  s.q_primary = q;
  s.rho_max = rho_max;
  s.origin_offset = origin_offset;
  s.depth = depth;
  if (system == CoordSystem::cartesian) {
    s.bins = std::max<std::int64_t>(2, std::int64_t{1} << depth);
  } else {
    s.bins = count_bins(rho_max, q);
    if (s.bins < 2) fail(ErrorKind::config, "quantization step too coarse");
    set_angular_steps(s);
  }
  return s;
}

Index3 quantize_point(Vec3 p, const QuantSteps& steps) {
  const std::uint32_t top = steps.max_index();
  switch (steps.system) {
    case CoordSystem::cartesian: {
      const Vec3 d = p - steps.origin_offset;
      return {round_clamped(d.x / steps.q_primary, top),
              round_clamped(d.y / steps.q_primary, top),
              round_clamped(d.z / steps.q_primary, top)};
    }
    case CoordSystem::cylindrical: {
      const CylPoint c = cart_to_cyl(p);
      return {round_clamped(c.rho / steps.q_primary, top),
              round_clamped(c.theta / steps.q_theta, top),
              round_clamped((c.z - steps.origin_offset.z) / steps.q_primary, top)};
    }
    case CoordSystem::spherical: {
      const SphPoint s = cart_to_sph(p);
      return {round_clamped(s.rho / steps.q_primary, top),
              round_clamped(s.theta / steps.q_theta, top),
              round_clamped(s.phi / steps.q_phi, top)};
    }
  }
  return {0, 0, 0};
}

Vec3 dequantize_index(const Index3& index, const QuantSteps& steps) {
  const double i0 = index[0], i1 = index[1], i2 = index[2];
  switch (steps.system) {
    case CoordSystem::cartesian:
      return steps.origin_offset +
             Vec3{i0 * steps.q_primary, i1 * steps.q_primary, i2 * steps.q_primary};
    case CoordSystem::cylindrical:
      return cyl_to_cart({i0 * steps.q_primary, i1 * steps.q_theta,
                          steps.origin_offset.z + i2 * steps.q_primary});
    case CoordSystem::spherical:
      return sph_to_cart({i0 * steps.q_primary, i1 * steps.q_theta, i2 * steps.q_phi});
  }
  return {};
}

std::uint64_t morton_key(const Index3& index, int depth) {
  std::uint64_t key = 0;
  for (int bit = depth - 1; bit >= 0; --bit) {
    const std::uint64_t digit = (((index[0] >> bit) & 1u) << 2) |
                                (((index[1] >> bit) & 1u) << 1) |
                                ((index[2] >> bit) & 1u);
    key = (key << 3) | digit;
  }
  return key;
}

void sort_unique_morton(std::vector<Index3>& indices, int depth) {
  std::vector<std::pair<std::uint64_t, Index3>> keyed;
  keyed.reserve(indices.size());
  for (const auto& idx : indices) keyed.emplace_back(morton_key(idx, depth), idx);
  std::sort(keyed.begin(), keyed.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  indices.clear();
  for (std::size_t i = 0; i < keyed.size(); ++i)
    if (i == 0 || keyed[i].first != keyed[i - 1].first) indices.push_back(keyed[i].second);
}

QuantizedCloud quantize(const PointCloud& cloud, const QuantSteps& steps) {
  QuantizedCloud qc;
  qc.steps = steps;
  qc.original_count = cloud.size();
  qc.indices.reserve(cloud.size());
  for (const Vec3& p : cloud.points) qc.indices.push_back(quantize_point(p, steps));
  sort_unique_morton(qc.indices, steps.depth);
  return qc;
}

PointCloud dequantize(const QuantizedCloud& qc) {
  PointCloud cloud;
  cloud.points.reserve(qc.indices.size());
  for (const auto& idx : qc.indices) cloud.points.push_back(dequantize_index(idx, qc.steps));
  return cloud;
}

}  // namespace scp
