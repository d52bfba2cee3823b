#include "doctest.h"

#include <scp/codec.hpp>
#include <scp/error.hpp>
#include <scp/io.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace scp;
using std::numbers::pi;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected scp::Error");
  return ErrorKind::computation;
}

PointCloud small_scan(std::uint64_t seed = 1) {
  SynthParams p;
  p.beams = 16;
  p.points_per_ring = 360;
  p.noise_sigma = 0.02;
  p.seed = seed;
  return synth_lidar(p);
}

bool lex(const Vec3& a, const Vec3& b) { return std::tie(a.x, a.y, a.z) < std::tie(b.x, b.y, b.z); }

void check_same_points(std::vector<Vec3> a, std::vector<Vec3> b, double rel) {
  REQUIRE(a.size() == b.size());
  std::sort(a.begin(), a.end(), lex);
  std::sort(b.begin(), b.end(), lex);
  for (std::size_t i = 0; i < a.size(); ++i)
    REQUIRE(std::sqrt(squared_distance(a[i], b[i])) <= rel * std::max(1.0, norm(a[i])));
}

// Voxel centres of the default three-part spherical codec, written from the
// quantizer definition without the library's quantization routines.
std::vector<Vec3> oracle_spherical_centres(const PointCloud& c, double q, const std::vector<double>& t) {
  double rmax = 0;
  for (const auto& p : c.points) rmax = std::max(rmax, norm(p));
  const auto bins = static_cast<double>(static_cast<std::int64_t>(std::ceil(rmax / q - 1e-9)));
  std::vector<std::vector<std::array<long, 3>>> parts(t.size());
  for (const auto& p : c.points) {
    const double rho = norm(p);
    std::size_t n = 0;
    while (n + 1 < t.size() && rho >= t[n + 1] * rmax) ++n;
    const double s = std::ldexp(1.0, -static_cast<int>(n));
    double theta = std::atan2(p.y, p.x);
    if (theta < 0) theta += 2 * pi;
    if (theta >= 2 * pi) theta = 0;
    const double phi = rho > 0 ? std::acos(std::clamp(p.z / rho, -1.0, 1.0)) : 0.0;
    const double qr = q * s, qt = 2 * pi / (bins - 1) * s, qp = pi / (bins - 1) * s;
    parts[n].push_back({std::lround(rho / qr), std::lround(theta / qt), std::lround(phi / qp)});
  }
  std::vector<Vec3> out;
  for (std::size_t n = 0; n < parts.size(); ++n) {
    auto& v = parts[n];
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    const double s = std::ldexp(1.0, -static_cast<int>(n));
    const double qr = q * s, qt = 2 * pi / (bins - 1) * s, qp = pi / (bins - 1) * s;
    for (const auto& i : v) {
      const double r = i[0] * qr, th = i[1] * qt, ph = i[2] * qp;
      out.push_back({r * std::sin(ph) * std::cos(th), r * std::sin(ph) * std::sin(th), r * std::cos(ph)});
    }
  }
  return out;
}

}  // namespace

TEST_CASE("step conventions") {
  CHECK(kitti_step(12) == doctest::Approx(400.0 / 4095.0));
  CHECK(ford_step(16) == 4.0);
  CHECK(ford_step(18) == 1.0);
  CHECK(parse_step_convention("ford") == StepConvention::ford);
  CHECK(std::string(to_string(StepConvention::raw)) == "raw");
  CHECK(kind_of([] { parse_step_convention("mpeg"); }) == ErrorKind::config);
}

TEST_CASE("config validation") {
  CodecConfig c;
  CHECK_NOTHROW(c.validate());
  c.q = 0.1;
  CHECK(kind_of([&] { c.validate(); }) == ErrorKind::config);  // depth and q
  c.depth.reset();
  CHECK(kind_of([&] { c.validate(); }) == ErrorKind::config);  // kitti needs depth
  c.convention = StepConvention::raw;
  CHECK_NOTHROW(c.validate());
  c.q.reset();
  CHECK(kind_of([&] { c.validate(); }) == ErrorKind::config);
  c.q = -1;
  CHECK(kind_of([&] { c.validate(); }) == ErrorKind::config);
  c = CodecConfig{};
  c.multilevel.thresholds = {0, 0.5, 0.25};
  CHECK(kind_of([&] { c.validate(); }) == ErrorKind::config);
}

TEST_CASE("resolve_step: raw with depth spans the extent") {
  PointCloud c;
  c.points = {{0, 0, 0}, {10, 2, -3}};
  CodecConfig cfg;
  cfg.convention = StepConvention::raw;
  cfg.system = CoordSystem::cartesian;
  cfg.depth = 4;
  CHECK(resolve_step(cfg, c) == doctest::Approx(10.0 / 15.0));
  cfg.convention = StepConvention::kitti;
  CHECK(resolve_step(cfg, c) == doctest::Approx(400.0 / 15.0));
}

TEST_CASE("N=1 cartesian is a plain octree codec") {
  const auto cloud = small_scan();
  CodecConfig cfg;
  cfg.system = CoordSystem::cartesian;
  cfg.convention = StepConvention::raw;
  cfg.depth.reset();
  cfg.q = 0.05;
  cfg.multilevel.thresholds = {0};
  const auto container = encode_cloud(cloud, cfg);
  REQUIRE(container.parts.size() == 1);
  const auto expect = quantize(cloud, derive_steps(CoordSystem::cartesian, 0.05, cloud));
  const auto parts = decode_parts(container);
  CHECK(parts[0].indices == expect.indices);
  check_same_points(decode_cloud(container).points, dequantize(expect).points, 1e-9);
}

TEST_CASE("default spherical codec reproduces per-part voxel centres") {
  const auto cloud = small_scan(2);
  const CodecConfig cfg;
  const auto container = encode_cloud(cloud, cfg);
  REQUIRE(container.parts.size() == 3);
  const auto decoded = decode_cloud(container);
  check_same_points(decoded.points, oracle_spherical_centres(cloud, kitti_step(12), {0, 0.25, 0.5}), 1e-9);

  const auto plan = plan_encoding(cloud, cfg);
  const auto parts = decode_parts(container);
  for (std::size_t n = 0; n < 3; ++n) CHECK(parts[n].indices == plan.parts[n].indices);
}

TEST_CASE("every coordinate system round-trips through the container") {
  const auto cloud = small_scan(3);
  for (auto sys : {CoordSystem::cartesian, CoordSystem::cylindrical, CoordSystem::spherical}) {
    for (int depth : {8, 11}) {
      CodecConfig cfg;
      cfg.system = sys;
      cfg.depth = depth;
      const auto plan = plan_encoding(cloud, cfg);
      const auto container = encode_plan(plan, cloud.size());
      const auto parsed = Container::parse(container.serialize());
      const auto parts = decode_parts(parsed);
      for (std::size_t n = 0; n < parts.size(); ++n) REQUIRE(parts[n].indices == plan.parts[n].indices);
      std::vector<Vec3> expect;
      for (const auto& qc : plan.parts) {
        const auto pc = dequantize(qc);
        expect.insert(expect.end(), pc.points.begin(), pc.points.end());
      }
      CHECK(decode_cloud(parsed).points == expect);
    }
  }
}

TEST_CASE("single far point leaves inner parts empty") {
  PointCloud c;
  c.points = {{0.9 * 80, 0, 0}};
  const auto container = encode_cloud(c, CodecConfig{});
  REQUIRE(container.parts.size() == 3);
  CHECK(container.parts[0].empty);
  CHECK(container.parts[1].empty);
  CHECK(container.parts[0].payload.empty());
  CHECK(!container.parts[2].empty);
  const auto d = decode_cloud(Container::parse(container.serialize()));
  REQUIRE(d.size() == 1);
  CHECK(std::sqrt(squared_distance(d.points[0], c.points[0])) < kitti_step(12));
}

TEST_CASE("serialize/parse round trip and header fields") {
  const auto cloud = small_scan(4);
  const auto c = encode_cloud(cloud, CodecConfig{});
  const auto bytes = c.serialize();
  CHECK(bytes.size() == c.byte_size());
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "SCP1");
  CHECK(bytes[4] == Container::kVersion);
  const auto p = Container::parse(bytes);
  CHECK(p.system == c.system);
  CHECK(p.depth == c.depth);
  CHECK(p.q == c.q);
  CHECK(p.rho_max == c.rho_max);
  CHECK(p.thresholds == c.thresholds);
  CHECK(p.original_count == cloud.size());
  CHECK(p.serialize() == bytes);
}

TEST_CASE("damaged containers are rejected") {
  const auto bytes = encode_cloud(small_scan(5), CodecConfig{}).serialize();

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK(kind_of([&] { Container::parse(bad_magic); }) == ErrorKind::format);

  auto bad_version = bytes;
  bad_version[4] = 9;
  CHECK(kind_of([&] { Container::parse(bad_version); }) == ErrorKind::format);

  auto trailing = bytes;
  trailing.push_back(0);
  CHECK(kind_of([&] { Container::parse(trailing); }) == ErrorKind::corrupt_stream);

  for (std::size_t cut : {std::size_t{3}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    std::vector<std::uint8_t> t(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    const auto k = kind_of([&] { decode_cloud(Container::parse(t)); });
    CHECK((k == ErrorKind::corrupt_stream || k == ErrorKind::format));
  }
}

TEST_CASE("truncated payload is a corrupt stream with no partial output") {
  auto c = encode_cloud(small_scan(6), CodecConfig{});
  auto& payload = c.parts[2].payload;
  payload.resize(payload.size() / 3);
  CHECK(kind_of([&] { decode_cloud(c); }) == ErrorKind::corrupt_stream);

  auto c2 = encode_cloud(small_scan(6), CodecConfig{});
  c2.parts[1].symbol_count += 5;
  CHECK(kind_of([&] { decode_cloud(c2); }) == ErrorKind::corrupt_stream);
}

TEST_CASE("encoding is deterministic") {
  const auto cloud = small_scan(7);
  CHECK(encode_cloud(cloud, CodecConfig{}).serialize() == encode_cloud(cloud, CodecConfig{}).serialize());
}

TEST_CASE("bpp accounting is exact") {
  const auto cloud = small_scan(8);
  const auto c = encode_cloud(cloud, CodecConfig{});
  const double bpp = measure_bpp(c, cloud.size());
  CHECK(bpp * static_cast<double>(cloud.size()) / 8 == doctest::Approx(static_cast<double>(c.serialize().size())));
  CHECK(measure_bpp(c, 2 * cloud.size()) < bpp);
  CHECK(kind_of([&] { measure_bpp(c, 0); }) == ErrorKind::argument);

  Container fake;
  fake.thresholds = {0};
  fake.parts.resize(1);
  const std::size_t header = fake.byte_size();
  fake.parts[0].empty = false;
  fake.parts[0].symbol_count = 1;
  fake.parts[0].payload.resize(1000 - header);
  CHECK(fake.byte_size() == 1000);
  CHECK(measure_bpp(fake, 1000) == 8.0);
}

TEST_CASE("empty cloud cannot be encoded") {
  CHECK(kind_of([] { encode_cloud(PointCloud{}, CodecConfig{}); }) == ErrorKind::argument);
}

TEST_CASE("bpp grows with depth") {
  const auto cloud = small_scan(9);
  double prev = 0;
  for (int d = 8; d <= 13; ++d) {
    CodecConfig cfg;
    cfg.depth = d;
    const double bpp = measure_bpp(encode_cloud(cloud, cfg), cloud.size());
    CHECK(bpp > prev);
    prev = bpp;
  }
}
