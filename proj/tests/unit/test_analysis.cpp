#include "doctest.h"
#include "test_util.hpp"

#include <scp/analysis.hpp>
#include <scp/error.hpp>
#include <scp/io.hpp>

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

using namespace scp;
using std::numbers::pi;

namespace {

PointCloud cube_cloud(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-200, 200);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.points.push_back({u(rng), u(rng), u(rng)});
  return c;
}

CodecConfig config(CoordSystem sys, std::vector<double> thresholds) {
  CodecConfig cfg;
  cfg.system = sys;
  cfg.depth = 12;
  cfg.multilevel.thresholds = std::move(thresholds);
  return cfg;
}

ErrorReport pipeline(const PointCloud& c, const CodecConfig& cfg) {
  const auto plan = plan_encoding(c, cfg);
  return empirical_error(c, pipeline_reconstruction(c, plan), plan);
}

}  // namespace

TEST_CASE("Cartesian bound values") {
  CHECK(bound_cart(1) == doctest::Approx(0.8660).epsilon(1e-4));
  CHECK(bound_cart(2) == doctest::Approx(std::sqrt(3.0)));
  CHECK(bound_cart(400.0 / 4095.0) == doctest::Approx(0.08459).epsilon(1e-4));
}

TEST_CASE("spherical bound values and the two algebraic forms") {
  CHECK(bound_sph(1, 80, 0) == 0);
  CHECK(bound_sph(1, 80, 80) == doctest::Approx(std::sqrt(5.0) * pi / 2));
  CHECK(bound_sph(1, 80, 80) == doctest::Approx(3.512).epsilon(1e-3));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.01, 1);
  for (int i = 0; i < 1000; ++i) {
    const double rho_max = 100 * u(rng), q = u(rng), rho = rho_max * u(rng);
    const double q_theta = 2 * pi * q / rho_max;
    REQUIRE(bound_sph(q, rho_max, rho) == doctest::Approx(bound_sph_from_theta_step(rho, q_theta)).epsilon(1e-12));
  }
}

TEST_CASE("multi-level midpoint and edge bounds for the default thresholds") {
  const double q = 1;
  CHECK(bound_part(q, 0, 0.25, 0) == doctest::Approx(0.4391).epsilon(1e-4));
  CHECK(bound_part(q, 0.25, 0.5, 1) == doctest::Approx(0.6586).epsilon(1e-4));
  CHECK(bound_part(q, 0.5, 1, 2) == doctest::Approx(0.6586).epsilon(1e-4));
  CHECK(bound_part(q, 0, 0.25, 0) == doctest::Approx(std::sqrt(5.0) * pi / 16));
  for (auto [lo, hi, n] : {std::tuple{0.0, 0.25, 0}, {0.25, 0.5, 1}, {0.5, 1.0, 2}})
    CHECK(bound_part(q, lo, hi, n) <= bound_cart(q));
  CHECK(bound_part_edge(q, 1, 2) == doctest::Approx(std::sqrt(5.0) * pi / 8));
  CHECK(bound_part_edge(q, 1, 2) == doctest::Approx(0.8781).epsilon(1e-4));
  CHECK(bound_part_edge(q, 0.25, 0) == doctest::Approx(0.8781).epsilon(1e-4));
  CHECK(bound_part(3, 0.5, 1, 2) == doctest::Approx(3 * bound_part(1, 0.5, 1, 2)));
}

TEST_CASE("crossover radii") {
  const std::vector<double> k{1, 2, 4};
  const auto r = crossover_radii(k);
  REQUIRE(r.size() == 3);
  CHECK(r[0] == doctest::Approx(0.24655).epsilon(1e-4));
  CHECK(r[1] == doctest::Approx(0.49310).epsilon(1e-4));
  CHECK(r[2] == doctest::Approx(0.98621).epsilon(1e-4));
  CHECK(r[1] == doctest::Approx(2 * r[0]));
  // The spherical bound equals the Cartesian one exactly there.
  CHECK(bound_sph(0.3, 50, r[0] * 50) == doctest::Approx(bound_cart(0.3)).epsilon(1e-12));
  CHECK_THROWS_AS(crossover_radii(std::vector<double>{0}), Error);
}

TEST_CASE("identity reconstruction has zero error") {
  const auto c = cube_cloud(100, 2);
  PairedReconstruction rec{c.points, std::vector<std::size_t>(c.size(), 0)};
  const auto plan = plan_encoding(c, config(CoordSystem::cartesian, {0}));
  const auto r = empirical_error(c, rec, plan);
  CHECK(r.max_error == 0);
  CHECK(r.mean_error == 0);
  CHECK(r.pairing == Pairing::pipeline);
}

TEST_CASE("Cartesian pipeline error is bounded and the bound is tight") {
  const auto c = cube_cloud(100000, 3);
  const auto r = pipeline(c, config(CoordSystem::cartesian, {0}));
  const double q = 400.0 / 4095.0;
  CHECK(r.q == doctest::Approx(q));
  CHECK(r.bound == doctest::Approx(bound_cart(q)));
  CHECK(r.max_error <= bound_cart(q));
  CHECK(r.max_error >= 0.95 * bound_cart(q));
  CHECK(r.utilization <= 1.0);
  // Independent recomputation of the worst displacement.
  double worst = 0;
  Vec3 lo = c.points[0];
  for (const auto& p : c.points) lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
  for (const auto& p : c.points) {
    const Vec3 d = p - lo;
    const Vec3 h{q * std::round(d.x / q), q * std::round(d.y / q), q * std::round(d.z / q)};
    worst = std::max(worst, norm(d - h));
  }
  CHECK(r.max_error == doctest::Approx(worst).epsilon(1e-9));
}

TEST_CASE("spherical single-level: mean error rises with radius") {
  const auto c = cube_cloud(50000, 4);
  const auto r = pipeline(c, config(CoordSystem::spherical, {0}));
  REQUIRE(r.pointwise_utilization.has_value());
  CHECK(r.per_part.empty());
  const auto bins = error_by_radius(c, r.per_point, 10);
  REQUIRE(bins.size() == 10);
  std::size_t total = 0;
  for (std::size_t b = 0; b < bins.size(); ++b) {
    total += bins[b].count;
    if (b > 0) {
      CHECK(bins[b].mean_error > bins[b - 1].mean_error);
      CHECK(bins[b].rho_lo >= bins[b - 1].rho_hi - 1e-12);
    }
  }
  CHECK(total == c.size());
}

TEST_CASE("part 2 steps shrink the error of points at rho_max about fourfold") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  PointCloud shell;
  for (int i = 0; i < 20000; ++i) {
    const double th = 2 * pi * u(rng), ph = std::acos(2 * u(rng) - 1);
    shell.points.push_back(sph_to_cart({80, th, ph}));
  }
  const auto base = derive_steps(CoordSystem::spherical, kitti_step(12), shell);
  const auto fine = part_steps(base, 2);
  double e0 = 0, e2 = 0;
  for (const auto& p : shell.points) {
    e0 = std::max(e0, norm(p - dequantize_index(quantize_point(p, base), base)));
    e2 = std::max(e2, norm(p - dequantize_index(quantize_point(p, fine), fine)));
  }
  CHECK(e0 / e2 == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("multi-level report carries per-part bounds and lowers outer error") {
  SynthParams sp;
  sp.seed = 6;
  const auto c = synth_lidar(sp);
  const auto one = pipeline(c, config(CoordSystem::spherical, {0}));
  const auto three = pipeline(c, config(CoordSystem::spherical, {0, 0.25, 0.5}));
  REQUIRE(three.per_part.size() == 3);
  const double q = kitti_step(12);
  CHECK(three.per_part[0].bound_midpoint == doctest::Approx(bound_part(q, 0, 0.25, 0)));
  CHECK(three.per_part[2].bound_edge == doctest::Approx(bound_part_edge(q, 1, 2)));
  std::size_t total = 0;
  for (const auto& s : three.per_part) total += s.points;
  CHECK(total == c.size());

  double outer_one = 0, outer_three = 0, rmax = 0;
  for (const auto& p : c.points) rmax = std::max(rmax, norm(p));
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (norm(c.points[i]) < 0.5 * rmax) continue;
    outer_one += one.per_point[i];
    outer_three += three.per_point[i];
  }
  CHECK(outer_three < outer_one);
  CHECK(three.per_part[2].mean_error < one.mean_error);
}

TEST_CASE("analyze_container pairs through the pipeline when voxels match") {
  SynthParams sp;
  sp.beams = 16;
  sp.points_per_ring = 400;
  sp.seed = 7;
  const auto c = synth_lidar(sp);
  const auto cfg = config(CoordSystem::spherical, {0, 0.25, 0.5});
  const auto container = encode_cloud(c, cfg);
  const auto r = analyze_container(c, container);
  CHECK(r.pairing == Pairing::pipeline);
  const auto direct = pipeline(c, cfg);
  CHECK(r.max_error == direct.max_error);
  CHECK(r.per_part.size() == 3);

  sp.seed = 8;
  const auto other = synth_lidar(sp);
  const auto r2 = analyze_container(other, container);
  CHECK(r2.pairing == Pairing::nearest_neighbor);
  CHECK(r2.system == CoordSystem::spherical);
  CHECK(r2.points == other.size());
}

TEST_CASE("nearest-neighbour fallback without a plan has no bound") {
  PointCloud a, b;
  a.points = {{0, 0, 0}, {1, 0, 0}};
  b.points = {{0, 0, 0.5}};
  const auto r = empirical_error_nearest(a, b);
  CHECK(r.pairing == Pairing::nearest_neighbor);
  CHECK(r.max_error == doctest::Approx(std::sqrt(1.25)));
  CHECK(r.mean_error == doctest::Approx((0.5 + std::sqrt(1.25)) / 2));
  CHECK(r.bound == 0);
  CHECK(!r.system);
}

TEST_CASE("report JSON") {
  const auto c = cube_cloud(2000, 9);
  const auto j = nlohmann::json::parse(error_report_json(pipeline(c, config(CoordSystem::spherical, {0, 0.25, 0.5}))));
  CHECK(j["pairing"] == "pipeline");
  CHECK(j["system"] == "spherical");
  CHECK(j["per_part"].size() == 3);
  CHECK(j["per_part"][1].contains("bound_midpoint"));
  CHECK(j["per_part"][1].contains("bound_edge"));
}

TEST_CASE("histogram and colormap export") {
  const std::vector<double> zeros(50, 0.0);
  const auto h = error_histogram(zeros, 8);
  REQUIRE(h.size() == 8);
  CHECK(h[0].count == 50);
  for (std::size_t b = 1; b < h.size(); ++b) CHECK(h[b].count == 0);
  CHECK(h[0].color != h[7].color);
  CHECK(h[7].color == "#ff0000");

  test::TempDir dir;
  const auto c = cube_cloud(3000, 10);
  const auto r = pipeline(c, config(CoordSystem::cartesian, {0}));
  const auto hist = export_error_colormap(r, dir / "e.ply", dir / "e.csv", 10);
  const auto back = read_ply(dir / "e.ply");
  REQUIRE(back.size() == c.size());
  REQUIRE(back.attr);
  CHECK(*back.attr == r.per_point);
  std::ifstream csv(dir / "e.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "bin,lo,hi,count,color");
  std::size_t rows = 0, total = 0;
  for (const auto& b : hist) total += b.count;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 10);
  CHECK(total == c.size());
}
