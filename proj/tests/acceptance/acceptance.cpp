// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "test_util.hpp"

#include <scp/analysis.hpp>
#include <scp/codec.hpp>
#include <scp/entropy.hpp>
#include <scp/io.hpp>
#include <scp/kdtree.hpp>
#include <scp/metrics.hpp>
#include <scp/octree.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace scp;
using std::numbers::pi;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string fmt(double v, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

PointCloud cube_cloud(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-200, 200);
  PointCloud c;
  c.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) c.points.push_back({u(rng), u(rng), u(rng)});
  return c;
}

CodecConfig kitti12(CoordSystem sys, std::vector<double> thresholds) {
  CodecConfig cfg;
  cfg.system = sys;
  cfg.convention = StepConvention::kitti;
  cfg.depth = 12;
  cfg.multilevel.thresholds = std::move(thresholds);
  return cfg;
}

ErrorReport pipeline(const PointCloud& c, const CodecConfig& cfg) {
  const auto plan = plan_encoding(c, cfg);
  return empirical_error(c, pipeline_reconstruction(c, plan), plan);
}

double max_norm(const PointCloud& c) {
  double r = 0;
  for (const auto& p : c.points) r = std::max(r, norm(p));
  return r;
}

const PointCloud& shared_cube() {
  static const PointCloud c = cube_cloud(100000, 2024);
  return c;
}

// ---------------------------------------------------------------------------

void crossover(Outcome& o) {
  const auto r = crossover_radii(std::vector<double>{1, 2, 4});
  const double want[3] = {0.2466, 0.4931, 0.9862};
  o.require(r.size() == 3, "three radii");
  for (std::size_t i = 0; i < r.size() && i < 3; ++i) {
    o.detail << (i ? ", " : "") << fmt(r[i], 5);
    o.require(std::abs(r[i] - want[i]) <= 0.0005, "radius " + std::to_string(i));
  }
  o.detail << " rho_max";
}

void cartesian_bound(Outcome& o) {
  const auto& c = shared_cube();
  const auto r = pipeline(c, kitti12(CoordSystem::cartesian, {0}));
  const double q = kitti_step(12), b = std::sqrt(3.0) * q / 2;
  o.detail << "q=" << fmt(q) << " max=" << fmt(r.max_error) << " bound=" << fmt(b)
           << " ratio=" << fmt(r.max_error / b, 5);
  o.require(r.max_error <= b, "max <= sqrt(3)q/2");
  o.require(r.max_error >= 0.95 * b, "max >= 0.95 sqrt(3)q/2");
}

double r_squared(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  return syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
}

void spherical_bound(Outcome& o) {
  const auto& c = shared_cube();
  const auto r = pipeline(c, kitti12(CoordSystem::spherical, {0}));
  const double q = kitti_step(12), rho_max = max_norm(c), cutoff = 0.05 * rho_max;
  double worst = 0, worst_radial = 0;
  std::size_t over = 0, considered = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double rho = norm(c.points[i]);
    if (rho < cutoff) continue;
    ++considered;
    const double ratio = r.per_point[i] / bound_sph(q, rho_max, rho);
    worst = std::max(worst, ratio);
    worst_radial = std::max(worst_radial, r.per_point[i] / (bound_sph(q, rho_max, rho) + q / 2));
    if (ratio > 1.01) ++over;
  }
  const auto bins = error_by_radius(c, r.per_point, 10, cutoff);
  std::vector<double> x, y;
  for (const auto& b : bins) {
    x.push_back(0.5 * (b.rho_lo + b.rho_hi));
    y.push_back(b.max_error);
  }
  const double r2 = r_squared(x, y);
  o.detail << "points=" << considered << " max(err/bound)=" << fmt(worst, 5) << " over_1.01=" << over
           << " R2=" << fmt(r2, 5) << " | with radial q/2 term: max ratio=" << fmt(worst_radial, 5);
  o.require(worst <= 1.01, "per-point error <= 1.01 bound_sph");
  o.require(r2 >= 0.95, "decile R^2 >= 0.95");
}

void multilevel_bound(Outcome& o) {
  const auto& c = shared_cube();
  const MultiLevelConfig ml;
  const auto r = pipeline(c, kitti12(CoordSystem::spherical, ml.thresholds));
  const double q = kitti_step(12);
  const double mids[3] = {0.4391, 0.6586, 0.6586};
  o.require(r.per_part.size() == 3, "three parts");
  for (std::size_t n = 0; n < 3 && n < r.per_part.size(); ++n) {
    const double hi = n + 1 < ml.parts() ? ml.thresholds[n + 1] : 1.0;
    const double mid = bound_part(q, ml.thresholds[n], hi, static_cast<int>(n));
    const double edge = bound_part_edge(q, hi, static_cast<int>(n));
    const auto& s = r.per_part[n];
    o.detail << "part" << n << " max=" << fmt(s.max_error, 5) << "/edge=" << fmt(edge, 5)
             << " (x" << fmt(s.max_error / edge, 5) << ", radial-aware x"
             << fmt(s.max_error / (edge + q / std::ldexp(2.0, static_cast<int>(n))), 4)
             << ") mid=" << fmt(mid / q, 5) << "q; ";
    o.require(s.max_error <= 1.01 * edge, "part " + std::to_string(n) + " <= 1.01 edge");
    o.require(std::abs(mid - mids[n] * q) <= 1e-4 * q, "midpoint " + std::to_string(n));
  }
  const double cart = std::sqrt(3.0) * q / 2;
  o.detail << "whole max=" << fmt(r.max_error, 5) << " vs 1.02*sqrt(3)q/2=" << fmt(1.02 * cart, 5);
  o.require(r.max_error <= 1.02 * cart, "whole cloud <= 1.02 sqrt(3)q/2");
}

bool lex(const Vec3& a, const Vec3& b) { return std::tie(a.x, a.y, a.z) < std::tie(b.x, b.y, b.z); }

void losslessness(Outcome& o) {
  std::mt19937_64 rng(55);
  std::size_t octree_ok = 0, codec_ok = 0;
  double worst_rel = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int depth = 1 + trial % 12;
    const std::size_t cap = depth >= 5 ? 10000 : std::min<std::size_t>(10000, std::size_t{1} << (3 * depth));
    const std::size_t n = 1 + rng() % cap;
    std::uniform_int_distribution<std::uint32_t> u(0, (1u << depth) - 1);
    std::set<Index3> set;
    while (set.size() < n) set.insert({u(rng), u(rng), u(rng)});

    QuantizedCloud qc;
    qc.indices.assign(set.begin(), set.end());
    sort_unique_morton(qc.indices, depth);
    qc.steps.system = CoordSystem::cartesian;
    qc.steps.depth = depth;
    qc.steps.q_primary = 0.01 + 0.1 * static_cast<double>(rng() % 100) / 100.0;
    qc.steps.bins = std::int64_t{1} << depth;
    qc.original_count = n;

    const auto tree = build(qc);
    std::vector<Symbol> syms;
    for (const auto& e : occupancy_stream(tree)) syms.push_back(e.symbol);
    const auto back = leaves(rebuild(syms, depth));
    const std::set<Index3> got(back.begin(), back.end());
    if (got == set && back.size() == set.size()) ++octree_ok;

    const auto centres = dequantize(qc);
    CodecConfig cfg;
    cfg.system = CoordSystem::cartesian;
    cfg.convention = StepConvention::raw;
    cfg.depth.reset();
    cfg.q = qc.steps.q_primary;
    cfg.multilevel.thresholds = {0};
    const auto decoded = decode_cloud(Container::parse(encode_cloud(centres, cfg).serialize()));
    auto a = centres.points, b = decoded.points;
    bool same = a.size() == b.size();
    if (same) {
      std::sort(a.begin(), a.end(), lex);
      std::sort(b.begin(), b.end(), lex);
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double rel = norm(a[i] - b[i]) / std::max(1.0, norm(a[i]));
        worst_rel = std::max(worst_rel, rel);
        if (rel > 1e-9) same = false;
      }
    }
    if (same) ++codec_ok;
  }
  o.detail << "octree exact " << octree_ok << "/200, codec " << codec_ok << "/200, worst rel err "
           << fmt(worst_rel, 3);
  o.require(octree_ok == 200, "octree round trip");
  o.require(codec_ok == 200, "codec round trip");
}

void entropy_optimality(Outcome& o) {
  SynthParams sp;
  sp.seed = 11;
  const auto scan = synth_lidar(sp);
  const auto plan = plan_encoding(scan, CodecConfig{});
  std::vector<StreamEntry> stream;
  for (const auto& part : plan.parts) {
    if (part.indices.empty()) continue;
    auto s = occupancy_stream(build(part));
    if (s.size() > stream.size()) stream = std::move(s);
  }
  AdaptiveContextModel ce_model, enc_model;
  const double ce = cross_entropy(stream, ce_model);
  const auto bs = encode(stream, enc_model);
  const double bits = static_cast<double>(bs.bit_len);
  const double limit = ce * 1.01 + 64;
  o.detail << "octree stream " << stream.size() << " symbols: bits=" << fmt(bits, 8) << " CE=" << fmt(ce, 8)
           << " limit=" << fmt(limit, 8);
  o.require(stream.size() >= 10000, ">= 1e4 symbols");
  o.require(bits <= limit, "adaptive bits <= CE + 1% + 64");

  std::mt19937_64 rng(12);
  std::vector<StreamEntry> uni;
  for (int i = 0; i < 100000; ++i) uni.push_back({static_cast<Symbol>(1 + rng() % 255), NodeContext{}});
  UniformModel um;
  const double bps = static_cast<double>(encode(uni, um).bit_len) / static_cast<double>(uni.size());
  o.detail << "; uniform " << fmt(bps, 6) << " bits/symbol vs log2(255)=" << fmt(std::log2(255.0), 6);
  o.require(std::abs(bps - std::log2(255.0)) <= 0.005 * std::log2(255.0), "uniform within 0.5%");
}

void rate_and_multilevel(Outcome& o) {
  SynthParams sp;
  sp.beams = 64;
  sp.seed = 21;
  const auto scan = synth_lidar(sp);
  double prev_bpp = 0, prev_err = std::numeric_limits<double>::infinity();
  bool bpp_up = true, err_down = true;
  o.detail << "D:bpp/max_err";
  for (int d = 10; d <= 14; ++d) {
    CodecConfig cfg;
    cfg.depth = d;
    const double bpp = measure_bpp(encode_cloud(scan, cfg), scan.size());
    const double err = pipeline(scan, cfg).max_error;
    o.detail << " " << d << ":" << fmt(bpp, 4) << "/" << fmt(err, 4);
    bpp_up = bpp_up && bpp > prev_bpp;
    err_down = err_down && err < prev_err;
    prev_bpp = bpp;
    prev_err = err;
  }
  o.require(bpp_up, "bpp strictly increasing");
  o.require(err_down, "max error strictly decreasing");

  const auto one = pipeline(scan, kitti12(CoordSystem::spherical, {0}));
  const auto three = pipeline(scan, kitti12(CoordSystem::spherical, {0, 0.25, 0.5}));
  const double rmax = max_norm(scan);
  double e1 = 0, e3 = 0;
  for (std::size_t i = 0; i < scan.size(); ++i) {
    if (norm(scan.points[i]) < 0.5 * rmax) continue;
    e1 = std::max(e1, one.per_point[i]);
    e3 = std::max(e3, three.per_point[i]);
  }
  const double factor = e1 / e3;
  o.detail << "; outer max N=1 " << fmt(e1, 4) << " N=3 " << fmt(e3, 4) << " factor " << fmt(factor, 4);
  o.require(factor >= 3.5 && factor <= 4.5, "outer reduction factor in [3.5, 4.5]");
}

void metrics_sanity(Outcome& o) {
  SynthParams sp;
  sp.beams = 16;
  sp.points_per_ring = 500;
  sp.seed = 31;
  const auto c = synth_lidar(sp);
  const auto m = compute_metrics(c, c, MetricConfig{});
  o.detail << "D1=" << fmt(m.d1.db) << " D2=" << fmt(m.d2.db) << " CD=" << fmt(m.cd);
  o.require(std::isinf(m.d1.db) && m.d1.db > 0 && std::isinf(m.d2.db) && m.d2.db > 0, "identical PSNR +inf");
  o.require(m.cd == 0, "identical CD 0");

  const RDCurve curve{{0.5, 30}, {1.0, 35.5}, {2.0, 40.2}, {4.0, 44.1}};
  RDCurve doubled = curve;
  for (auto& p : doubled) p.rate *= 2;
  const double same = bd_rate(curve, curve), dbl = bd_rate(curve, doubled);
  o.detail << " bd(c,c)=" << fmt(same) << " bd(c,2c)=" << fmt(dbl) << "%";
  o.require(std::abs(same) <= 1e-9, "bd_rate(c,c) == 0");
  o.require(std::abs(dbl - 100) <= 0.5, "doubled rate +100%");

  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(-10, 10);
  std::vector<Vec3> pts(2000), queries(2000);
  for (auto& p : pts) p = {u(rng), u(rng), std::round(u(rng))};  // rounded z forces ties
  for (auto& p : queries) p = {u(rng), u(rng), std::round(u(rng))};
  const KdTree tree(pts);
  std::size_t mismatches = 0;
  for (const auto& qp : queries) {
    std::size_t best = 0;
    double bd = squared_distance(qp, pts[0]);
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const double d = squared_distance(qp, pts[i]);
      if (d < bd) bd = d, best = i;
    }
    const auto nb = tree.nearest(qp);
    if (nb.index != best || nb.sq_dist != bd) ++mismatches;
  }
  o.detail << " kd mismatches=" << mismatches << "/2000";
  o.require(mismatches == 0, "kd-tree equals brute force");
}

int run_cli(const test::TempDir& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.path().string() + "' && '" SCPC_PATH "' " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void interop(Outcome& o) {
  test::TempDir dir;
  o.require(run_cli(dir, "synth in.bin --beams 32 --points-per-ring 900 --noise 0.02 --seed 41") == 0, "synth");
  o.require(run_cli(dir, "encode in.bin a.scp --depth 12 --parts 3") == 0, "encode a");
  o.require(run_cli(dir, "encode in.bin b.scp --depth 12 --parts 3") == 0, "encode b");
  const auto a = test::read_bytes(dir / "a.scp"), b = test::read_bytes(dir / "b.scp");
  o.detail << "container " << a.size() << " bytes, identical=" << (a == b ? "yes" : "no");
  o.require(!a.empty() && a == b, "byte-identical containers");

  o.require(run_cli(dir, "decode a.scp out.ply") == 0, "decode in fresh process");
  const auto from_cli = read_ply(dir / "out.ply");
  const auto in_proc = decode_cloud(Container::parse(a));
  bool same = from_cli.size() == in_proc.size();
  for (std::size_t i = 0; same && i < in_proc.size(); ++i)
    same = from_cli.points[i] == in_proc.points[i];
  o.detail << ", fresh decode " << from_cli.size() << " points, matches in-process=" << (same ? "yes" : "no");
  o.require(same, "fresh-process decode matches");
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  std::function<void(Outcome&)> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "crossover radii", 1, crossover},
      {2, "Cartesian error bound", 10, cartesian_bound},
      {3, "spherical error bound", 20, spherical_bound},
      {4, "multi-level error bounds", 30, multilevel_bound},
      {5, "octree losslessness", 60, losslessness},
      {6, "entropy coder optimality", 10, entropy_optimality},
      {7, "rate monotonicity and multi-level benefit", 300, rate_and_multilevel},
      {8, "metrics sanity", 10, metrics_sanity},
      {9, "interop determinism", 60, interop},
  };
  shared_cube();
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(secs <= c.limit_s, "runtime limit " + fmt(c.limit_s) + " s");
    if (!o.pass) ++failures;
    std::printf("%s [%d] %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.str().c_str(),
                secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
