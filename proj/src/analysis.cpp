#include "scp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <numeric>
#include <unordered_set>

#include "scp/error.hpp"
#include "scp/io.hpp"
#include "scp/kdtree.hpp"
#include "scp/metrics.hpp"

namespace scp {

namespace {

const double kSqrt3 = std::sqrt(3.0);
const double kSqrt5 = std::sqrt(5.0);
constexpr double kPi = std::numbers::pi;

}  // namespace

double bound_cart(double q) { return kSqrt3 * q / 2.0; }

double bound_sph(double q, double rho_max, double rho) {
  return kSqrt5 * kPi * q / (2.0 * rho_max) * rho;
}

double bound_sph_from_theta_step(double rho, double q_theta) {
  return kSqrt5 / 4.0 * rho * q_theta;
}

double bound_part(double q, double t_n, double t_next, int n) {
  return kSqrt5 * kPi * q * (t_n + t_next) / std::ldexp(1.0, n + 2);
}

double bound_part_edge(double q, double t_next, int n) {
  return kSqrt5 * kPi * q / std::ldexp(1.0, n + 1) * t_next;
}

std::vector<double> crossover_radii(std::span<const double> multipliers) {
  std::vector<double> out;
  out.reserve(multipliers.size());
  for (double k : multipliers) {
    if (!(k > 0)) fail(ErrorKind::argument, "crossover multiplier must be positive");
    out.push_back(k * kSqrt3 / (kSqrt5 * kPi));
  }
  return out;
}

const char* to_string(Pairing p) {
  return p == Pairing::pipeline ? "pipeline" : "nearest_neighbor";
}

PairedReconstruction pipeline_reconstruction(const PointCloud& cloud, const EncodingPlan& plan) {
  std::vector<QuantSteps> steps;
  for (std::size_t n = 0; n < plan.multilevel.parts(); ++n)
    steps.push_back(part_steps(plan.base, n));
  PairedReconstruction rec;
  rec.points.reserve(cloud.size());
  rec.part.reserve(cloud.size());
  for (const Vec3& p : cloud.points) {
    const std::size_t n = part_of(norm(p), plan.multilevel, plan.partition_rho_max);
    rec.part.push_back(n);
    rec.points.push_back(dequantize_index(quantize_point(p, steps[n]), steps[n]));
  }
  return rec;
}

EncodingPlan plan_from_container(const Container& container, const PointCloud& original) {
  EncodingPlan plan;
  plan.base = container.base_steps();
  plan.multilevel.thresholds.assign(container.thresholds.begin(), container.thresholds.end());
  for (const Vec3& p : original.points)
    plan.partition_rho_max = std::max(plan.partition_rho_max, norm(p));
  return plan;
}

namespace {

void fill_bounds(ErrorReport& r, const PointCloud& ref, const std::vector<std::size_t>* parts,
                 const EncodingPlan& plan) {
  const QuantSteps& base = plan.base;
  r.system = base.system;
  r.q = base.q_primary;
  r.rho_max = base.rho_max;
  const std::size_t n_parts = plan.multilevel.parts();

  switch (base.system) {
    case CoordSystem::cartesian: r.bound = bound_cart(base.q_primary); break;
    case CoordSystem::cylindrical: {
      const double half_q = base.q_primary / 2;
      const double half_t = base.rho_max * base.q_theta / 2;
      r.bound = std::sqrt(2 * half_q * half_q + half_t * half_t);
      break;
    }
    case CoordSystem::spherical:
      r.bound = bound_sph(base.q_primary, base.rho_max, base.rho_max);
      break;
  }

  if (n_parts == 1 && base.system == CoordSystem::spherical) {
    double worst = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      const double rho = norm(ref.points[i]);
      if (rho < kSmallAngleCutoff * base.rho_max) {
        ++r.excluded_small_radius;
        continue;
      }
      worst = std::max(worst, r.per_point[i] / bound_sph(base.q_primary, base.rho_max, rho));
    }
    r.pointwise_utilization = worst;
  }

  if (n_parts > 1 && parts) {
    r.per_part.assign(n_parts, {});
    std::vector<double> sums(n_parts, 0.0);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      auto& s = r.per_part[(*parts)[i]];
      ++s.points;
      s.max_error = std::max(s.max_error, r.per_point[i]);
      sums[(*parts)[i]] += r.per_point[i];
    }
    double largest_edge = 0;
    for (std::size_t n = 0; n < n_parts; ++n) {
      auto& s = r.per_part[n];
      if (s.points) s.mean_error = sums[n] / static_cast<double>(s.points);
      const int level = static_cast<int>(n);
      if (base.system == CoordSystem::spherical) {
        s.bound_midpoint = bound_part(base.q_primary, plan.multilevel.lower(n),
                                      plan.multilevel.upper(n), level);
        s.bound_edge = bound_part_edge(base.q_primary, plan.multilevel.upper(n), level);
      } else {
        const double scaled = r.bound / std::ldexp(1.0, level);
        s.bound_midpoint = s.bound_edge = scaled;
      }
      s.utilization = s.bound_edge > 0 ? s.max_error / s.bound_edge : 0;
      largest_edge = std::max(largest_edge, s.bound_edge);
    }
    if (base.system == CoordSystem::spherical) r.bound = largest_edge;
  }
  r.utilization = r.bound > 0 ? r.max_error / r.bound : 0;
}

void summarize(ErrorReport& r) {
  r.points = r.per_point.size();
  r.max_error = 0;
  double sum = 0;
  for (double e : r.per_point) {
    r.max_error = std::max(r.max_error, e);
    sum += e;
  }
  r.mean_error = r.points ? sum / static_cast<double>(r.points) : 0;
}

}  // namespace

ErrorReport empirical_error(const PointCloud& ref, const PairedReconstruction& rec,
                            const EncodingPlan& plan) {
  if (rec.points.size() != ref.size())
    fail(ErrorKind::argument, "paired reconstruction size differs from reference");
  ErrorReport r;
  r.pairing = Pairing::pipeline;
  r.per_point.resize(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i)
    r.per_point[i] = norm(ref.points[i] - rec.points[i]);
  r.reconstructed = rec.points;
  summarize(r);
  fill_bounds(r, ref, &rec.part, plan);
  return r;
}

ErrorReport empirical_error_nearest(const PointCloud& ref, const PointCloud& rec,
                                    const EncodingPlan* plan) {
  if (ref.empty() || rec.empty()) fail(ErrorKind::argument, "error analysis needs non-empty clouds");
  ErrorReport r;
  r.pairing = Pairing::nearest_neighbor;
  const KdTree index(rec.points);
  r.per_point.resize(ref.size());
  r.reconstructed.resize(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const auto nn = index.nearest(ref.points[i]);
    r.per_point[i] = std::sqrt(nn.sq_dist);
    r.reconstructed[i] = rec.points[nn.index];
  }
  summarize(r);
  if (plan) {
    std::vector<std::size_t> parts;
    parts.reserve(ref.size());
    for (const Vec3& p : ref.points)
      parts.push_back(part_of(norm(p), plan->multilevel, plan->partition_rho_max));
    fill_bounds(r, ref, &parts, *plan);
  }
  return r;
}

ErrorReport analyze_container(const PointCloud& ref, const Container& container) {
  const auto decoded = decode_parts(container);
  const EncodingPlan plan = plan_from_container(container, ref);
  if (decoded.size() != plan.multilevel.parts())
    fail(ErrorKind::corrupt_stream, "container part count disagrees with thresholds");

  std::vector<std::unordered_set<std::uint64_t>> present(decoded.size());
  for (std::size_t n = 0; n < decoded.size(); ++n)
    for (const auto& idx : decoded[n].indices)
      present[n].insert(morton_key(idx, decoded[n].steps.depth));

  bool consistent = true;
  for (const Vec3& p : ref.points) {
    const std::size_t n = part_of(norm(p), plan.multilevel, plan.partition_rho_max);
    const auto& steps = decoded[n].steps;
    if (!present[n].count(morton_key(quantize_point(p, steps), steps.depth))) {
      consistent = false;
      break;
    }
  }
  if (consistent) return empirical_error(ref, pipeline_reconstruction(ref, plan), plan);
  return empirical_error_nearest(ref, decode_cloud(container), &plan);
}

std::string error_report_json(const ErrorReport& r) {
  nlohmann::ordered_json j;
  j["pairing"] = to_string(r.pairing);
  j["system"] = r.system ? nlohmann::ordered_json(to_string(*r.system)) : nullptr;
  j["q"] = r.q;
  j["rho_max"] = r.rho_max;
  j["points"] = r.points;
  j["max_error"] = r.max_error;
  j["mean_error"] = r.mean_error;
  j["bound"] = r.bound;
  j["utilization"] = r.utilization;
  if (r.pointwise_utilization) {
    j["pointwise_utilization"] = *r.pointwise_utilization;
    j["small_radius_cutoff"] = kSmallAngleCutoff;
    j["excluded_small_radius"] = r.excluded_small_radius;
  }
  if (!r.per_part.empty()) {
    auto parts = nlohmann::ordered_json::array();
    for (const auto& s : r.per_part)
      parts.push_back({{"points", s.points},
                       {"max_error", s.max_error},
                       {"mean_error", s.mean_error},
                       {"bound_midpoint", s.bound_midpoint},
                       {"bound_edge", s.bound_edge},
                       {"utilization", s.utilization}});
    j["per_part"] = parts;
  }
  return j.dump(2);
}

std::vector<RadialBin> error_by_radius(const PointCloud& ref, std::span<const double> errors,
                                       int bins, double min_rho) {
  if (errors.size() != ref.size()) fail(ErrorKind::argument, "error count differs from point count");
  if (bins < 1) fail(ErrorKind::argument, "need at least one radial bin");
  std::vector<std::pair<double, double>> rows;  // (rho, error)
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double rho = norm(ref.points[i]);
    if (rho >= min_rho) rows.emplace_back(rho, errors[i]);
  }
  std::sort(rows.begin(), rows.end());
  std::vector<RadialBin> out;
  const std::size_t n = rows.size();
  for (int b = 0; b < bins; ++b) {
    const std::size_t begin = n * static_cast<std::size_t>(b) / static_cast<std::size_t>(bins);
    const std::size_t end = n * static_cast<std::size_t>(b + 1) / static_cast<std::size_t>(bins);
    if (begin == end) continue;
    RadialBin bin;
    bin.rho_lo = rows[begin].first;
    bin.rho_hi = rows[end - 1].first;
    bin.count = end - begin;
    double sum = 0;
    for (std::size_t i = begin; i < end; ++i) {
      sum += rows[i].second;
      bin.max_error = std::max(bin.max_error, rows[i].second);
    }
    bin.mean_error = sum / static_cast<double>(bin.count);
    out.push_back(bin);
  }
  return out;
}

namespace {

std::string rainbow(double t) {
  // Hue 270 deg (purple) at t = 0 down to 0 deg (red) at t = 1.
  const double hue = 270.0 * (1.0 - std::clamp(t, 0.0, 1.0));
  const double h = hue / 60.0;
  const double x = 1.0 - std::abs(std::fmod(h, 2.0) - 1.0);
  double r = 0, g = 0, b = 0;
  if (h < 1) { r = 1; g = x; }
  else if (h < 2) { r = x; g = 1; }
  else if (h < 3) { g = 1; b = x; }
  else if (h < 4) { g = x; b = 1; }
  else { r = x; b = 1; }
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(r * 255)),
                static_cast<int>(std::lround(g * 255)), static_cast<int>(std::lround(b * 255)));
  return buf;
}

}  // namespace

std::vector<HistogramBin> error_histogram(std::span<const double> errors, int bins) {
  if (bins < 1) fail(ErrorKind::argument, "need at least one histogram bin");
  double top = 0;
  for (double e : errors) top = std::max(top, e);
  std::vector<HistogramBin> out(static_cast<std::size_t>(bins));
  for (int b = 0; b < bins; ++b) {
    auto& bin = out[static_cast<std::size_t>(b)];
    bin.lo = top * b / bins;
    bin.hi = top * (b + 1) / bins;
    bin.color = rainbow(bins == 1 ? 0.0 : static_cast<double>(b) / (bins - 1));
  }
  for (double e : errors) {
    const int b = top > 0 ? std::min(bins - 1, static_cast<int>(e / top * bins)) : 0;
    ++out[static_cast<std::size_t>(b)].count;
  }
  return out;
}

std::vector<HistogramBin> export_error_colormap(const ErrorReport& report,
                                                const std::filesystem::path& ply_path,
                                                const std::filesystem::path& csv_path,
                                                int bins) {
  if (report.reconstructed.size() != report.per_point.size())
    fail(ErrorKind::argument, "error report carries no paired reconstruction");
  PointCloud cloud;
  cloud.points = report.reconstructed;
  cloud.attr = report.per_point;
  write_ply(cloud, ply_path, PlyFormat::binary_little_endian, "error");

  const auto hist = error_histogram(report.per_point, bins);
  std::ofstream csv(csv_path);
  if (!csv) fail(ErrorKind::io, "cannot open " + csv_path.string() + " for writing");
  csv << "bin,lo,hi,count,color\n";
  for (std::size_t b = 0; b < hist.size(); ++b)
    csv << b << ',' << format_csv_number(hist[b].lo) << ',' << format_csv_number(hist[b].hi)
        << ',' << hist[b].count << ',' << hist[b].color << '\n';
  if (!csv) fail(ErrorKind::io, "write failed: " + csv_path.string());
  return hist;
}

}  // namespace scp
