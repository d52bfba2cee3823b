#include "scp/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>

#include "parallel.hpp"
#include "scp/error.hpp"
#include "scp/kdtree.hpp"

namespace scp {

const char* to_string(PsnrConvention c) {
  return c == PsnrConvention::r_squared ? "r_squared" : "three_r_squared";
}

const char* to_string(ChamferConvention c) {
  return c == ChamferConvention::mean_l2 ? "mean_l2" : "mean_squared";
}

void MetricConfig::validate() const {
  if (!(peak > 0)) fail(ErrorKind::argument, "PSNR peak must be positive");
  if (knn_k < 3) fail(ErrorKind::argument, "normal estimation needs knn_k >= 3");
}

double psnr_from_mse(double mse, const MetricConfig& cfg) {
  if (mse == 0) return std::numeric_limits<double>::infinity();
  const double scale = cfg.psnr == PsnrConvention::r_squared ? 1.0 : 3.0;
  return 10.0 * std::log10(scale * cfg.peak * cfg.peak / mse);
}

namespace {

void require_points(const PointCloud& cloud, const char* which) {
  if (cloud.empty()) fail(ErrorKind::argument, std::string(which) + " cloud is empty");
}

// Mean over `from` of f(from[i], nearest point of `to`).
template <typename Fn>
double directed_mean(const PointCloud& from, const KdTree& to_index,
                     Fn per_point) {
  std::vector<double> err(from.size());
  detail::parallel_for(from.size(), [&](std::size_t i) {
    const auto nn = to_index.nearest(from.points[i]);
    err[i] = per_point(i, nn);
  });
  double sum = 0;
  for (double e : err) sum += e;
  return sum / static_cast<double>(from.size());
}

}  // namespace

PsnrResult d1_psnr(const PointCloud& ref, const PointCloud& rec, const MetricConfig& cfg) {
  cfg.validate();
  require_points(ref, "reference");
  require_points(rec, "reconstructed");
  const KdTree ref_index(ref.points), rec_index(rec.points);
  auto sq = [](std::size_t, const KdTree::Neighbor& nn) { return nn.sq_dist; };

  PsnrResult r;
  r.mse_ref_to_rec = directed_mean(ref, rec_index, sq);
  r.mse_rec_to_ref = directed_mean(rec, ref_index, sq);
  r.mse = std::max(r.mse_ref_to_rec, r.mse_rec_to_ref);
  r.db = psnr_from_mse(r.mse, cfg);
  return r;
}

NormalEstimate estimate_normals(const PointCloud& cloud, int k) {
  NormalEstimate est;
  est.normals.resize(cloud.size());
  est.degenerate.assign(cloud.size(), false);
  const KdTree index(cloud.points);
  std::vector<char> degenerate(cloud.size(), 0);
  detail::parallel_for(cloud.size(), [&](std::size_t i) {
    const auto nbrs = index.knn(cloud.points[i], static_cast<std::size_t>(k));
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& n : nbrs) {
      const Vec3& p = cloud.points[n.index];
      mean += Eigen::Vector3d(p.x, p.y, p.z);
    }
    mean /= static_cast<double>(nbrs.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& n : nbrs) {
      const Vec3& p = cloud.points[n.index];
      const Eigen::Vector3d d = Eigen::Vector3d(p.x, p.y, p.z) - mean;
      cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
    const Eigen::Vector3d ev = solver.eigenvalues();  // ascending
    if (!(ev[2] > 0) || ev[1] <= 1e-12 * ev[2]) {
      degenerate[i] = 1;
      est.normals[i] = {};
      return;
    }
    const Eigen::Vector3d n = solver.eigenvectors().col(0).normalized();
    est.normals[i] = {n.x(), n.y(), n.z()};
  });
  for (std::size_t i = 0; i < cloud.size(); ++i) est.degenerate[i] = degenerate[i] != 0;
  return est;
}

PsnrResult d2_psnr(const PointCloud& ref, const PointCloud& rec, const MetricConfig& cfg) {
  cfg.validate();
  require_points(ref, "reference");
  require_points(rec, "reconstructed");
  if (ref.size() < static_cast<std::size_t>(cfg.knn_k))
    fail(ErrorKind::argument, "reference cloud has fewer points than knn_k");

  const NormalEstimate normals = estimate_normals(ref, cfg.knn_k);
  const KdTree ref_index(ref.points), rec_index(rec.points);
  auto projected = [&](std::size_t ref_point, Vec3 error) {
    if (normals.degenerate[ref_point]) return squared_norm(error);
    const double d = dot(error, normals.normals[ref_point]);
    return d * d;
  };

  PsnrResult r;
  r.mse_ref_to_rec = directed_mean(ref, rec_index, [&](std::size_t i, const auto& nn) {
    return projected(i, rec.points[nn.index] - ref.points[i]);
  });
  r.mse_rec_to_ref = directed_mean(rec, ref_index, [&](std::size_t i, const auto& nn) {
    return projected(nn.index, rec.points[i] - ref.points[nn.index]);
  });
  r.mse = std::max(r.mse_ref_to_rec, r.mse_rec_to_ref);
  r.db = psnr_from_mse(r.mse, cfg);
  r.degenerate_normals = static_cast<std::size_t>(
      std::count(normals.degenerate.begin(), normals.degenerate.end(), true));
  return r;
}

double chamfer(const PointCloud& ref, const PointCloud& rec, const MetricConfig& cfg) {
  require_points(ref, "reference");
  require_points(rec, "reconstructed");
  const KdTree ref_index(ref.points), rec_index(rec.points);
  auto dist = [&](std::size_t, const KdTree::Neighbor& nn) {
    return cfg.cd == ChamferConvention::mean_l2 ? std::sqrt(nn.sq_dist) : nn.sq_dist;
  };
  return 0.5 * (directed_mean(ref, rec_index, dist) +
                directed_mean(rec, ref_index, dist));
}

// --- BD-rate -----------------------------------------------------------------

namespace {

// Cubic fit of log10(rate) on distortion, held in a centred/scaled variable
// t = (d - centre) / scale for conditioning.
struct CubicFit {
  double centre = 0, scale = 1;
  Eigen::Vector4d coef = Eigen::Vector4d::Zero();
  double lo = 0, hi = 0;

  double primitive(double d) const {
    const double t = (d - centre) / scale;
    double acc = 0, tp = t;
    for (int k = 0; k < 4; ++k) {
      acc += coef[k] * tp / (k + 1);
      tp *= t;
    }
    return acc * scale;
  }
};

CubicFit fit_curve(const RDCurve& curve, const char* which) {
  std::vector<RDPoint> pts;
  for (const auto& p : curve) {
    if (!(p.rate > 0)) fail(ErrorKind::argument, std::string(which) + " curve has a non-positive rate");
    if (std::isfinite(p.distortion)) pts.push_back(p);
  }
  if (pts.size() < 4)
    fail(ErrorKind::argument, std::string(which) + " curve needs at least 4 finite points");

  CubicFit fit;
  fit.lo = fit.hi = pts[0].distortion;
  double sum = 0;
  for (const auto& p : pts) {
    fit.lo = std::min(fit.lo, p.distortion);
    fit.hi = std::max(fit.hi, p.distortion);
    sum += p.distortion;
  }
  fit.centre = sum / static_cast<double>(pts.size());
  fit.scale = fit.hi > fit.lo ? 0.5 * (fit.hi - fit.lo) : 1.0;

  Eigen::MatrixXd a(static_cast<Eigen::Index>(pts.size()), 4);
  Eigen::VectorXd b(static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double t = (pts[i].distortion - fit.centre) / fit.scale;
    const auto row = static_cast<Eigen::Index>(i);
    a(row, 0) = 1;
    a(row, 1) = t;
    a(row, 2) = t * t;
    a(row, 3) = t * t * t;
    b(row) = std::log10(pts[i].rate);
  }
  fit.coef = a.colPivHouseholderQr().solve(b);
  return fit;
}

}  // namespace

double bd_rate(const RDCurve& anchor, const RDCurve& test) {
  const CubicFit fa = fit_curve(anchor, "anchor");
  const CubicFit ft = fit_curve(test, "test");
  const double lo = std::max(fa.lo, ft.lo);
  const double hi = std::min(fa.hi, ft.hi);
  if (!(hi > lo)) fail(ErrorKind::computation, "disjoint ranges");
  const double int_a = fa.primitive(hi) - fa.primitive(lo);
  const double int_t = ft.primitive(hi) - ft.primitive(lo);
  return (std::pow(10.0, (int_t - int_a) / (hi - lo)) - 1.0) * 100.0;
}

// --- Reports -----------------------------------------------------------------

MetricsReport compute_metrics(const PointCloud& ref, const PointCloud& rec,
                              const MetricConfig& cfg) {
  MetricsReport r;
  r.config = cfg;
  r.d1 = d1_psnr(ref, rec, cfg);
  r.d2 = d2_psnr(ref, rec, cfg);
  r.cd = chamfer(ref, rec, cfg);
  return r;
}

std::string format_csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string report_csv_header() {
  return "rate_bpp,d1_db,d2_db,cd,peak,psnr_convention,cd_convention,knn_k";
}

std::string report_csv_row(const MetricsReport& r) {
  return format_csv_number(r.rate_bpp) + "," + format_csv_number(r.d1.db) + "," +
         format_csv_number(r.d2.db) + "," + format_csv_number(r.cd) + "," +
         format_csv_number(r.config.peak) + "," + to_string(r.config.psnr) + "," +
         to_string(r.config.cd) + "," + std::to_string(r.config.knn_k);
}

namespace {

nlohmann::ordered_json json_number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return nullptr;
  return v > 0 ? "inf" : "-inf";
}

}  // namespace

std::string report_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["rate_bpp"] = json_number(r.rate_bpp);
  j["d1_db"] = json_number(r.d1.db);
  j["d1_mse"] = r.d1.mse;
  j["d2_db"] = json_number(r.d2.db);
  j["d2_mse"] = r.d2.mse;
  j["d2_degenerate_normals"] = r.d2.degenerate_normals;
  j["cd"] = r.cd;
  j["config"] = {{"peak", r.config.peak},
                 {"psnr_convention", to_string(r.config.psnr)},
                 {"cd_convention", to_string(r.config.cd)},
                 {"knn_k", r.config.knn_k}};
  return j.dump(2);
}

}  // namespace scp
