#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "scp/point_cloud.hpp"

namespace scp {

enum class PsnrConvention { r_squared, three_r_squared };
enum class ChamferConvention { mean_l2, mean_squared };

const char* to_string(PsnrConvention c);
const char* to_string(ChamferConvention c);

struct MetricConfig {
  double peak = 59.70;
  PsnrConvention psnr = PsnrConvention::r_squared;
  int knn_k = 12;
  ChamferConvention cd = ChamferConvention::mean_l2;

  void validate() const;
};

inline constexpr double kKittiPeak = 59.70;
inline constexpr double kFordPeak = 30000.0;

struct PsnrResult {
  double mse = 0;     // symmetric: max of the two directed values
  double mse_ref_to_rec = 0;
  double mse_rec_to_ref = 0;
  double db = std::numeric_limits<double>::infinity();  // +inf when mse == 0
  std::size_t degenerate_normals = 0;                    // D2 only
};

double psnr_from_mse(double mse, const MetricConfig& cfg);

PsnrResult d1_psnr(const PointCloud& ref, const PointCloud& rec, const MetricConfig& cfg);

// Point-to-plane: errors are projected onto least-squares normals of `ref`
// (smallest eigenvector of the k-neighbourhood covariance). Points whose
// neighbourhood has rank < 2 use the full squared error instead.
PsnrResult d2_psnr(const PointCloud& ref, const PointCloud& rec, const MetricConfig& cfg);

double chamfer(const PointCloud& ref, const PointCloud& rec, const MetricConfig& cfg);

struct NormalEstimate {
  std::vector<Vec3> normals;     // unit length, or zero when degenerate
  std::vector<bool> degenerate;
};
NormalEstimate estimate_normals(const PointCloud& cloud, int k);

struct RDPoint {
  double rate;        // bpp
  double distortion;  // dB or distance
};
using RDCurve = std::vector<RDPoint>;

// Bjontegaard delta rate in percent: cubic least-squares fits of log10(rate)
// against distortion, integrated over the shared distortion interval.
// Non-finite distortions are dropped before fitting.
double bd_rate(const RDCurve& anchor, const RDCurve& test);

struct MetricsReport {
  double rate_bpp = std::numeric_limits<double>::quiet_NaN();
  PsnrResult d1;
  PsnrResult d2;
  double cd = 0;
  MetricConfig config;
};

MetricsReport compute_metrics(const PointCloud& ref, const PointCloud& rec,
                              const MetricConfig& cfg);

std::string report_csv_header();
std::string report_csv_row(const MetricsReport& r);
// Infinite PSNR is written as the string "inf".
std::string report_json(const MetricsReport& r);

// Fixed 6-significant-digit formatting used by every CSV writer.
std::string format_csv_number(double v);

}  // namespace scp
