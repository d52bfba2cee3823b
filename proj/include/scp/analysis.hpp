#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scp/codec.hpp"

namespace scp {

// Worst-case displacement of a point from its Cartesian voxel centre: sqrt(3) q / 2.
double bound_cart(double q);

// Small-angle bound of a spherical voxel at radius rho:
// sqrt(5) pi q rho / (2 rho_max). The radial half-step is not included.
double bound_sph(double q, double rho_max, double rho);
// Same bound written through the azimuth step: (sqrt(5) / 4) rho q_theta.
double bound_sph_from_theta_step(double rho, double q_theta);

// Part-n bound evaluated at the middle of [t_n, t_next]:
// sqrt(5) pi q (t_n + t_next) / 2^(n+2).
double bound_part(double q, double t_n, double t_next, int n);
// Part-n bound at its outer edge: sqrt(5) pi q t_next / 2^(n+1).
double bound_part_edge(double q, double t_next, int n);

// rho / rho_max where bound_sph = k * bound_cart: k sqrt(3) / (sqrt(5) pi).
std::vector<double> crossover_radii(std::span<const double> multipliers);

// Points with rho below this fraction of rho_max are outside the regime of the
// small-angle spherical bound and are left out of its utilization figure.
inline constexpr double kSmallAngleCutoff = 0.05;

// Per-point reconstruction through the encoder's own quantization path.
struct PairedReconstruction {
  std::vector<Vec3> points;       // p_hat for every input point, input order
  std::vector<std::size_t> part;  // multi-level part of every input point
};

PairedReconstruction pipeline_reconstruction(const PointCloud& cloud, const EncodingPlan& plan);

// Plan equivalent to the one that produced `container`, rebuilt from header
// fields and the original cloud (index sets are not filled in).
EncodingPlan plan_from_container(const Container& container, const PointCloud& original);

enum class Pairing { pipeline, nearest_neighbor };
const char* to_string(Pairing p);

struct PartErrorStats {
  std::size_t points = 0;
  double max_error = 0;
  double mean_error = 0;
  double bound_midpoint = 0;
  double bound_edge = 0;
  double utilization = 0;  // max_error / bound_edge
};

struct ErrorReport {
  Pairing pairing = Pairing::pipeline;
  std::optional<CoordSystem> system;
  double q = 0;
  double rho_max = 0;
  std::size_t points = 0;
  double max_error = 0;
  double mean_error = 0;
  // Cartesian: sqrt(3) q / 2. Spherical: bound_sph at rho_max (one part) or the
  // largest part edge bound. Cylindrical: radial/azimuth/height half-steps
  // combined at rho_max. Zero when no configuration is known.
  double bound = 0;
  double utilization = 0;
  // Spherical single-level only: max over points with rho >= cutoff of
  // error / bound_sph(rho).
  std::optional<double> pointwise_utilization;
  std::size_t excluded_small_radius = 0;
  std::vector<PartErrorStats> per_part;  // present iff more than one part
  std::vector<double> per_point;
  std::vector<Vec3> reconstructed;       // paired p_hat, same order as per_point
};

ErrorReport empirical_error(const PointCloud& ref, const PairedReconstruction& rec,
                            const EncodingPlan& plan);

// Fallback when only a decoded cloud is available: each reference point is
// paired with its nearest reconstructed point. Bounds are filled in when a
// plan is supplied.
ErrorReport empirical_error_nearest(const PointCloud& ref, const PointCloud& rec,
                                    const EncodingPlan* plan = nullptr);

// Pipeline pairing when every paired voxel is present in the decoded
// container; nearest-neighbour pairing otherwise.
ErrorReport analyze_container(const PointCloud& ref, const Container& container);

std::string error_report_json(const ErrorReport& report);

struct RadialBin {
  double rho_lo = 0, rho_hi = 0;
  std::size_t count = 0;
  double mean_error = 0, max_error = 0;
};

// Equal-count bins over rho (deciles for bins = 10) of the points with
// rho >= min_rho.
std::vector<RadialBin> error_by_radius(const PointCloud& ref, std::span<const double> errors,
                                       int bins, double min_rho = 0.0);

struct HistogramBin {
  double lo = 0, hi = 0;
  std::size_t count = 0;
  std::string color;  // #rrggbb, purple (lowest) to red (highest)
};

std::vector<HistogramBin> error_histogram(std::span<const double> errors, int bins);

// Writes the paired reconstruction with the per-point error as a scalar
// property, and a CSV of histogram bins over [0, max_error].
std::vector<HistogramBin> export_error_colormap(const ErrorReport& report,
                                                const std::filesystem::path& ply_path,
                                                const std::filesystem::path& csv_path,
                                                int bins);

}  // namespace scp
