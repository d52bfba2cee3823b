#include "scp/scp.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <new>
#include <string>

#include "bytes.hpp"
#include "scp/analysis.hpp"
#include "scp/codec.hpp"
#include "scp/error.hpp"
#include "scp/io.hpp"
#include "scp/metrics.hpp"

struct scp_cloud {
  scp::PointCloud cloud;
  std::vector<std::string> warnings;
};

struct scp_container {
  scp::Container container;
  std::vector<std::uint8_t> bytes;
};

struct scp_error_report {
  scp::ErrorReport report;
  std::string json;
};

namespace {

thread_local std::string g_last_error;

scp_status status_of(scp::ErrorKind kind) {
  switch (kind) {
    case scp::ErrorKind::argument: return SCP_ERR_ARGUMENT;
    case scp::ErrorKind::io: return SCP_ERR_IO;
    case scp::ErrorKind::format: return SCP_ERR_FORMAT;
    case scp::ErrorKind::config: return SCP_ERR_CONFIG;
    case scp::ErrorKind::corrupt_stream: return SCP_ERR_CORRUPT_STREAM;
    case scp::ErrorKind::computation: return SCP_ERR_COMPUTATION;
  }
  return SCP_ERR_INTERNAL;
}

template <typename Fn>
scp_status guard(Fn&& fn) {
  try {
    fn();
    return SCP_OK;
  } catch (const scp::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SCP_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SCP_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) scp::fail(scp::ErrorKind::argument, std::string(what) + " is null");
}

scp::CodecConfig to_codec_config(const scp_codec_config& c) {
  scp::CodecConfig cfg;
  if (c.system < 0 || c.system > 2) scp::fail(scp::ErrorKind::config, "unknown coordinate system");
  if (c.convention < 0 || c.convention > 2) scp::fail(scp::ErrorKind::config, "unknown step convention");
  cfg.system = static_cast<scp::CoordSystem>(c.system);
  cfg.convention = static_cast<scp::StepConvention>(c.convention);
  cfg.depth = c.depth > 0 ? std::optional<int>(c.depth) : std::nullopt;
  cfg.q = c.q > 0 ? std::optional<double>(c.q) : std::nullopt;
  if (c.depth < 0 || c.q < 0) scp::fail(scp::ErrorKind::config, "depth and q must not be negative");
  if (c.n_parts < 1 || c.n_parts > SCP_MAX_PARTS)
    scp::fail(scp::ErrorKind::config, "n_parts must lie in [1, " + std::to_string(SCP_MAX_PARTS) + "]");
  cfg.multilevel.thresholds.assign(c.thresholds, c.thresholds + c.n_parts);
  cfg.validate();
  return cfg;
}

scp::MetricConfig to_metric_config(const scp_metric_config& c) {
  scp::MetricConfig cfg;
  cfg.peak = c.peak;
  cfg.knn_k = c.knn_k;
  cfg.psnr = c.psnr_convention == SCP_PSNR_THREE_R_SQUARED ? scp::PsnrConvention::three_r_squared
                                                           : scp::PsnrConvention::r_squared;
  cfg.cd = c.cd_convention == SCP_CD_MEAN_SQUARED ? scp::ChamferConvention::mean_squared
                                                  : scp::ChamferConvention::mean_l2;
  cfg.validate();
  return cfg;
}

scp_container* wrap(scp::Container c) {
  auto* out = new scp_container{std::move(c), {}};
  out->bytes = out->container.serialize();
  return out;
}

scp_error_report* wrap(scp::ErrorReport r) {
  auto* out = new scp_error_report{std::move(r), {}};
  out->json = scp::error_report_json(out->report);
  return out;
}

}  // namespace

extern "C" {

const char* scp_version(void) { return "1.0.0"; }

const char* scp_last_error(void) { return g_last_error.c_str(); }

const char* scp_status_name(scp_status status) {
  switch (status) {
    case SCP_OK: return "ok";
    case SCP_ERR_ARGUMENT: return "argument error";
    case SCP_ERR_IO: return "i/o error";
    case SCP_ERR_FORMAT: return "format error";
    case SCP_ERR_CONFIG: return "config error";
    case SCP_ERR_CORRUPT_STREAM: return "corrupt stream";
    case SCP_ERR_COMPUTATION: return "computation error";
    case SCP_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

// ---- clouds -----------------------------------------------------------------

scp_status scp_cloud_create(const double* xyz, size_t count, const double* attr, scp_cloud** out) {
  return guard([&] {
    require(out, "out");
    if (count) require(xyz, "xyz");
    scp::PointCloud cloud;
    cloud.points.resize(count);
    for (size_t i = 0; i < count; ++i)
      cloud.points[i] = {xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]};
    if (attr) cloud.attr.emplace(attr, attr + count);
    scp::validate(cloud);
    *out = new scp_cloud{std::move(cloud), {}};
  });
}

scp_status scp_cloud_read(const char* path, scp_cloud** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    auto* handle = new scp_cloud;
    try {
      handle->cloud = scp::read_cloud(path, &handle->warnings);
    } catch (...) {
      delete handle;
      throw;
    }
    *out = handle;
  });
}

scp_status scp_cloud_write_ply(const scp_cloud* cloud, const char* path, int binary) {
  return guard([&] {
    require(cloud, "cloud");
    require(path, "path");
    scp::write_ply(cloud->cloud, path,
                   binary ? scp::PlyFormat::binary_little_endian : scp::PlyFormat::ascii);
  });
}

scp_status scp_cloud_write_kitti(const scp_cloud* cloud, const char* path) {
  return guard([&] {
    require(cloud, "cloud");
    require(path, "path");
    scp::write_kitti_bin(cloud->cloud, path);
  });
}

size_t scp_cloud_size(const scp_cloud* cloud) { return cloud ? cloud->cloud.size() : 0; }

int scp_cloud_has_attr(const scp_cloud* cloud) {
  return cloud && cloud->cloud.attr.has_value() ? 1 : 0;
}

scp_status scp_cloud_copy_points(const scp_cloud* cloud, double* xyz, size_t count) {
  return guard([&] {
    require(cloud, "cloud");
    const size_t n = std::min(count, cloud->cloud.size());
    if (n) require(xyz, "xyz");
    for (size_t i = 0; i < n; ++i) {
      const auto& p = cloud->cloud.points[i];
      xyz[3 * i] = p.x;
      xyz[3 * i + 1] = p.y;
      xyz[3 * i + 2] = p.z;
    }
  });
}

scp_status scp_cloud_copy_attr(const scp_cloud* cloud, double* attr, size_t count) {
  return guard([&] {
    require(cloud, "cloud");
    if (!cloud->cloud.attr) scp::fail(scp::ErrorKind::argument, "cloud has no attribute");
    const size_t n = std::min(count, cloud->cloud.size());
    if (n) require(attr, "attr");
    std::copy_n(cloud->cloud.attr->begin(), n, attr);
  });
}

size_t scp_cloud_warning_count(const scp_cloud* cloud) {
  return cloud ? cloud->warnings.size() : 0;
}

const char* scp_cloud_warning(const scp_cloud* cloud, size_t index) {
  if (!cloud || index >= cloud->warnings.size()) return nullptr;
  return cloud->warnings[index].c_str();
}

void scp_cloud_free(scp_cloud* cloud) { delete cloud; }

void scp_synth_params_default(scp_synth_params* params) {
  if (!params) return;
  const scp::SynthParams d;
  *params = {d.beams, d.points_per_ring, d.rho_max, d.range_min, d.dropout, d.noise_sigma, d.seed};
}

scp_status scp_synth_lidar(const scp_synth_params* params, scp_cloud** out) {
  return guard([&] {
    require(params, "params");
    require(out, "out");
    scp::SynthParams p;
    p.beams = params->beams;
    p.points_per_ring = params->points_per_ring;
    p.rho_max = params->rho_max;
    p.range_min = params->range_min;
    p.dropout = params->dropout;
    p.noise_sigma = params->noise_sigma;
    p.seed = params->seed;
    *out = new scp_cloud{scp::synth_lidar(p), {}};
  });
}

// ---- codec ------------------------------------------------------------------

void scp_codec_config_default(scp_codec_config* cfg) {
  if (!cfg) return;
  std::memset(cfg, 0, sizeof *cfg);
  cfg->system = SCP_SYSTEM_SPHERICAL;
  cfg->convention = SCP_CONVENTION_KITTI;
  cfg->depth = 12;
  cfg->q = 0;
  cfg->n_parts = 3;
  cfg->thresholds[0] = 0.0;
  cfg->thresholds[1] = 0.25;
  cfg->thresholds[2] = 0.5;
}

scp_status scp_encode(const scp_cloud* cloud, const scp_codec_config* cfg, scp_container** out) {
  return guard([&] {
    require(cloud, "cloud");
    require(cfg, "cfg");
    require(out, "out");
    *out = wrap(scp::encode_cloud(cloud->cloud, to_codec_config(*cfg)));
  });
}

scp_status scp_decode(const scp_container* container, scp_cloud** out) {
  return guard([&] {
    require(container, "container");
    require(out, "out");
    *out = new scp_cloud{scp::decode_cloud(container->container), {}};
  });
}

scp_status scp_container_from_bytes(const uint8_t* data, size_t size, scp_container** out) {
  return guard([&] {
    require(out, "out");
    if (size) require(data, "data");
    *out = wrap(scp::Container::parse({data, size}));
  });
}

scp_status scp_container_read(const char* path, scp_container** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    const auto bytes = scp::detail::read_file(path);
    *out = wrap(scp::Container::parse(bytes));
  });
}

scp_status scp_container_write(const scp_container* container, const char* path) {
  return guard([&] {
    require(container, "container");
    require(path, "path");
    FILE* f = std::fopen(path, "wb");
    if (!f) scp::fail(scp::ErrorKind::io, std::string("cannot open ") + path + " for writing");
    const size_t n = std::fwrite(container->bytes.data(), 1, container->bytes.size(), f);
    const bool ok = std::fclose(f) == 0 && n == container->bytes.size();
    if (!ok) scp::fail(scp::ErrorKind::io, std::string("write failed: ") + path);
  });
}

scp_status scp_container_bytes(const scp_container* container, const uint8_t** data, size_t* size) {
  return guard([&] {
    require(container, "container");
    require(data, "data");
    require(size, "size");
    *data = container->bytes.data();
    *size = container->bytes.size();
  });
}

scp_status scp_container_info_get(const scp_container* container, scp_container_info* info) {
  return guard([&] {
    require(container, "container");
    require(info, "info");
    const auto& c = container->container;
    info->system = static_cast<int32_t>(c.system);
    info->depth = c.depth;
    info->n_parts = static_cast<int32_t>(c.parts.size());
    info->q = c.q;
    info->rho_max = c.rho_max;
    info->origin_offset[0] = c.origin_offset.x;
    info->origin_offset[1] = c.origin_offset.y;
    info->origin_offset[2] = c.origin_offset.z;
    info->original_count = c.original_count;
    info->byte_size = container->bytes.size();
  });
}

scp_status scp_container_part_get(const scp_container* container, int32_t part, scp_part_info* info) {
  return guard([&] {
    require(container, "container");
    require(info, "info");
    const auto& c = container->container;
    if (part < 0 || static_cast<size_t>(part) >= c.parts.size())
      scp::fail(scp::ErrorKind::argument, "part index out of range");
    const auto& p = c.parts[static_cast<size_t>(part)];
    info->symbol_count = p.symbol_count;
    info->empty = p.empty ? 1 : 0;
    info->payload_bytes = p.payload.size();
    info->threshold = c.thresholds[static_cast<size_t>(part)];
  });
}

scp_status scp_measure_bpp(const scp_container* container, uint64_t original_count, double* bpp) {
  return guard([&] {
    require(container, "container");
    require(bpp, "bpp");
    *bpp = scp::measure_bpp(container->container, original_count);
  });
}

void scp_container_free(scp_container* container) { delete container; }

// ---- metrics ----------------------------------------------------------------

void scp_metric_config_default(scp_metric_config* cfg) {
  if (!cfg) return;
  const scp::MetricConfig d;
  cfg->peak = d.peak;
  cfg->psnr_convention = SCP_PSNR_R_SQUARED;
  cfg->knn_k = d.knn_k;
  cfg->cd_convention = SCP_CD_MEAN_L2;
}

scp_status scp_compute_metrics(const scp_cloud* ref, const scp_cloud* rec,
                               const scp_metric_config* cfg, scp_metrics* out) {
  return guard([&] {
    require(ref, "ref");
    require(rec, "rec");
    require(cfg, "cfg");
    require(out, "out");
    const auto r = scp::compute_metrics(ref->cloud, rec->cloud, to_metric_config(*cfg));
    *out = {r.d1.mse, r.d1.db, r.d2.mse, r.d2.db, r.cd, r.d2.degenerate_normals};
  });
}

scp_status scp_d1_psnr(const scp_cloud* ref, const scp_cloud* rec, const scp_metric_config* cfg,
                       double* mse, double* db) {
  return guard([&] {
    require(ref, "ref");
    require(rec, "rec");
    require(cfg, "cfg");
    const auto r = scp::d1_psnr(ref->cloud, rec->cloud, to_metric_config(*cfg));
    if (mse) *mse = r.mse;
    if (db) *db = r.db;
  });
}

scp_status scp_chamfer(const scp_cloud* ref, const scp_cloud* rec, const scp_metric_config* cfg,
                       double* cd) {
  return guard([&] {
    require(ref, "ref");
    require(rec, "rec");
    require(cfg, "cfg");
    require(cd, "cd");
    *cd = scp::chamfer(ref->cloud, rec->cloud, to_metric_config(*cfg));
  });
}

scp_status scp_metrics_format(const scp_metrics* metrics, const scp_metric_config* cfg,
                              double rate_bpp, int json, char* buf, size_t capacity,
                              size_t* needed) {
  return guard([&] {
    require(metrics, "metrics");
    require(cfg, "cfg");
    scp::MetricsReport r;
    r.config = to_metric_config(*cfg);
    r.rate_bpp = rate_bpp;
    r.d1.mse = metrics->d1_mse;
    r.d1.db = metrics->d1_db;
    r.d2.mse = metrics->d2_mse;
    r.d2.db = metrics->d2_db;
    r.d2.degenerate_normals = metrics->d2_degenerate_normals;
    r.cd = metrics->cd;
    const std::string text =
        json ? scp::report_json(r) + "\n"
             : scp::report_csv_header() + "\n" + scp::report_csv_row(r) + "\n";
    if (needed) *needed = text.size();
    if (buf && capacity) {
      const size_t n = std::min(capacity - 1, text.size());
      std::memcpy(buf, text.data(), n);
      buf[n] = '\0';
    }
  });
}

scp_status scp_bd_rate(const double* anchor_rate, const double* anchor_distortion,
                       size_t anchor_count, const double* test_rate,
                       const double* test_distortion, size_t test_count, double* percent) {
  return guard([&] {
    require(percent, "percent");
    if (anchor_count) {
      require(anchor_rate, "anchor_rate");
      require(anchor_distortion, "anchor_distortion");
    }
    if (test_count) {
      require(test_rate, "test_rate");
      require(test_distortion, "test_distortion");
    }
    scp::RDCurve a, t;
    for (size_t i = 0; i < anchor_count; ++i) a.push_back({anchor_rate[i], anchor_distortion[i]});
    for (size_t i = 0; i < test_count; ++i) t.push_back({test_rate[i], test_distortion[i]});
    *percent = scp::bd_rate(a, t);
  });
}

// ---- analysis ---------------------------------------------------------------

double scp_bound_cart(double q) { return scp::bound_cart(q); }
double scp_bound_sph(double q, double rho_max, double rho) { return scp::bound_sph(q, rho_max, rho); }
double scp_bound_part(double q, double t_n, double t_next, int32_t n) {
  return scp::bound_part(q, t_n, t_next, n);
}
double scp_bound_part_edge(double q, double t_next, int32_t n) {
  return scp::bound_part_edge(q, t_next, n);
}

scp_status scp_crossover_radii(const double* multipliers, size_t count, double* out) {
  return guard([&] {
    if (count) {
      require(multipliers, "multipliers");
      require(out, "out");
    }
    const auto r = scp::crossover_radii({multipliers, count});
    std::copy(r.begin(), r.end(), out);
  });
}

scp_status scp_analyze_pipeline(const scp_cloud* ref, const scp_codec_config* cfg,
                                scp_error_report** out) {
  return guard([&] {
    require(ref, "ref");
    require(cfg, "cfg");
    require(out, "out");
    const auto plan = scp::plan_encoding(ref->cloud, to_codec_config(*cfg));
    *out = wrap(scp::empirical_error(ref->cloud, scp::pipeline_reconstruction(ref->cloud, plan), plan));
  });
}

scp_status scp_analyze_container(const scp_cloud* ref, const scp_container* container,
                                 scp_error_report** out) {
  return guard([&] {
    require(ref, "ref");
    require(container, "container");
    require(out, "out");
    *out = wrap(scp::analyze_container(ref->cloud, container->container));
  });
}

scp_status scp_analyze_nearest(const scp_cloud* ref, const scp_cloud* rec, scp_error_report** out) {
  return guard([&] {
    require(ref, "ref");
    require(rec, "rec");
    require(out, "out");
    *out = wrap(scp::empirical_error_nearest(ref->cloud, rec->cloud));
  });
}

scp_status scp_error_report_summary(const scp_error_report* report, scp_error_summary* out) {
  return guard([&] {
    require(report, "report");
    require(out, "out");
    const auto& r = report->report;
    out->pairing = r.pairing == scp::Pairing::pipeline ? SCP_PAIRING_PIPELINE : SCP_PAIRING_NEAREST;
    out->points = r.points;
    out->max_error = r.max_error;
    out->mean_error = r.mean_error;
    out->bound = r.bound;
    out->utilization = r.utilization;
    out->pointwise_utilization =
        r.pointwise_utilization ? *r.pointwise_utilization : std::numeric_limits<double>::quiet_NaN();
    out->n_parts = static_cast<int32_t>(r.per_part.size());
  });
}

scp_status scp_error_report_part(const scp_error_report* report, int32_t part, scp_part_error* out) {
  return guard([&] {
    require(report, "report");
    require(out, "out");
    const auto& parts = report->report.per_part;
    if (part < 0 || static_cast<size_t>(part) >= parts.size())
      scp::fail(scp::ErrorKind::argument, "part index out of range");
    const auto& s = parts[static_cast<size_t>(part)];
    *out = {s.points, s.max_error, s.mean_error, s.bound_midpoint, s.bound_edge, s.utilization};
  });
}

const char* scp_error_report_json(const scp_error_report* report) {
  return report ? report->json.c_str() : nullptr;
}

scp_status scp_error_report_export_colormap(const scp_error_report* report, const char* ply_path,
                                            const char* csv_path, int32_t bins) {
  return guard([&] {
    require(report, "report");
    require(ply_path, "ply_path");
    require(csv_path, "csv_path");
    scp::export_error_colormap(report->report, ply_path, csv_path, bins);
  });
}

void scp_error_report_free(scp_error_report* report) { delete report; }

}  // extern "C"
