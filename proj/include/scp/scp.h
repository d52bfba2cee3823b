/*
 * C interface to the spherical-coordinate LiDAR geometry codec.
 *
 * All objects are opaque handles created by the library and released with the
 * matching *_free function. Every fallible call returns an scp_status; on
 * failure scp_last_error() holds a message for the calling thread until its
 * next failing call.
 */
#ifndef SCP_SCP_H
#define SCP_SCP_H

#include <stddef.h>
#include <stdint.h>

#if defined(SCP_BUILDING_LIBRARY)
#define SCP_API __attribute__((visibility("default")))
#else
#define SCP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum scp_status {
  SCP_OK = 0,
  SCP_ERR_ARGUMENT = 1,
  SCP_ERR_IO = 2,
  SCP_ERR_FORMAT = 3,
  SCP_ERR_CONFIG = 4,
  SCP_ERR_CORRUPT_STREAM = 5,
  SCP_ERR_COMPUTATION = 6,
  SCP_ERR_INTERNAL = 7
} scp_status;

typedef struct scp_cloud scp_cloud;
typedef struct scp_container scp_container;
typedef struct scp_error_report scp_error_report;

SCP_API const char* scp_version(void);
SCP_API const char* scp_last_error(void);
SCP_API const char* scp_status_name(scp_status status);

/* ---- point clouds -------------------------------------------------------- */

/* xyz holds 3*count doubles; attr is optional (NULL) or count doubles. */
SCP_API scp_status scp_cloud_create(const double* xyz, size_t count, const double* attr,
                                    scp_cloud** out);
/* Format chosen by extension: .bin (KITTI float32 x4) or .ply. */
SCP_API scp_status scp_cloud_read(const char* path, scp_cloud** out);
SCP_API scp_status scp_cloud_write_ply(const scp_cloud* cloud, const char* path, int binary);
SCP_API scp_status scp_cloud_write_kitti(const scp_cloud* cloud, const char* path);
SCP_API size_t scp_cloud_size(const scp_cloud* cloud);
SCP_API int scp_cloud_has_attr(const scp_cloud* cloud);
/* Copies min(count, size) points / attribute values. */
SCP_API scp_status scp_cloud_copy_points(const scp_cloud* cloud, double* xyz, size_t count);
SCP_API scp_status scp_cloud_copy_attr(const scp_cloud* cloud, double* attr, size_t count);
/* Reader warnings (skipped PLY elements and properties). */
SCP_API size_t scp_cloud_warning_count(const scp_cloud* cloud);
SCP_API const char* scp_cloud_warning(const scp_cloud* cloud, size_t index);
SCP_API void scp_cloud_free(scp_cloud* cloud);

typedef struct scp_synth_params {
  int32_t beams;
  int32_t points_per_ring;
  double rho_max;
  double range_min;
  double dropout;
  double noise_sigma;
  uint64_t seed;
} scp_synth_params;

SCP_API void scp_synth_params_default(scp_synth_params* params);
SCP_API scp_status scp_synth_lidar(const scp_synth_params* params, scp_cloud** out);

/* ---- codec ---------------------------------------------------------------- */

enum { SCP_SYSTEM_CARTESIAN = 0, SCP_SYSTEM_CYLINDRICAL = 1, SCP_SYSTEM_SPHERICAL = 2 };
enum { SCP_CONVENTION_KITTI = 0, SCP_CONVENTION_FORD = 1, SCP_CONVENTION_RAW = 2 };

#define SCP_MAX_PARTS 16

typedef struct scp_codec_config {
  int32_t system;
  int32_t convention;
  int32_t depth; /* 0 when unset */
  double q;      /* 0 when unset */
  int32_t n_parts;
  /* t_0 .. t_{n_parts-1}; t_{n_parts} = 1 is implicit */
  double thresholds[SCP_MAX_PARTS];
} scp_codec_config;

/* Spherical, KITTI convention, depth 12, three parts at 0, 1/4, 1/2. */
SCP_API void scp_codec_config_default(scp_codec_config* cfg);

SCP_API scp_status scp_encode(const scp_cloud* cloud, const scp_codec_config* cfg,
                              scp_container** out);
SCP_API scp_status scp_decode(const scp_container* container, scp_cloud** out);

SCP_API scp_status scp_container_from_bytes(const uint8_t* data, size_t size,
                                            scp_container** out);
SCP_API scp_status scp_container_read(const char* path, scp_container** out);
SCP_API scp_status scp_container_write(const scp_container* container, const char* path);
/* Serialized bytes, valid for the lifetime of the handle. */
SCP_API scp_status scp_container_bytes(const scp_container* container, const uint8_t** data,
                                       size_t* size);

typedef struct scp_container_info {
  int32_t system;
  int32_t depth;
  int32_t n_parts;
  double q;
  double rho_max;
  double origin_offset[3];
  uint64_t original_count;
  uint64_t byte_size;
} scp_container_info;

typedef struct scp_part_info {
  uint64_t symbol_count;
  int32_t empty;
  uint64_t payload_bytes;
  double threshold;
} scp_part_info;

SCP_API scp_status scp_container_info_get(const scp_container* container,
                                          scp_container_info* info);
SCP_API scp_status scp_container_part_get(const scp_container* container, int32_t part,
                                          scp_part_info* info);
/* 8 * container bytes / original_count. */
SCP_API scp_status scp_measure_bpp(const scp_container* container, uint64_t original_count,
                                   double* bpp);
SCP_API void scp_container_free(scp_container* container);

/* ---- metrics -------------------------------------------------------------- */

enum { SCP_PSNR_R_SQUARED = 0, SCP_PSNR_THREE_R_SQUARED = 1 };
enum { SCP_CD_MEAN_L2 = 0, SCP_CD_MEAN_SQUARED = 1 };

typedef struct scp_metric_config {
  double peak;
  int32_t psnr_convention;
  int32_t knn_k;
  int32_t cd_convention;
} scp_metric_config;

/* Infinite PSNR (identical clouds) is reported as +HUGE_VAL. */
typedef struct scp_metrics {
  double d1_mse;
  double d1_db;
  double d2_mse;
  double d2_db;
  double cd;
  uint64_t d2_degenerate_normals;
} scp_metrics;

/* peak 59.70, r^2 convention, k = 12, mean L2 Chamfer. */
SCP_API void scp_metric_config_default(scp_metric_config* cfg);
SCP_API scp_status scp_compute_metrics(const scp_cloud* ref, const scp_cloud* rec,
                                       const scp_metric_config* cfg, scp_metrics* out);
SCP_API scp_status scp_d1_psnr(const scp_cloud* ref, const scp_cloud* rec,
                               const scp_metric_config* cfg, double* mse, double* db);
SCP_API scp_status scp_chamfer(const scp_cloud* ref, const scp_cloud* rec,
                               const scp_metric_config* cfg, double* cd);
/* Writes a NUL-terminated report (json != 0: JSON, else one CSV header line
 * and one row) into buf; *needed receives the full length excluding NUL.
 * rate_bpp may be NaN when unknown. */
SCP_API scp_status scp_metrics_format(const scp_metrics* metrics, const scp_metric_config* cfg,
                                      double rate_bpp, int json, char* buf, size_t capacity,
                                      size_t* needed);
SCP_API scp_status scp_bd_rate(const double* anchor_rate, const double* anchor_distortion,
                               size_t anchor_count, const double* test_rate,
                               const double* test_distortion, size_t test_count,
                               double* percent);

/* ---- reconstruction-error analysis ---------------------------------------- */

SCP_API double scp_bound_cart(double q);
SCP_API double scp_bound_sph(double q, double rho_max, double rho);
SCP_API double scp_bound_part(double q, double t_n, double t_next, int32_t n);
SCP_API double scp_bound_part_edge(double q, double t_next, int32_t n);
SCP_API scp_status scp_crossover_radii(const double* multipliers, size_t count, double* out);

enum { SCP_PAIRING_PIPELINE = 0, SCP_PAIRING_NEAREST = 1 };

typedef struct scp_error_summary {
  int32_t pairing;
  uint64_t points;
  double max_error;
  double mean_error;
  double bound;
  double utilization;
  double pointwise_utilization; /* NaN unless spherical single-level */
  int32_t n_parts;              /* 0 when no per-part statistics */
} scp_error_summary;

typedef struct scp_part_error {
  uint64_t points;
  double max_error;
  double mean_error;
  double bound_midpoint;
  double bound_edge;
  double utilization;
} scp_part_error;

/* Pairs every point with its own voxel centre under cfg. */
SCP_API scp_status scp_analyze_pipeline(const scp_cloud* ref, const scp_codec_config* cfg,
                                        scp_error_report** out);
/* Uses the container's quantization; falls back to nearest-neighbour pairing
 * when the container does not hold the reference's voxels. */
SCP_API scp_status scp_analyze_container(const scp_cloud* ref, const scp_container* container,
                                         scp_error_report** out);
SCP_API scp_status scp_analyze_nearest(const scp_cloud* ref, const scp_cloud* rec,
                                       scp_error_report** out);
SCP_API scp_status scp_error_report_summary(const scp_error_report* report,
                                            scp_error_summary* out);
SCP_API scp_status scp_error_report_part(const scp_error_report* report, int32_t part,
                                         scp_part_error* out);
/* JSON text owned by the report. */
SCP_API const char* scp_error_report_json(const scp_error_report* report);
SCP_API scp_status scp_error_report_export_colormap(const scp_error_report* report,
                                                    const char* ply_path, const char* csv_path,
                                                    int32_t bins);
SCP_API void scp_error_report_free(scp_error_report* report);

#ifdef __cplusplus
}
#endif

#endif /* SCP_SCP_H */
