#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "scp/point_cloud.hpp"

namespace scp {

// KITTI velodyne scans: little-endian float32 records (x, y, z, intensity).
PointCloud read_kitti_bin(const std::filesystem::path& path);
void write_kitti_bin(const PointCloud& cloud, const std::filesystem::path& path);

enum class PlyFormat { ascii, binary_little_endian };

// Vertex x/y/z plus at most one extra scalar property (mapped to attr).
// Non-vertex elements and further scalars are skipped; a note is appended to
// `warnings` for each.
PointCloud read_ply(const std::filesystem::path& path,
                    std::vector<std::string>* warnings = nullptr);

// Coordinates are written as double. ASCII output uses 17 significant digits.
void write_ply(const PointCloud& cloud, const std::filesystem::path& path,
               PlyFormat format, const std::string& attr_name = "scalar");

// Dispatches on extension: .bin -> KITTI, .ply -> PLY.
PointCloud read_cloud(const std::filesystem::path& path,
                      std::vector<std::string>* warnings = nullptr);

struct SynthParams {
  int beams = 64;
  int points_per_ring = 1800;
  double rho_max = 80.0;
  // Ranges are drawn uniformly from (range_min, rho_max]; range_min == rho_max
  // gives a fixed range.
  double range_min = 0.0;
  double dropout = 0.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

// Spinning-LiDAR emulation: `beams` elevation rings uniformly spaced over
// [-25 deg, +3 deg], each sampled at `points_per_ring` evenly spaced azimuths.
// Range noise is Gaussian, truncated at 3 sigma, and the result is clamped to
// (0, rho_max].
PointCloud synth_lidar(const SynthParams& params);

}  // namespace scp
