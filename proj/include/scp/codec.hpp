#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scp/coords.hpp"
#include "scp/octree.hpp"

namespace scp {

// How the base step q follows from the octree depth D.
enum class StepConvention : std::uint8_t {
  kitti,  // q = 400 / (2^D - 1)
  ford,   // q = 2^(18 - D)
  raw,    // q given, or q = extent / (2^D - 1) for a given depth
};

const char* to_string(StepConvention c);
StepConvention parse_step_convention(const std::string& name);

double kitti_step(int depth);
double ford_step(int depth);

struct CodecConfig {
  CoordSystem system = CoordSystem::spherical;
  StepConvention convention = StepConvention::kitti;
  std::optional<int> depth = 12;
  std::optional<double> q;
  MultiLevelConfig multilevel;

  // Throws ErrorKind::config on conflicting or missing depth/q or invalid
  // thresholds.
  void validate() const;
};

// Base quantization step for `cloud` under `cfg`.
double resolve_step(const CodecConfig& cfg, const PointCloud& cloud);

struct ContainerPart {
  std::uint64_t symbol_count = 0;
  bool empty = true;
  std::vector<std::uint8_t> payload;
};

// Little-endian container:
//   "SCP1" | version u8 | system u8 | depth u8 | n_parts u8 | q f64 |
//   rho_max f64 | origin_offset 3 x f64 | thresholds n_parts x f32 |
//   per part { symbol_count u64 | empty u8 | payload_len u64 | payload } |
//   original_count u64
struct Container {
  static constexpr std::uint8_t kVersion = 1;

  CoordSystem system = CoordSystem::spherical;
  int depth = 1;
  double q = 1.0;
  double rho_max = 0.0;
  Vec3 origin_offset;
  std::vector<float> thresholds;
  std::vector<ContainerPart> parts;
  std::uint64_t original_count = 0;

  std::vector<std::uint8_t> serialize() const;
  // Throws ErrorKind::format on bad magic/version/fields and
  // ErrorKind::corrupt_stream on length inconsistencies.
  static Container parse(std::span<const std::uint8_t> bytes);

  std::size_t byte_size() const;
  QuantSteps base_steps() const;
};

// Everything the encoder decides before entropy coding. Shared with the
// analysis code so that per-point reconstructions follow the same path.
struct EncodingPlan {
  QuantSteps base;
  double partition_rho_max = 0.0;  // max spherical radius of the input
  MultiLevelConfig multilevel;
  std::vector<QuantizedCloud> parts;
};

EncodingPlan plan_encoding(const PointCloud& cloud, const CodecConfig& cfg);

Container encode_cloud(const PointCloud& cloud, const CodecConfig& cfg);
Container encode_plan(const EncodingPlan& plan, std::uint64_t original_count);

// Per-part index sets (steps included) recovered from the container.
std::vector<QuantizedCloud> decode_parts(const Container& container);
// Voxel centres of every part, in part order then leaf order.
PointCloud decode_cloud(const Container& container);

double measure_bpp(const Container& container, std::uint64_t original_count);

}  // namespace scp
