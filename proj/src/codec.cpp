#include "scp/codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <future>

#include "bytes.hpp"
#include "scp/entropy.hpp"
#include "scp/error.hpp"

namespace scp {

const char* to_string(StepConvention c) {
  switch (c) {
    case StepConvention::kitti: return "kitti";
    case StepConvention::ford: return "ford";
    case StepConvention::raw: return "raw";
  }
  return "unknown";
}

StepConvention parse_step_convention(const std::string& name) {
  if (name == "kitti") return StepConvention::kitti;
  if (name == "ford") return StepConvention::ford;
  if (name == "raw") return StepConvention::raw;
  fail(ErrorKind::config, "unknown step convention '" + name + "'");
}

double kitti_step(int depth) { return 400.0 / (std::ldexp(1.0, depth) - 1.0); }
double ford_step(int depth) { return std::ldexp(1.0, 18 - depth); }

void CodecConfig::validate() const {
  if (depth && q)
    fail(ErrorKind::config, "depth and q are mutually exclusive");
  if (convention != StepConvention::raw && !depth)
    fail(ErrorKind::config, std::string(to_string(convention)) + " convention requires a depth");
  if (convention == StepConvention::raw && !depth && !q)
    fail(ErrorKind::config, "raw convention requires a depth or q");
  if (depth && (*depth < 1 || *depth > kMaxDepth))
    fail(ErrorKind::config, "depth out of range: " + std::to_string(*depth));
  if (q && !(*q > 0 && std::isfinite(*q)))
    fail(ErrorKind::config, "q must be positive");
  multilevel.validate();
}

double resolve_step(const CodecConfig& cfg, const PointCloud& cloud) {
  cfg.validate();
  switch (cfg.convention) {
    case StepConvention::kitti: return kitti_step(*cfg.depth);
    case StepConvention::ford: return ford_step(*cfg.depth);
    case StepConvention::raw: break;
  }
  if (cfg.q) return *cfg.q;
  if (cloud.empty())
    fail(ErrorKind::argument, "cannot size a raw-depth step on an empty cloud");

  double extent = 0;
  double zlo = cloud.points[0].z, zhi = zlo;
  Vec3 lo = cloud.points[0], hi = lo;
  for (const Vec3& p : cloud.points) {
    switch (cfg.system) {
      case CoordSystem::spherical: extent = std::max(extent, norm(p)); break;
      case CoordSystem::cylindrical: extent = std::max(extent, std::hypot(p.x, p.y)); break;
      case CoordSystem::cartesian: break;
    }
    zlo = std::min(zlo, p.z);
    zhi = std::max(zhi, p.z);
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
  }
  if (cfg.system == CoordSystem::cylindrical) extent = std::max(extent, zhi - zlo);
  if (cfg.system == CoordSystem::cartesian)
    extent = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z});
  if (!(extent > 0))
    fail(ErrorKind::config, "cloud has zero extent; give q explicitly");
  return extent / (std::ldexp(1.0, *cfg.depth) - 1.0);
}

// --- Container -----------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'S', 'C', 'P', '1'};

class Reader {
public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T read(const char* field) {
    need(sizeof(T), field);
    T v = detail::load_le<T>(bytes_.data() + pos_);
    pos_ += sizeof(T);
    return v;
  }

  std::span<const std::uint8_t> take(std::uint64_t n, const char* field) {
    if (n > bytes_.size() - pos_) truncated(field);
    auto s = bytes_.subspan(pos_, static_cast<std::size_t>(n));
    pos_ += static_cast<std::size_t>(n);
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

private:
  void need(std::size_t n, const char* field) {
    if (n > remaining()) truncated(field);
  }
  [[noreturn]] void truncated(const char* field) {
    fail(ErrorKind::corrupt_stream, std::string("container truncated while reading ") + field +
                                        " at byte " + std::to_string(pos_));
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> Container::serialize() const {
  if (parts.empty() || parts.size() > 255 || parts.size() != thresholds.size())
    fail(ErrorKind::argument, "container needs 1..255 parts with one threshold each");
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.reserve(byte_size());
  out.push_back(kVersion);
  out.push_back(static_cast<std::uint8_t>(system));
  out.push_back(static_cast<std::uint8_t>(depth));
  out.push_back(static_cast<std::uint8_t>(parts.size()));
  detail::append_le(out, q);
  detail::append_le(out, rho_max);
  detail::append_le(out, origin_offset.x);
  detail::append_le(out, origin_offset.y);
  detail::append_le(out, origin_offset.z);
  for (float t : thresholds) detail::append_le(out, t);
  for (const auto& part : parts) {
    detail::append_le(out, part.symbol_count);
    out.push_back(part.empty ? 1 : 0);
    detail::append_le(out, static_cast<std::uint64_t>(part.payload.size()));
    out.insert(out.end(), part.payload.begin(), part.payload.end());
  }
  detail::append_le(out, original_count);
  return out;
}

std::size_t Container::byte_size() const {
  std::size_t n = 4 + 4 + 8 * 5 + 4 * thresholds.size() + 8;
  for (const auto& part : parts) n += 17 + part.payload.size();
  return n;
}

Container Container::parse(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    fail(ErrorKind::format, "not an SCP container (bad magic)");
  Reader r(bytes.subspan(4));
  Container c;
  const auto version = r.read<std::uint8_t>("version");
  if (version != kVersion)
    fail(ErrorKind::format, "unsupported container version " + std::to_string(version));
  const auto system = r.read<std::uint8_t>("system");
  if (system > 2)
    fail(ErrorKind::format, "unknown coordinate system code " + std::to_string(system));
  c.system = static_cast<CoordSystem>(system);
  c.depth = r.read<std::uint8_t>("depth");
  const unsigned n_parts = r.read<std::uint8_t>("n_parts");
  if (n_parts == 0) fail(ErrorKind::format, "container declares zero parts");
  if (c.depth < 1 || c.depth > kMaxDepth)
    fail(ErrorKind::format, "container depth out of range: " + std::to_string(c.depth));
  c.q = r.read<double>("q");
  c.rho_max = r.read<double>("rho_max");
  c.origin_offset.x = r.read<double>("origin_offset");
  c.origin_offset.y = r.read<double>("origin_offset");
  c.origin_offset.z = r.read<double>("origin_offset");
  if (!(c.q > 0) || !std::isfinite(c.q) || !std::isfinite(c.rho_max))
    fail(ErrorKind::format, "container has invalid step fields");
  for (unsigned i = 0; i < n_parts; ++i) c.thresholds.push_back(r.read<float>("thresholds"));
  for (unsigned i = 0; i < n_parts; ++i) {
    ContainerPart part;
    part.symbol_count = r.read<std::uint64_t>("symbol_count");
    const auto flag = r.read<std::uint8_t>("empty flag");
    if (flag > 1) fail(ErrorKind::corrupt_stream, "invalid empty flag");
    part.empty = flag == 1;
    const auto len = r.read<std::uint64_t>("payload length");
    const auto payload = r.take(len, "payload");
    part.payload.assign(payload.begin(), payload.end());
    if (part.empty != (part.symbol_count == 0))
      fail(ErrorKind::corrupt_stream, "part " + std::to_string(i) +
                                          " empty flag disagrees with symbol count");
    c.parts.push_back(std::move(part));
  }
  c.original_count = r.read<std::uint64_t>("original_count");
  if (r.remaining() != 0)
    fail(ErrorKind::corrupt_stream, "container has " + std::to_string(r.remaining()) +
                                        " trailing bytes");
  return c;
}

QuantSteps Container::base_steps() const {
  return steps_from_header(system, q, rho_max, origin_offset, depth);
}

// --- Pipeline ----------------------------------------------------------------

EncodingPlan plan_encoding(const PointCloud& cloud, const CodecConfig& cfg) {
  validate(cloud);
  if (cloud.empty()) fail(ErrorKind::argument, "cannot encode an empty cloud");
  const double q = resolve_step(cfg, cloud);

  EncodingPlan plan;
  plan.base = derive_steps(cfg.system, q, cloud);
  plan.multilevel = cfg.multilevel;
  for (const Vec3& p : cloud.points)
    plan.partition_rho_max = std::max(plan.partition_rho_max, norm(p));

  const auto clouds = partition_multilevel(cloud, cfg.multilevel, plan.partition_rho_max);
  for (std::size_t n = 0; n < clouds.size(); ++n)
    plan.parts.push_back(quantize(clouds[n], part_steps(plan.base, n)));
  return plan;
}

namespace {

ContainerPart encode_part(const QuantizedCloud& qc) {
  ContainerPart part;
  if (qc.indices.empty()) return part;
  const Octree tree = build(qc);
  AdaptiveContextModel model;
  SymbolEncoder enc(model);
  StreamWalker walker(tree.depth);
  for (const auto& level : tree.levels)
    for (const auto& node : level) {
      enc.encode(walker.next_context(), node.occupancy);
      walker.push(node.occupancy);
    }
  part.empty = false;
  part.symbol_count = tree.node_count();
  part.payload = enc.finish().bytes;
  return part;
}

QuantizedCloud decode_part(const ContainerPart& part, const QuantSteps& steps, std::size_t n) {
  QuantizedCloud qc;
  qc.steps = steps;
  if (part.empty) return qc;

  AdaptiveContextModel model;
  SymbolDecoder dec(part.payload, model);
  StreamWalker walker(steps.depth);
  for (std::uint64_t i = 0; i < part.symbol_count; ++i) {
    if (walker.done())
      fail(ErrorKind::corrupt_stream, "part " + std::to_string(n) +
                                          ": symbol count exceeds octree size at node " +
                                          std::to_string(i));
    walker.push(dec.decode(walker.next_context()));
  }
  if (!walker.done())
    fail(ErrorKind::corrupt_stream, "part " + std::to_string(n) +
                                        ": occupancy stream exhausted at node " +
                                        std::to_string(part.symbol_count));
  qc.indices = walker.leaves();
  qc.original_count = qc.indices.size();
  return qc;
}

template <typename Fn>
auto run_parts(std::size_t n, Fn fn) {
  using Result = decltype(fn(std::size_t{0}));
  std::vector<Result> results;
  results.reserve(n);
  if (n == 1) {
    results.push_back(fn(0));
    return results;
  }
  std::vector<std::future<Result>> jobs;
  for (std::size_t i = 0; i < n; ++i) jobs.push_back(std::async(std::launch::async, fn, i));
  for (auto& job : jobs) results.push_back(job.get());
  return results;
}

}  // namespace

Container encode_plan(const EncodingPlan& plan, std::uint64_t original_count) {
  Container c;
  c.system = plan.base.system;
  c.depth = plan.base.depth;
  c.q = plan.base.q_primary;
  c.rho_max = plan.base.rho_max;
  c.origin_offset = plan.base.origin_offset;
  for (double t : plan.multilevel.thresholds) c.thresholds.push_back(static_cast<float>(t));
  c.parts = run_parts(plan.parts.size(),
                      [&](std::size_t n) { return encode_part(plan.parts[n]); });
  c.original_count = original_count;
  return c;
}

Container encode_cloud(const PointCloud& cloud, const CodecConfig& cfg) {
  return encode_plan(plan_encoding(cloud, cfg), cloud.size());
}

std::vector<QuantizedCloud> decode_parts(const Container& container) {
  const QuantSteps base = container.base_steps();
  return run_parts(container.parts.size(), [&](std::size_t n) {
    return decode_part(container.parts[n], part_steps(base, n), n);
  });
}

PointCloud decode_cloud(const Container& container) {
  PointCloud out;
  for (const auto& qc : decode_parts(container)) {
    const PointCloud part = dequantize(qc);
    out.points.insert(out.points.end(), part.points.begin(), part.points.end());
  }
  return out;
}

double measure_bpp(const Container& container, std::uint64_t original_count) {
  if (original_count == 0) fail(ErrorKind::argument, "bpp needs a positive point count");
  return 8.0 * static_cast<double>(container.byte_size()) / static_cast<double>(original_count);
}

}  // namespace scp
