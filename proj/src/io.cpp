#include "scp/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "bytes.hpp"
#include "scp/error.hpp"

namespace scp {

void validate(const PointCloud& cloud) {
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Vec3& p = cloud.points[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
      fail(ErrorKind::argument,
           "non-finite coordinate at point " + std::to_string(i));
  }
  if (cloud.attr && cloud.attr->size() != cloud.points.size())
    fail(ErrorKind::argument, "attribute count does not match point count");
}

namespace detail {

std::vector<std::uint8_t> read_file(const char* path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    fail(ErrorKind::io, std::string("cannot open ") + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad())
    fail(ErrorKind::io, std::string("read failed: ") + path);
  return bytes;
}

}  // namespace detail

namespace {

constexpr std::size_t kKittiRecord = 16;

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    fail(ErrorKind::io, "cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

PointCloud read_kitti_bin(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path.c_str());
  if (bytes.size() % kKittiRecord != 0) {
    const std::size_t offset = bytes.size() - bytes.size() % kKittiRecord;
    fail(ErrorKind::format, "truncated KITTI record at byte offset " +
                                std::to_string(offset));
  }

  const std::size_t n = bytes.size() / kKittiRecord;
  PointCloud cloud;
  cloud.points.reserve(n);
  std::vector<double> attr;
  attr.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* rec = bytes.data() + i * kKittiRecord;
    float v[4];
    for (int k = 0; k < 4; ++k) {
      v[k] = detail::load_le<float>(rec + 4 * k);
      if (!std::isfinite(v[k]))
        fail(ErrorKind::format,
             "non-finite value in KITTI record " + std::to_string(i));
    }
    cloud.points.push_back({v[0], v[1], v[2]});
    attr.push_back(v[3]);
  }
  cloud.attr = std::move(attr);
  return cloud;
}

void write_kitti_bin(const PointCloud& cloud, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(cloud.size() * kKittiRecord);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    detail::append_le(bytes, static_cast<float>(p.x));
    detail::append_le(bytes, static_cast<float>(p.y));
    detail::append_le(bytes, static_cast<float>(p.z));
    detail::append_le(bytes, cloud.attr ? static_cast<float>((*cloud.attr)[i]) : 0.0f);
  }
  auto out = open_output(path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out)
    fail(ErrorKind::io, "write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// PLY

namespace {

enum class PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

std::optional<PlyType> parse_ply_type(const std::string& name) {
  if (name == "char" || name == "int8") return PlyType::i8;
  if (name == "uchar" || name == "uint8") return PlyType::u8;
  if (name == "short" || name == "int16") return PlyType::i16;
  if (name == "ushort" || name == "uint16") return PlyType::u16;
  if (name == "int" || name == "int32") return PlyType::i32;
  if (name == "uint" || name == "uint32") return PlyType::u32;
  if (name == "float" || name == "float32") return PlyType::f32;
  if (name == "double" || name == "float64") return PlyType::f64;
  return std::nullopt;
}

std::size_t ply_type_size(PlyType t) {
  switch (t) {
    case PlyType::i8: case PlyType::u8: return 1;
    case PlyType::i16: case PlyType::u16: return 2;
    case PlyType::i32: case PlyType::u32: case PlyType::f32: return 4;
    case PlyType::f64: return 8;
  }
  return 0;
}

double load_ply_value(PlyType t, const std::uint8_t* p) {
  switch (t) {
    case PlyType::i8: return static_cast<std::int8_t>(*p);
    case PlyType::u8: return *p;
    case PlyType::i16: return detail::load_le<std::int16_t>(p);
    case PlyType::u16: return detail::load_le<std::uint16_t>(p);
    case PlyType::i32: return detail::load_le<std::int32_t>(p);
    case PlyType::u32: return detail::load_le<std::uint32_t>(p);
    case PlyType::f32: return detail::load_le<float>(p);
    case PlyType::f64: return detail::load_le<double>(p);
  }
  return 0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::f32;
  bool is_list = false;
  PlyType count_type = PlyType::u8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

struct PlyHeader {
  bool binary = false;
  std::vector<PlyElement> elements;
  std::size_t body_offset = 0;
};

PlyHeader parse_ply_header(const std::vector<std::uint8_t>& bytes) {
  PlyHeader header;
  std::size_t pos = 0;
  auto next_line = [&]() -> std::optional<std::string> {
    if (pos >= bytes.size()) return std::nullopt;
    std::size_t end = pos;
    while (end < bytes.size() && bytes[end] != '\n') ++end;
    std::string line(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                     bytes.begin() + static_cast<std::ptrdiff_t>(end));
    pos = end < bytes.size() ? end + 1 : end;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  auto magic = next_line();
  if (!magic || *magic != "ply")
    fail(ErrorKind::format, "not a PLY file (missing 'ply' magic)");

  bool have_format = false;
  for (;;) {
    auto line = next_line();
    if (!line)
      fail(ErrorKind::format, "PLY header not terminated by end_header");
    std::istringstream ss(*line);
    std::string keyword;
    ss >> keyword;
    if (keyword.empty() || keyword == "comment" || keyword == "obj_info")
      continue;
    if (keyword == "end_header") break;
    if (keyword == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt == "ascii")
        header.binary = false;
      else if (fmt == "binary_little_endian")
        header.binary = true;
      else
        fail(ErrorKind::format, "unsupported PLY format '" + fmt + "'");
      have_format = true;
    } else if (keyword == "element") {
      PlyElement el;
      ss >> el.name >> el.count;
      if (!ss)
        fail(ErrorKind::format, "malformed PLY element line: " + *line);
      header.elements.push_back(std::move(el));
    } else if (keyword == "property") {
      if (header.elements.empty())
        fail(ErrorKind::format, "PLY property before any element");
      PlyProperty prop;
      std::string type_name;
      ss >> type_name;
      if (type_name == "list") {
        std::string count_name, item_name;
        ss >> count_name >> item_name >> prop.name;
        auto ct = parse_ply_type(count_name);
        auto it = parse_ply_type(item_name);
        if (!ct || !it)
          fail(ErrorKind::format, "unknown PLY list type in: " + *line);
        prop.is_list = true;
        prop.count_type = *ct;
        prop.type = *it;
      } else {
        auto t = parse_ply_type(type_name);
        if (!t)
          fail(ErrorKind::format, "unknown PLY property type '" + type_name + "'");
        prop.type = *t;
        ss >> prop.name;
      }
      header.elements.back().properties.push_back(std::move(prop));
    } else {
      fail(ErrorKind::format, "unexpected PLY header keyword '" + keyword + "'");
    }
  }
  if (!have_format)
    fail(ErrorKind::format, "PLY header has no format line");
  header.body_offset = pos;
  return header;
}

}  // namespace

PointCloud read_ply(const std::filesystem::path& path,
                    std::vector<std::string>* warnings) {
  const auto bytes = detail::read_file(path.c_str());
  const PlyHeader header = parse_ply_header(bytes);
  auto warn = [&](const std::string& msg) {
    if (warnings) warnings->push_back(msg);
  };

  const PlyElement* vertex = nullptr;
  for (const auto& el : header.elements)
    if (el.name == "vertex") vertex = &el;
  if (!vertex)
    fail(ErrorKind::format, "PLY file has no vertex element");

  int slot_x = -1, slot_y = -1, slot_z = -1, slot_attr = -1;
  for (std::size_t i = 0; i < vertex->properties.size(); ++i) {
    const auto& prop = vertex->properties[i];
    if (prop.is_list)
      fail(ErrorKind::format,
           "unsupported list property '" + prop.name + "' on vertex element");
    const int slot = static_cast<int>(i);
    if (prop.name == "x") slot_x = slot;
    else if (prop.name == "y") slot_y = slot;
    else if (prop.name == "z") slot_z = slot;
    else if (slot_attr < 0) slot_attr = slot;
    else warn("ignoring extra vertex property '" + prop.name + "'");
  }
  if (slot_x < 0) fail(ErrorKind::format, "missing property x");
  if (slot_y < 0) fail(ErrorKind::format, "missing property y");
  if (slot_z < 0) fail(ErrorKind::format, "missing property z");
  for (const auto& el : header.elements)
    if (&el != vertex && el.count > 0)
      warn("ignoring PLY element '" + el.name + "' (" + std::to_string(el.count) + " items)");

  PointCloud cloud;
  cloud.points.reserve(vertex->count);
  std::vector<double> attr;
  if (slot_attr >= 0) attr.reserve(vertex->count);
  std::vector<double> row(vertex->properties.size());

  auto store_row = [&](std::size_t index) {
    const Vec3 p{row[static_cast<std::size_t>(slot_x)],
                 row[static_cast<std::size_t>(slot_y)],
                 row[static_cast<std::size_t>(slot_z)]};
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
      fail(ErrorKind::format, "non-finite coordinate at vertex " + std::to_string(index));
    cloud.points.push_back(p);
    if (slot_attr >= 0) attr.push_back(row[static_cast<std::size_t>(slot_attr)]);
  };

  if (header.binary) {
    std::size_t pos = header.body_offset;
    auto need = [&](std::size_t n) {
      if (pos + n > bytes.size())
        fail(ErrorKind::format, "PLY body truncated at byte offset " + std::to_string(pos));
    };
    for (const auto& el : header.elements) {
      const bool is_vertex = &el == vertex;
      for (std::size_t i = 0; i < el.count; ++i) {
        for (std::size_t k = 0; k < el.properties.size(); ++k) {
          const auto& prop = el.properties[k];
          if (prop.is_list) {
            need(ply_type_size(prop.count_type));
            const auto n = static_cast<std::size_t>(
                load_ply_value(prop.count_type, bytes.data() + pos));
            pos += ply_type_size(prop.count_type);
            need(n * ply_type_size(prop.type));
            pos += n * ply_type_size(prop.type);
            continue;
          }
          const std::size_t sz = ply_type_size(prop.type);
          need(sz);
          if (is_vertex) row[k] = load_ply_value(prop.type, bytes.data() + pos);
          pos += sz;
        }
        if (is_vertex) store_row(i);
      }
      if (is_vertex) break;  // trailing elements are never needed
    }
  } else {
    std::string body(bytes.begin() + static_cast<std::ptrdiff_t>(header.body_offset),
                     bytes.end());
    std::istringstream in(body);
    std::string line;
    for (const auto& el : header.elements) {
      const bool is_vertex = &el == vertex;
      for (std::size_t i = 0; i < el.count; ++i) {
        if (!std::getline(in, line))
          fail(ErrorKind::format, "PLY body ends early in element '" + el.name + "'");
        if (!is_vertex) continue;
        std::istringstream ls(line);
        for (std::size_t k = 0; k < el.properties.size(); ++k) {
          std::string token;
          if (!(ls >> token))
            fail(ErrorKind::format, "too few values on vertex " + std::to_string(i));
          try {
            row[k] = std::stod(token);
          } catch (const std::exception&) {
            fail(ErrorKind::format, "bad number '" + token + "' on vertex " + std::to_string(i));
          }
        }
        store_row(i);
      }
      if (is_vertex) break;
    }
  }

  if (slot_attr >= 0) cloud.attr = std::move(attr);
  return cloud;
}

void write_ply(const PointCloud& cloud, const std::filesystem::path& path,
               PlyFormat format, const std::string& attr_name) {
  validate(cloud);
  std::ostringstream head;
  head << "ply\n"
       << "format " << (format == PlyFormat::ascii ? "ascii" : "binary_little_endian")
       << " 1.0\n"
       << "element vertex " << cloud.size() << "\n"
       << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.attr) head << "property double " << attr_name << "\n";
  head << "end_header\n";

  auto out = open_output(path);
  const std::string h = head.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));

  if (format == PlyFormat::ascii) {
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Vec3& p = cloud.points[i];
      out << p.x << ' ' << p.y << ' ' << p.z;
      if (cloud.attr) out << ' ' << (*cloud.attr)[i];
      out << '\n';
    }
  } else {
    std::vector<std::uint8_t> body;
    body.reserve(cloud.size() * (cloud.attr ? 32 : 24));
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Vec3& p = cloud.points[i];
      detail::append_le(body, p.x);
      detail::append_le(body, p.y);
      detail::append_le(body, p.z);
      if (cloud.attr) detail::append_le(body, (*cloud.attr)[i]);
    }
    out.write(reinterpret_cast<const char*>(body.data()),
              static_cast<std::streamsize>(body.size()));
  }
  if (!out)
    fail(ErrorKind::io, "write failed: " + path.string());
}

PointCloud read_cloud(const std::filesystem::path& path,
                      std::vector<std::string>* warnings) {
  const auto ext = path.extension().string();
  if (ext == ".bin") return read_kitti_bin(path);
  if (ext == ".ply") return read_ply(path, warnings);
  fail(ErrorKind::format, "unrecognised point cloud extension '" + ext + "'");
}

// ---------------------------------------------------------------------------

PointCloud synth_lidar(const SynthParams& params) {
  if (params.beams < 1 || params.points_per_ring < 1)
    fail(ErrorKind::argument, "synth_lidar: beams and points_per_ring must be >= 1");
  if (!(params.rho_max > 0))
    fail(ErrorKind::argument, "synth_lidar: rho_max must be positive");
  if (!(params.noise_sigma >= 0))
    fail(ErrorKind::argument, "synth_lidar: noise_sigma must be >= 0");
  if (!(params.dropout >= 0 && params.dropout < 1))
    fail(ErrorKind::argument, "synth_lidar: dropout must lie in [0, 1)");
  if (!(params.range_min >= 0 && params.range_min <= params.rho_max))
    fail(ErrorKind::argument, "synth_lidar: range_min must lie in [0, rho_max]");

  constexpr double kDeg = std::numbers::pi / 180.0;
  constexpr double kLowElevation = -25.0 * kDeg;
  constexpr double kHighElevation = 3.0 * kDeg;

  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  PointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(params.beams) *
                       static_cast<std::size_t>(params.points_per_ring));
  for (int b = 0; b < params.beams; ++b) {
    const double elevation =
        params.beams == 1
            ? kLowElevation
            : kLowElevation + (kHighElevation - kLowElevation) * b / (params.beams - 1);
    for (int j = 0; j < params.points_per_ring; ++j) {
      const double azimuth = 2.0 * std::numbers::pi * j / params.points_per_ring;
      // Draw every variate even for dropped points so the stream of random
      // numbers does not depend on dropout.
      const double u = unit(rng);
      const double noise = std::clamp(gauss(rng), -3.0, 3.0) * params.noise_sigma;
      const bool dropped = unit(rng) < params.dropout;
      if (dropped) continue;

      double range = params.rho_max - (params.rho_max - params.range_min) * u;
      range = std::clamp(range + noise, 0.0, params.rho_max);
      if (range <= 0) range = std::min(params.rho_max, 1e-6 * params.rho_max);

      const double ce = std::cos(elevation);
      cloud.points.push_back({range * ce * std::cos(azimuth),
                              range * ce * std::sin(azimuth),
                              range * std::sin(elevation)});
    }
  }
  return cloud;
}

}  // namespace scp
