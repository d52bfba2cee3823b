// scpc: command-line front end for the scp codec library.
#include <openssl/evp.h>
#include <scp/scp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <glob.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kToolVersion = "1.0.0";

struct CliError : std::runtime_error {
  scp_status status;
  CliError(scp_status s, const std::string& msg) : std::runtime_error(msg), status(s) {}
};

void check(scp_status s) {
  if (s != SCP_OK) throw CliError(s, scp_last_error());
}

[[noreturn]] void usage_error(const std::string& msg) { throw CliError(SCP_ERR_ARGUMENT, msg); }

int exit_code(scp_status s) {
  switch (s) {
    case SCP_OK: return 0;
    case SCP_ERR_IO:
    case SCP_ERR_FORMAT: return 2;
    case SCP_ERR_CORRUPT_STREAM: return 3;
    default: return 1;
  }
}

struct CloudDeleter { void operator()(scp_cloud* c) const { scp_cloud_free(c); } };
struct ContainerDeleter { void operator()(scp_container* c) const { scp_container_free(c); } };
struct ReportDeleter { void operator()(scp_error_report* r) const { scp_error_report_free(r); } };
using Cloud = std::unique_ptr<scp_cloud, CloudDeleter>;
using ContainerPtr = std::unique_ptr<scp_container, ContainerDeleter>;
using Report = std::unique_ptr<scp_error_report, ReportDeleter>;

Cloud read_cloud(const std::string& path) {
  scp_cloud* c = nullptr;
  check(scp_cloud_read(path.c_str(), &c));
  Cloud cloud(c);
  for (size_t i = 0; i < scp_cloud_warning_count(c); ++i)
    std::cerr << "scpc: warning: " << path << ": " << scp_cloud_warning(c, i) << "\n";
  return cloud;
}

ContainerPtr read_container(const std::string& path) {
  scp_container* c = nullptr;
  check(scp_container_read(path.c_str(), &c));
  return ContainerPtr(c);
}

bool is_container_path(const std::string& path) { return fs::path(path).extension() == ".scp"; }

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError(SCP_ERR_IO, "cannot open " + path);
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", digest[i]);
    hex += byte;
  }
  return hex;
}

class Manifest {
 public:
  Manifest(std::string command, std::vector<std::string> argv)
      : command_(std::move(command)), argv_(std::move(argv)) {}

  json config = json::object();

  void input(const std::string& path) { inputs_.push_back({{"path", path}, {"sha256", sha256_file(path)}}); }
  void output(const std::string& path) { outputs_.push_back(path); }

  template <typename Fn>
  auto stage(const std::string& name, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    auto record = [&] {
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
      stages_.push_back({{"stage", name}, {"seconds", dt.count()}});
    };
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      record();
    } else {
      auto r = fn();
      record();
      return r;
    }
  }

  void write(const std::string& path) const {
    json j;
    j["command"] = command_;
    j["argv"] = argv_;
    j["config"] = config;
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    j["versions"] = {{"scpc", kToolVersion}, {"libscp", scp_version()}, {"container_format", 1}};
    j["stages"] = stages_;
    std::ofstream out(path);
    if (!out) throw CliError(SCP_ERR_IO, "cannot write manifest " + path);
    out << j.dump(2) << "\n";
  }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  json inputs_ = json::array();
  json outputs_ = json::array();
  json stages_ = json::array();
};

// ---- shared codec flags -------------------------------------------------------

struct CodecFlags {
  std::string system = "spherical";
  std::optional<int> depth;
  std::optional<double> q;
  std::optional<std::string> convention;
  std::optional<int> parts;
  std::vector<double> thresholds;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--system", system, "cartesian, cylindrical or spherical")
        ->check(CLI::IsMember({"cartesian", "cylindrical", "spherical"}))
        ->capture_default_str();
    cmd->add_option("--depth", depth, "octree depth D");
    cmd->add_option("--q", q, "base quantization step");
    cmd->add_option("--convention", convention, "kitti: q = 400/(2^D-1), ford: q = 2^(18-D), raw")
        ->check(CLI::IsMember({"kitti", "ford", "raw"}));
    cmd->add_option("--parts", parts, "number of radial parts N (default 3)");
    cmd->add_option("--thresholds", thresholds, "t_0..t_{N-1}, comma separated")->delimiter(',');
  }

  scp_codec_config resolve() const {
    scp_codec_config cfg;
    scp_codec_config_default(&cfg);
    if (system == "cartesian") cfg.system = SCP_SYSTEM_CARTESIAN;
    else if (system == "cylindrical") cfg.system = SCP_SYSTEM_CYLINDRICAL;
    else if (system == "spherical") cfg.system = SCP_SYSTEM_SPHERICAL;
    else usage_error("unknown system: " + system);

    if (depth && q) usage_error("--depth and --q are mutually exclusive");
    std::string conv = convention.value_or(q ? "raw" : "kitti");
    cfg.convention = conv == "kitti" ? SCP_CONVENTION_KITTI
                     : conv == "ford" ? SCP_CONVENTION_FORD
                                      : SCP_CONVENTION_RAW;
    cfg.depth = depth.value_or(q ? 0 : (conv == "raw" ? 0 : 12));
    cfg.q = q.value_or(0.0);
    if (conv == "raw" && !depth && !q) usage_error("--convention raw needs --depth or --q");

    int n = parts.value_or(thresholds.empty() ? 3 : static_cast<int>(thresholds.size()));
    if (n < 1 || n > SCP_MAX_PARTS)
      usage_error("--parts must lie in [1, " + std::to_string(SCP_MAX_PARTS) + "]");
    if (!thresholds.empty() && static_cast<int>(thresholds.size()) != n)
      usage_error("--thresholds needs exactly " + std::to_string(n) + " values");
    cfg.n_parts = n;
    for (int i = 0; i < n; ++i)
      cfg.thresholds[i] = thresholds.empty() ? (i == 0 ? 0.0 : std::ldexp(1.0, i - n)) : thresholds[i];
    return cfg;
  }
};

const char* system_name(int32_t s) {
  switch (s) {
    case SCP_SYSTEM_CARTESIAN: return "cartesian";
    case SCP_SYSTEM_CYLINDRICAL: return "cylindrical";
    default: return "spherical";
  }
}

const char* convention_name(int32_t c) {
  switch (c) {
    case SCP_CONVENTION_KITTI: return "kitti";
    case SCP_CONVENTION_FORD: return "ford";
    default: return "raw";
  }
}

json config_json(const scp_codec_config& cfg) {
  json j;
  j["system"] = system_name(cfg.system);
  j["convention"] = convention_name(cfg.convention);
  j["depth"] = cfg.depth ? json(cfg.depth) : json(nullptr);
  j["q"] = cfg.q > 0 ? json(cfg.q) : json(nullptr);
  j["parts"] = cfg.n_parts;
  j["thresholds"] = std::vector<double>(cfg.thresholds, cfg.thresholds + cfg.n_parts);
  return j;
}

// ---- metric flags -----------------------------------------------------------

struct MetricFlags {
  std::optional<double> peak;
  std::string convention = "kitti";
  std::string psnr = "r2";
  std::string cd = "mean-l2";
  int knn = 12;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--peak", peak, "PSNR peak value (default from --peak-convention)");
    cmd->add_option("--peak-convention", convention, "kitti: 59.70, ford: 30000")
        ->check(CLI::IsMember({"kitti", "ford"}))
        ->capture_default_str();
    cmd->add_option("--psnr", psnr, "r2: peak^2 / mse, 3r2: 3 peak^2 / mse")
        ->check(CLI::IsMember({"r2", "3r2"}))
        ->capture_default_str();
    cmd->add_option("--cd", cd, "mean-l2 or mean-squared")
        ->check(CLI::IsMember({"mean-l2", "mean-squared"}))
        ->capture_default_str();
    cmd->add_option("--knn", knn, "neighbours for D2 normal estimation")->capture_default_str();
  }

  scp_metric_config resolve() const {
    scp_metric_config cfg;
    scp_metric_config_default(&cfg);
    cfg.peak = peak.value_or(convention == "ford" ? 30000.0 : 59.70);
    cfg.psnr_convention = psnr == "3r2" ? SCP_PSNR_THREE_R_SQUARED : SCP_PSNR_R_SQUARED;
    cfg.cd_convention = cd == "mean-squared" ? SCP_CD_MEAN_SQUARED : SCP_CD_MEAN_L2;
    cfg.knn_k = knn;
    return cfg;
  }
};

json metric_config_json(const scp_metric_config& cfg) {
  return {{"peak", cfg.peak},
          {"psnr_convention", cfg.psnr_convention == SCP_PSNR_THREE_R_SQUARED ? "3r2" : "r2"},
          {"cd_convention", cfg.cd_convention == SCP_CD_MEAN_SQUARED ? "mean_squared" : "mean_l2"},
          {"knn_k", cfg.knn_k}};
}

std::string format_metrics(const scp_metrics& m, const scp_metric_config& cfg, double rate, bool as_json) {
  size_t needed = 0;
  check(scp_metrics_format(&m, &cfg, rate, as_json, nullptr, 0, &needed));
  std::string text(needed + 1, '\0');
  check(scp_metrics_format(&m, &cfg, rate, as_json, text.data(), text.size(), &needed));
  text.resize(needed);
  return text;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw CliError(SCP_ERR_IO, "cannot write " + path);
  out << text;
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ---- CSV input for bdrate ----------------------------------------------------

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, sep)) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

Table read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliError(SCP_ERR_IO, "cannot open " + path);
  Table t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    if (t.header.empty()) t.header = split(line, ',');
    else t.rows.push_back(split(line, ','));
  }
  if (t.header.empty()) throw CliError(SCP_ERR_FORMAT, path + ": empty CSV");
  return t;
}

size_t column(const Table& t, const std::string& name, const std::string& path) {
  auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) throw CliError(SCP_ERR_FORMAT, path + ": no column '" + name + "'");
  return static_cast<size_t>(it - t.header.begin());
}

double parse_number(const std::string& s, const std::string& path) {
  if (s == "inf" || s == "+inf") return HUGE_VAL;
  if (s == "-inf") return -HUGE_VAL;
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw CliError(SCP_ERR_FORMAT, path + ": not a number: '" + s + "'");
  }
}

struct Curve {
  std::vector<double> rate, distortion;
};

Curve read_curve(const std::string& path, const std::string& rate_col, const std::string& dist_col,
                 const std::vector<std::string>& where) {
  const Table t = read_csv(path);
  const size_t rc = column(t, rate_col, path), dc = column(t, dist_col, path);
  std::vector<std::pair<size_t, std::string>> filters;
  for (const auto& w : where) {
    const auto eq = w.find('=');
    if (eq == std::string::npos) usage_error("--where expects column=value, got " + w);
    filters.emplace_back(column(t, w.substr(0, eq), path), w.substr(eq + 1));
  }
  Curve c;
  for (const auto& row : t.rows) {
    if (row.size() != t.header.size()) throw CliError(SCP_ERR_FORMAT, path + ": ragged row");
    bool keep = std::all_of(filters.begin(), filters.end(),
                            [&](const auto& f) { return row[f.first] == f.second; });
    if (!keep) continue;
    c.rate.push_back(parse_number(row[rc], path));
    c.distortion.push_back(parse_number(row[dc], path));
  }
  return c;
}

// ---- bench ------------------------------------------------------------------

std::vector<std::string> expand_glob(const std::string& pattern) {
  glob_t g{};
  std::vector<std::string> out;
  if (::glob(pattern.c_str(), 0, nullptr, &g) == 0)
    for (size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
  globfree(&g);
  return out;
}

struct BenchRow {
  std::string system;
  int depth = 0, parts = 0;
  double bpp = 0, d1 = 0, d2 = 0, cd = 0;
};

BenchRow bench_one(const std::vector<const scp_cloud*>& clouds, scp_codec_config cfg,
                   const scp_metric_config& mcfg) {
  BenchRow row{system_name(cfg.system), cfg.depth, cfg.n_parts};
  for (const scp_cloud* ref : clouds) {
    scp_container* raw = nullptr;
    check(scp_encode(ref, &cfg, &raw));
    ContainerPtr container(raw);
    scp_cloud* dec = nullptr;
    check(scp_decode(container.get(), &dec));
    Cloud rec(dec);
    double bpp = 0;
    check(scp_measure_bpp(container.get(), scp_cloud_size(ref), &bpp));
    scp_metrics m;
    check(scp_compute_metrics(ref, rec.get(), &mcfg, &m));
    row.bpp += bpp;
    row.d1 += m.d1_db;
    row.d2 += m.d2_db;
    row.cd += m.cd;
  }
  const double n = static_cast<double>(clouds.size());
  row.bpp /= n;
  row.d1 /= n;
  row.d2 /= n;
  row.cd /= n;
  return row;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (const auto& item : split(text, ',')) {
    const auto dots = item.find("..");
    try {
      if (dots == std::string::npos) {
        out.push_back(std::stoi(item));
      } else {
        const int lo = std::stoi(item.substr(0, dots)), hi = std::stoi(item.substr(dots + 2));
        for (int v = lo; v <= hi; ++v) out.push_back(v);
      }
    } catch (const std::exception&) {
      usage_error("bad integer list: " + text);
    }
  }
  return out;
}

std::string default_manifest(const std::string& output, const std::string& command) {
  return output.empty() ? command + ".manifest.json" : output + ".manifest.json";
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Spherical-coordinate octree codec for LiDAR geometry"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));
  std::string manifest_path;
  app.add_option("--manifest", manifest_path,
                 "run manifest path (default: <output>.manifest.json)");

  // encode
  auto* enc = app.add_subcommand("encode", "encode a .bin/.ply cloud into a container");
  std::string enc_in, enc_out;
  CodecFlags enc_flags;
  enc->add_option("input", enc_in)->required();
  enc->add_option("output", enc_out)->required();
  enc_flags.add_to(enc);

  // decode
  auto* dec = app.add_subcommand("decode", "decode a container into PLY voxel centres");
  std::string dec_in, dec_out, dec_format = "binary";
  dec->add_option("input", dec_in)->required();
  dec->add_option("output", dec_out)->required();
  dec->add_option("--format", dec_format, "ascii or binary")
      ->check(CLI::IsMember({"ascii", "binary"}))
      ->capture_default_str();

  // metrics
  auto* met = app.add_subcommand("metrics", "D1/D2 PSNR and Chamfer distance");
  std::string met_ref, met_rec, met_out, met_format = "csv", met_container;
  MetricFlags met_flags;
  met->add_option("ref", met_ref)->required();
  met->add_option("rec", met_rec, "reconstructed cloud or .scp container")->required();
  met->add_option("--container", met_container, "container whose size gives rate_bpp");
  met->add_option("--format", met_format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  met->add_option("-o,--output", met_out, "write the report here instead of stdout");
  met_flags.add_to(met);

  // analyze
  auto* ana = app.add_subcommand("analyze", "empirical reconstruction error against analytic bounds");
  std::string ana_ref, ana_target, ana_out, ana_colormap;
  int ana_bins = 10;
  bool ana_crossover = false;
  CodecFlags ana_flags;
  ana->add_option("ref", ana_ref, "reference cloud");
  ana->add_option("target", ana_target,
                  ".scp container or reconstructed cloud; omitted: run the encoder's quantization");
  ana->add_option("-o,--output", ana_out, "write the JSON report here instead of stdout");
  ana->add_option("--export-colormap", ana_colormap, "write PREFIX.ply and PREFIX.csv");
  ana->add_option("--bins", ana_bins, "histogram bins for --export-colormap")->capture_default_str();
  ana->add_flag("--crossover", ana_crossover, "print radii where the spherical bound is 1x/2x/4x the Cartesian one");
  ana_flags.add_to(ana);

  // bdrate
  auto* bdr = app.add_subcommand("bdrate", "Bjontegaard delta rate between two RD curves");
  std::string bdr_anchor, bdr_test, bdr_rate = "bpp", bdr_dist = "d1_db";
  std::vector<std::string> bdr_where;
  bdr->add_option("anchor", bdr_anchor)->required();
  bdr->add_option("test", bdr_test)->required();
  bdr->add_option("--rate-column", bdr_rate)->capture_default_str();
  bdr->add_option("--distortion-column", bdr_dist)->capture_default_str();
  bdr->add_option("--where", bdr_where, "keep rows with column=value (repeatable)");

  // synth
  auto* syn = app.add_subcommand("synth", "generate a synthetic spinning-LiDAR scan");
  std::string syn_out;
  scp_synth_params sp;
  scp_synth_params_default(&sp);
  syn->add_option("output", syn_out, ".bin or .ply")->required();
  syn->add_option("--beams", sp.beams)->capture_default_str();
  syn->add_option("--points-per-ring", sp.points_per_ring)->capture_default_str();
  syn->add_option("--rho-max", sp.rho_max)->capture_default_str();
  syn->add_option("--range-min", sp.range_min)->capture_default_str();
  syn->add_option("--dropout", sp.dropout)->capture_default_str();
  syn->add_option("--noise", sp.noise_sigma, "range noise sigma")->capture_default_str();
  syn->add_option("--seed", sp.seed)->capture_default_str();

  // bench
  auto* ben = app.add_subcommand("bench", "rate-distortion sweep");
  std::vector<std::string> ben_inputs;
  std::string ben_out, ben_depths = "10..14", ben_parts = "1,3", ben_convention = "kitti";
  std::vector<std::string> ben_systems{"spherical", "cartesian"};
  unsigned ben_jobs = std::max(1u, std::thread::hardware_concurrency());
  MetricFlags ben_metric;
  std::uint64_t ben_seed = 0;
  ben->add_option("--input", ben_inputs, "input glob (repeatable); default: one synthetic scan");
  ben->add_option("-o,--output", ben_out, "CSV path (default stdout)");
  ben->add_option("--depths", ben_depths, "e.g. 10..14 or 10,12")->capture_default_str();
  ben->add_option("--systems", ben_systems)->delimiter(',')->capture_default_str();
  ben->add_option("--parts", ben_parts, "part counts, e.g. 1,3")->capture_default_str();
  ben->add_option("--convention", ben_convention)
      ->check(CLI::IsMember({"kitti", "ford"}))
      ->capture_default_str();
  ben->add_option("--jobs", ben_jobs)->capture_default_str();
  ben->add_option("--seed", ben_seed, "seed of the synthetic scan")->capture_default_str();
  ben_metric.add_to(ben);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  CLI::App* cmd = app.get_subcommands().front();
  Manifest manifest(cmd->get_name(), args);

  try {
    if (cmd == enc) {
      const scp_codec_config cfg = enc_flags.resolve();
      manifest.config = config_json(cfg);
      manifest.input(enc_in);
      Cloud cloud = manifest.stage("read", [&] { return read_cloud(enc_in); });
      ContainerPtr container = manifest.stage("encode", [&] {
        scp_container* c = nullptr;
        check(scp_encode(cloud.get(), &cfg, &c));
        return ContainerPtr(c);
      });
      manifest.stage("write", [&] { check(scp_container_write(container.get(), enc_out.c_str())); });
      manifest.output(enc_out);
      scp_container_info info;
      check(scp_container_info_get(container.get(), &info));
      double bpp = 0;
      check(scp_measure_bpp(container.get(), scp_cloud_size(cloud.get()), &bpp));
      std::printf("points=%zu bytes=%llu bpp=%s q=%s depth=%d parts=%d\n", scp_cloud_size(cloud.get()),
                  static_cast<unsigned long long>(info.byte_size), fmt6(bpp).c_str(),
                  fmt6(info.q).c_str(), info.depth, info.n_parts);
      manifest.write(manifest_path.empty() ? default_manifest(enc_out, "encode") : manifest_path);
    } else if (cmd == dec) {
      manifest.config = {{"format", dec_format}};
      manifest.input(dec_in);
      ContainerPtr container = manifest.stage("read", [&] { return read_container(dec_in); });
      Cloud cloud = manifest.stage("decode", [&] {
        scp_cloud* c = nullptr;
        check(scp_decode(container.get(), &c));
        return Cloud(c);
      });
      manifest.stage("write", [&] {
        check(scp_cloud_write_ply(cloud.get(), dec_out.c_str(), dec_format == "binary"));
      });
      manifest.output(dec_out);
      std::printf("points=%zu\n", scp_cloud_size(cloud.get()));
      manifest.write(manifest_path.empty() ? default_manifest(dec_out, "decode") : manifest_path);
    } else if (cmd == met) {
      const scp_metric_config cfg = met_flags.resolve();
      manifest.config = metric_config_json(cfg);
      manifest.config["format"] = met_format;
      manifest.input(met_ref);
      manifest.input(met_rec);
      Cloud ref = manifest.stage("read", [&] { return read_cloud(met_ref); });
      double rate = std::nan("");
      ContainerPtr container;
      if (is_container_path(met_rec)) container = read_container(met_rec);
      if (!met_container.empty()) {
        manifest.input(met_container);
        container = read_container(met_container);
      }
      if (container) check(scp_measure_bpp(container.get(), scp_cloud_size(ref.get()), &rate));
      Cloud rec = manifest.stage("decode", [&] {
        if (!is_container_path(met_rec)) return read_cloud(met_rec);
        scp_cloud* c = nullptr;
        ContainerPtr own = read_container(met_rec);
        check(scp_decode(own.get(), &c));
        return Cloud(c);
      });
      scp_metrics m;
      manifest.stage("metrics", [&] { check(scp_compute_metrics(ref.get(), rec.get(), &cfg, &m)); });
      const std::string text = format_metrics(m, cfg, rate, met_format == "json");
      if (met_out.empty()) {
        std::fwrite(text.data(), 1, text.size(), stdout);
      } else {
        write_text(met_out, text);
        manifest.output(met_out);
      }
      manifest.write(manifest_path.empty() ? default_manifest(met_out, "metrics") : manifest_path);
    } else if (cmd == ana) {
      if (ana_crossover) {
        const double k[3] = {1, 2, 4};
        double r[3];
        check(scp_crossover_radii(k, 3, r));
        for (int i = 0; i < 3; ++i) std::printf("%gx: rho = %.4f rho_max\n", k[i], r[i]);
        manifest.config = {{"crossover_multipliers", {1, 2, 4}}};
        if (ana_ref.empty()) {
          manifest.write(manifest_path.empty() ? default_manifest(ana_out, "analyze") : manifest_path);
          return 0;
        }
      }
      if (ana_ref.empty()) usage_error("analyze needs a reference cloud");
      manifest.input(ana_ref);
      Cloud ref = manifest.stage("read", [&] { return read_cloud(ana_ref); });
      Report report = manifest.stage("analyze", [&]() -> Report {
        scp_error_report* r = nullptr;
        if (ana_target.empty()) {
          const scp_codec_config cfg = ana_flags.resolve();
          manifest.config = config_json(cfg);
          manifest.config["pairing"] = "pipeline";
          check(scp_analyze_pipeline(ref.get(), &cfg, &r));
        } else if (is_container_path(ana_target)) {
          manifest.input(ana_target);
          ContainerPtr container = read_container(ana_target);
          check(scp_analyze_container(ref.get(), container.get(), &r));
        } else {
          manifest.input(ana_target);
          Cloud rec = read_cloud(ana_target);
          check(scp_analyze_nearest(ref.get(), rec.get(), &r));
        }
        return Report(r);
      });
      const std::string text = std::string(scp_error_report_json(report.get())) + "\n";
      if (ana_out.empty()) {
        std::fwrite(text.data(), 1, text.size(), stdout);
      } else {
        write_text(ana_out, text);
        manifest.output(ana_out);
      }
      if (!ana_colormap.empty()) {
        const std::string ply = ana_colormap + ".ply", csv = ana_colormap + ".csv";
        manifest.stage("colormap", [&] {
          check(scp_error_report_export_colormap(report.get(), ply.c_str(), csv.c_str(), ana_bins));
        });
        manifest.output(ply);
        manifest.output(csv);
      }
      manifest.write(manifest_path.empty() ? default_manifest(ana_out, "analyze") : manifest_path);
    } else if (cmd == bdr) {
      manifest.config = {{"rate_column", bdr_rate}, {"distortion_column", bdr_dist}, {"where", bdr_where}};
      manifest.input(bdr_anchor);
      manifest.input(bdr_test);
      const Curve a = read_curve(bdr_anchor, bdr_rate, bdr_dist, bdr_where);
      const Curve t = read_curve(bdr_test, bdr_rate, bdr_dist, bdr_where);
      double pct = 0;
      manifest.stage("bdrate", [&] {
        check(scp_bd_rate(a.rate.data(), a.distortion.data(), a.rate.size(), t.rate.data(),
                          t.distortion.data(), t.rate.size(), &pct));
      });
      if (std::fabs(pct) < 0.005) pct = 0.0;
      std::printf("%.2f%%\n", pct);
      manifest.write(manifest_path.empty() ? default_manifest("", "bdrate") : manifest_path);
    } else if (cmd == syn) {
      manifest.config = {{"beams", sp.beams},           {"points_per_ring", sp.points_per_ring},
                         {"rho_max", sp.rho_max},       {"range_min", sp.range_min},
                         {"dropout", sp.dropout},       {"noise_sigma", sp.noise_sigma},
                         {"seed", sp.seed}};
      const auto ext = fs::path(syn_out).extension();
      if (ext != ".bin" && ext != ".ply") usage_error("synth output must end in .bin or .ply");
      Cloud cloud = manifest.stage("synth", [&] {
        scp_cloud* c = nullptr;
        check(scp_synth_lidar(&sp, &c));
        return Cloud(c);
      });
      manifest.stage("write", [&] {
        if (ext == ".bin") check(scp_cloud_write_kitti(cloud.get(), syn_out.c_str()));
        else check(scp_cloud_write_ply(cloud.get(), syn_out.c_str(), 1));
      });
      manifest.output(syn_out);
      std::printf("points=%zu\n", scp_cloud_size(cloud.get()));
      manifest.write(manifest_path.empty() ? default_manifest(syn_out, "synth") : manifest_path);
    } else if (cmd == ben) {
      const std::vector<int> depths = parse_int_list(ben_depths);
      const std::vector<int> part_counts = parse_int_list(ben_parts);
      MetricFlags mflags = ben_metric;
      if (!mflags.peak) mflags.convention = ben_convention;
      const scp_metric_config mcfg = mflags.resolve();

      std::vector<Cloud> owned;
      std::vector<std::string> files;
      for (const auto& pattern : ben_inputs) {
        auto matched = expand_glob(pattern);
        if (matched.empty()) throw CliError(SCP_ERR_IO, "no files match " + pattern);
        files.insert(files.end(), matched.begin(), matched.end());
      }
      manifest.stage("read", [&] {
        for (const auto& f : files) {
          manifest.input(f);
          owned.push_back(read_cloud(f));
        }
        if (files.empty()) {
          scp_synth_params p;
          scp_synth_params_default(&p);
          p.seed = ben_seed;
          scp_cloud* c = nullptr;
          check(scp_synth_lidar(&p, &c));
          owned.emplace_back(c);
        }
      });
      std::vector<const scp_cloud*> clouds;
      for (const auto& c : owned) clouds.push_back(c.get());

      std::vector<scp_codec_config> configs;
      for (const auto& system : ben_systems) {
        for (int parts : part_counts) {
          for (int depth : depths) {
            CodecFlags f;
            f.system = system;
            f.depth = depth;
            f.convention = ben_convention;
            f.parts = parts;
            configs.push_back(f.resolve());
          }
        }
      }
      manifest.config = {{"depths", depths},
                         {"systems", ben_systems},
                         {"parts", part_counts},
                         {"convention", ben_convention},
                         {"synthetic_seed", files.empty() ? json(ben_seed) : json(nullptr)},
                         {"metrics", metric_config_json(mcfg)}};

      std::vector<BenchRow> rows(configs.size());
      manifest.stage("sweep", [&] {
        const size_t jobs = std::max<size_t>(1, ben_jobs);
        for (size_t start = 0; start < configs.size(); start += jobs) {
          std::vector<std::future<BenchRow>> batch;
          for (size_t i = start; i < std::min(configs.size(), start + jobs); ++i)
            batch.push_back(std::async(std::launch::async, bench_one, std::cref(clouds), configs[i],
                                       std::cref(mcfg)));
          for (size_t i = 0; i < batch.size(); ++i) rows[start + i] = batch[i].get();
        }
      });

      std::ostringstream csv;
      csv << "system,depth,parts,bpp,d1_db,d2_db,cd\n";
      for (const auto& r : rows)
        csv << r.system << ',' << r.depth << ',' << r.parts << ',' << fmt6(r.bpp) << ','
            << fmt6(r.d1) << ',' << fmt6(r.d2) << ',' << fmt6(r.cd) << '\n';
      if (ben_out.empty()) {
        std::cout << csv.str();
      } else {
        write_text(ben_out, csv.str());
        manifest.output(ben_out);
      }
      manifest.write(manifest_path.empty() ? default_manifest(ben_out, "bench") : manifest_path);
    }
  } catch (const CliError& e) {
    std::cerr << "scpc: error: " << e.what() << "\n";
    return exit_code(e.status);
  } catch (const std::exception& e) {
    std::cerr << "scpc: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
