#include "kslab/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "kslab/config.hpp"
#include "kslab/errors.hpp"

namespace kslab {

namespace fs = std::filesystem;
using nlohmann::json;

void atomic_write(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

std::string monitors_csv(const std::vector<MonitorSample>& samples) {
  std::string out = kMonitorHeader;
  out += '\n';
  for (const auto& s : samples) {
    const double row[] = {s.t,          s.mass,     s.u0,         s.wr_max, s.wt_min,      s.j_max,
                          s.k_bound,    s.estimw_gap, s.grad_ratio, s.r_half, s.r_half_sq_w};
    for (std::size_t i = 0; i < std::size(row); ++i) {
      if (i) out += ',';
      out += format_double(row[i]);
    }
    out += '\n';
  }
  return out;
}

std::string concentration_csv(const std::vector<MonitorSample>& samples, const std::vector<double>& deltas,
                              const std::vector<std::vector<double>>& masses) {
  std::string out = "t";
  for (double d : deltas) out += ",m_" + format_double(d);
  out += '\n';
  for (std::size_t k = 0; k < masses.size() && k < samples.size(); ++k) {
    out += format_double(samples[k].t);
    for (double m : masses[k]) out += "," + format_double(m);
    out += '\n';
  }
  return out;
}

std::string profile_csv(const RadialField& U) {
  std::string out = "r,U\n";
  const auto& g = U.grid();
  for (std::size_t i = 0; i < g.size(); ++i) out += format_double(g[i]) + "," + format_double(U[i]) + "\n";
  return out;
}

std::string selfsimilar_csv(const ProfileSolution& p) {
  std::string out = "rho,V\n";
  for (std::size_t i = 0; i < p.rho.size(); ++i) out += format_double(p.rho[i]) + "," + format_double(p.V[i]) + "\n";
  return out;
}

std::pair<std::string, std::vector<std::vector<double>>> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string header, line;
  std::getline(in, header);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
    rows.push_back(std::move(row));
  }
  return {header, rows};
}

std::string hex_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", x);
  return buf;
}

double parse_hex_double(const std::string& s) {
  char* end = nullptr;
  const double x = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw ConfigError("checkpoint: bad number \"" + s + "\"");
  return x;
}

namespace {

json hex_array(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(hex_double(x));
  return a;
}

std::vector<double> from_hex_array(const json& a) {
  std::vector<double> v;
  v.reserve(a.size());
  for (const auto& x : a) v.push_back(parse_hex_double(x.get<std::string>()));
  return v;
}

std::vector<double> flatten(const MonitorSample& s) {
  std::vector<double> v = {s.t,          s.mass,         s.u0,         s.wr_max,    s.wt_min,
                           s.epsilon,    s.j_max,        s.k_bound,    s.estimw_gap, s.grad_ratio,
                           s.r_half,     s.r_half_sq_w,  static_cast<double>(s.step_index),
                           s.defined ? 1.0 : 0.0,        s.scales.wt,  s.scales.wr, s.scales.gap,
                           s.epsilon_crit, s.mass_singularity, s.lower_ratio, s.mass_quadrature};
  v.insert(v.end(), s.j_lattice.begin(), s.j_lattice.end());
  v.insert(v.end(), s.gap_lattice.begin(), s.gap_lattice.end());
  return v;
}

}  // namespace

json sample_to_json(const MonitorSample& s) { return hex_array(flatten(s)); }

MonitorSample sample_from_json(const json& j) {
  const auto v = from_hex_array(j);
  if (v.size() != 21 + 2 * kEpsilonLatticeSize) throw ConfigError("checkpoint: bad monitor sample record");
  MonitorSample s;
  std::size_t k = 0;
  for (double* f : {&s.t, &s.mass, &s.u0, &s.wr_max, &s.wt_min, &s.epsilon, &s.j_max, &s.k_bound, &s.estimw_gap,
                    &s.grad_ratio, &s.r_half, &s.r_half_sq_w})
    *f = v[k++];
  s.step_index = static_cast<long>(v[k++]);
  s.defined = v[k++] != 0.0;
  for (double* f : {&s.scales.wt, &s.scales.wr, &s.scales.gap, &s.epsilon_crit, &s.mass_singularity, &s.lower_ratio,
                    &s.mass_quadrature})
    *f = v[k++];
  for (auto& x : s.j_lattice) x = v[k++];
  for (auto& x : s.gap_lattice) x = v[k++];
  return s;
}

json checkpoint_to_json(const Checkpoint& c) {
  json j;
  j["format"] = "kslab-checkpoint";
  j["version"] = kCheckpointVersion;
  j["config_hash"] = c.config_hash;
  j["config"] = c.config;
  j["t"] = hex_double(c.t);
  j["step_index"] = c.step_index;
  j["u0_mass"] = hex_double(c.u0_mass);
  j["w"] = hex_array(c.w);
  j["trace_t"] = hex_array(c.trace.t);
  j["trace_u0"] = hex_array(c.trace.u0);
  j["boundary_activity"] = hex_double(c.boundary_activity);
  json samples = json::array();
  for (const auto& s : c.samples) samples.push_back(sample_to_json(s));
  j["samples"] = std::move(samples);
  json conc = json::array();
  for (const auto& row : c.concentration) conc.push_back(hex_array(row));
  j["concentration"] = std::move(conc);
  if (c.final_profile) {
    j["final_profile"] = {{"t", hex_double(c.final_profile_t)},
                          {"r_half", hex_double(c.final_profile_r_half)},
                          {"u", hex_array(*c.final_profile)}};
  }
  return j;
}

Checkpoint checkpoint_from_json(const json& j) {
  try {
    if (j.at("format") != "kslab-checkpoint") throw ConfigError("checkpoint: not a kslab checkpoint");
    if (j.at("version") != kCheckpointVersion) throw ConfigError("checkpoint: unsupported version");
    Checkpoint c;
    c.config_hash = j.at("config_hash").get<std::string>();
    c.config = j.at("config");
    c.t = parse_hex_double(j.at("t").get<std::string>());
    c.step_index = j.at("step_index").get<long>();
    c.u0_mass = parse_hex_double(j.at("u0_mass").get<std::string>());
    c.w = from_hex_array(j.at("w"));
    c.trace.t = from_hex_array(j.at("trace_t"));
    c.trace.u0 = from_hex_array(j.at("trace_u0"));
    c.boundary_activity = parse_hex_double(j.at("boundary_activity").get<std::string>());
    for (const auto& s : j.at("samples")) c.samples.push_back(sample_from_json(s));
    for (const auto& row : j.at("concentration")) c.concentration.push_back(from_hex_array(row));
    if (j.contains("final_profile")) {
      const auto& f = j.at("final_profile");
      c.final_profile = from_hex_array(f.at("u"));
      c.final_profile_t = parse_hex_double(f.at("t").get<std::string>());
      c.final_profile_r_half = parse_hex_double(f.at("r_half").get<std::string>());
    }
    if (c.trace.t.size() != c.trace.u0.size() || c.trace.t.empty())
      throw ConfigError("checkpoint: inconsistent trace");
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint: malformed record: ") + e.what());
  }
}

void save_checkpoint(const fs::path& path, const Checkpoint& c) { atomic_write(path, checkpoint_to_json(c).dump()); }

Checkpoint load_checkpoint(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("checkpoint: malformed JSON in " + path.string());
  }
  return checkpoint_from_json(j);
}

bool verify_report_hash(const json& report) {
  if (!report.contains("config") || !report.contains("config_hash")) return false;
  return config_hash(report.at("config")) == report.at("config_hash").get<std::string>();
}

}  // namespace kslab
