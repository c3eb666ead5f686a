#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "kslab/monitors.hpp"
#include "kslab/selfsimilar.hpp"
#include "kslab/solver.hpp"

namespace kslab {

inline constexpr const char* kMonitorHeader =
    "t,mass,u0,wr_max,wt_min,j_max,k_bound,estimw_gap,grad_ratio,r_half,r_half_sq_w";
inline constexpr int kCsvSchemaVersion = 1;
inline constexpr int kReportSchemaVersion = 1;
inline constexpr int kCheckpointVersion = 1;

/// Write to a sibling temporary file, then rename over the target.
void atomic_write(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

/// Shortest round-trip decimal; "nan", "inf", "-inf" for non-finite values.
std::string format_double(double x);

std::string monitors_csv(const std::vector<MonitorSample>& samples);
std::string concentration_csv(const std::vector<MonitorSample>& samples, const std::vector<double>& deltas,
                              const std::vector<std::vector<double>>& masses);
std::string profile_csv(const RadialField& U);
std::string selfsimilar_csv(const ProfileSolution& profile);

/// Parse a CSV written by monitors_csv back into (header, rows).
std::pair<std::string, std::vector<std::vector<double>>> parse_csv(const std::string& text);

/// Exact hexadecimal float encoding used by checkpoints.
std::string hex_double(double x);
double parse_hex_double(const std::string& s);

nlohmann::json sample_to_json(const MonitorSample& s);
MonitorSample sample_from_json(const nlohmann::json& j);

struct Checkpoint {
  std::string config_hash;
  nlohmann::json config;
  double t = 0.0;
  long step_index = 0;
  double u0_mass = 0.0;
  std::vector<double> w;
  BlowupTrace trace;
  double boundary_activity = 0.0;
  std::vector<MonitorSample> samples;
  std::vector<std::vector<double>> concentration;
  std::optional<std::vector<double>> final_profile;
  double final_profile_t = 0.0;
  double final_profile_r_half = 0.0;
};

nlohmann::json checkpoint_to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
/// Throws ConfigError on a malformed or foreign file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// True when report["config_hash"] matches the hash of report["config"].
bool verify_report_hash(const nlohmann::json& report);

}  // namespace kslab
