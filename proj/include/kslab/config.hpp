#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "kslab/initial_data.hpp"
#include "kslab/model.hpp"
#include "kslab/solver.hpp"

namespace kslab {

enum class CriterionChoice { Eigenvalue, Kaplan, None };

struct GridConfig {
  int N = 2048;
  double grading = 2.0;
};

struct MonitorConfig {
  int stride = 10;
  double epsilon = 1e-3;
  std::vector<double> deltas;
  int checkpoint_stride = 1000;  // 0 keeps only the final checkpoint
};

struct SeedConfig {
  double T0 = 1.0;
  std::optional<std::pair<double, double>> bracket;
};

struct SweepConfig {
  std::vector<double> lambda;
  std::vector<int> n;
  int threads = 0;  // 0 = hardware concurrency
};

struct SelfSimilarConfig {
  std::optional<std::pair<double, double>> bracket;  // absent: scan the default bracket
  double rho_max = 200.0;
  int scan_points = 48;
  bool expect_failure = false;
};

struct RunConfig {
  int n = 3;
  Domain domain = Ball{};
  FarField far_field = FarField::Pin;
  std::optional<Family> family;
  double lambda = 0.0;
  std::optional<SeedConfig> seed;
  CriterionChoice criterion = CriterionChoice::Eigenvalue;
  GridConfig grid;
  StepperConfig stepper;
  MonitorConfig monitor;
  std::optional<SweepConfig> sweep;
  SelfSimilarConfig selfsimilar;
  std::string out;

  nlohmann::json echo;  // normalised config with defaults applied (no output directory)
  std::string hash;     // config_hash(echo)

  /// Throws ConfigError unless the config describes initial data to simulate.
  void require_simulation() const;
  InitialSpec initial_spec() const;
};

std::string criterion_name(CriterionChoice c);

/// Parse and validate a JSON config. Unknown keys, wrong types and out-of-range values
/// raise ConfigError with a path-qualified message such as "stepper.cfl: ...".
RunConfig parse_config(const std::string& text);
RunConfig config_from_json(const nlohmann::json& j);

/// FNV-1a 64 over the compact dump of the normalised config, as 16 hex digits.
std::string config_hash(const nlohmann::json& echo);

/// The same config with one sweep cell's values substituted (sweep block removed).
RunConfig sweep_cell(const RunConfig& base, int n, std::optional<double> lambda);

}  // namespace kslab
