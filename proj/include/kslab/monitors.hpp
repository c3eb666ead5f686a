#pragma once

#include <array>
#include <optional>
#include <vector>

#include "kslab/model.hpp"
#include "kslab/solver.hpp"

namespace kslab {

/// epsilon lattice {2^k * 1e-3, k = 0..20}.
constexpr std::size_t kEpsilonLatticeSize = 21;
std::array<double, kEpsilonLatticeSize> epsilon_lattice();

/// Normalisation used by the 1e-8 / 1e-6 relative tolerances.
struct MonitorScales {
  double wt = 0.0;   // max |discrete w_t|
  double wr = 0.0;   // max |w_r|
  double gap = 0.0;  // max 1/w = 1/w(R)
};

struct MonitorSample {
  double t = 0.0;
  double mass = 0.0;
  double u0 = 0.0;
  double wr_max = 0.0;
  double wt_min = 0.0;
  double epsilon = 0.0;  // the epsilon used for j_max and estimw_gap
  double j_max = 0.0;
  double k_bound = 0.0;
  double estimw_gap = 0.0;
  double grad_ratio = 0.0;
  double r_half = 0.0;       // NaN before w(0) > 2 w(R)
  double r_half_sq_w = 0.0;  // NaN before w(0) > 2 w(R)

  // Not part of the CSV schema.
  long step_index = 0;
  bool defined = true;  // false when u(0) = 0
  MonitorScales scales;
  double epsilon_crit = 0.0;  // largest epsilon with J <= tol * scale at this sample
  std::array<double, kEpsilonLatticeSize> j_lattice{};
  std::array<double, kEpsilonLatticeSize> gap_lattice{};
  double mass_singularity = 0.0;  // max_r r^n u / mass
  double lower_ratio = 0.0;       // min_r u (1/u(0) + r^2)
  double mass_quadrature = 0.0;   // mass from the reconstructed density
};

/// Tolerance (relative to max |w_r|) behind epsilon_crit.
constexpr double kJTolerance = 1e-8;

/// All per-snapshot monitors. `op` must be built on the state's grid and params.
MonitorSample snapshot_monitors(const State& state, const RadialOperator& op, const Params& params,
                                double epsilon);
MonitorSample snapshot_monitors(const State& state, const Params& params, double epsilon);

struct EpsilonResult {
  double epsilon_star = 0.0;  // largest passing lattice value, 0 if none
  double epsilon_sup = 0.0;   // supremum over all epsilon (min of epsilon_crit)
  int lattice_index = -1;
  std::size_t samples_used = 0;
  bool flagged = false;
};

/// Largest lattice epsilon with J_max(eps) <= tol * scale for every sample with t >= T0.
/// Uses the per-sample critical epsilon, so any increasing lattice may be supplied.
EpsilonResult largest_valid_epsilon(const std::vector<MonitorSample>& samples, double T0,
                                    std::span<const double> lattice);
EpsilonResult largest_valid_epsilon(const std::vector<MonitorSample>& samples, double T0);

struct HalfHeight {
  double r0 = 0.0;
  double r0_sq_w = 0.0;
};

/// Radius where the interpolated w drops to w(0)/2. Empty when w(0) <= 2 w(R).
std::optional<HalfHeight> half_height(const RadialField& w);

struct ProfileFit {
  double p = 0.0;
  double L = 0.0;
  double r_lo = 0.0;
  double r_hi = 0.0;
  double residual = 0.0;
  std::size_t points = 0;
  double band_lo = 0.0;  // min r^2 U on the window
  double band_hi = 0.0;  // max r^2 U on the window
};

/// log U = log L + p log r by least squares over the nodes in [r_lo, r_hi].
/// Throws ConfigError for a bad window and DomainError for nonpositive U.
ProfileFit fit_profile_exponent(const RadialField& U, double r_lo, double r_hi);

/// The frozen-region window [2 r_half, min(0.3 R, 10 r_half)].
std::pair<double, double> profile_window(double r_half, double R);

/// int_{B_delta} u = |S^{n-1}| delta^n w(delta) for each delta.
std::vector<double> concentration_mass(const RadialField& w, int n, std::span<const double> deltas);
std::vector<double> concentration_mass_of_u(const RadialField& u, int n, std::span<const double> deltas);

struct TypeRatio {
  std::vector<std::pair<double, double>> series;  // (t, (T - t) u(0,t))
  double min = 0.0;
  double max = 0.0;
  std::size_t window_points = 0;
};

/// (T_est - t) u(0,t); min/max over the samples with T_est - t <= 10^decades (T_est - t_last).
/// Throws DomainError unless T_est exceeds every trace time.
TypeRatio type_ratio(const BlowupTrace& trace, double T_est, double decades = 2.0);

/// Samples whose time lies in the last `decades` decades of (T_est - t).
std::vector<const MonitorSample*> last_decades(const std::vector<MonitorSample>& samples, double T_est,
                                               double decades = 1.0);

/// Collects monitor samples through RunHooks and keeps the final-profile candidate.
class RunRecorder {
 public:
  RunRecorder(Params params, double epsilon, std::vector<double> deltas = {});

  /// Hook for RunHooks::on_sample.
  void observe(const State& state, const RadialOperator& op);
  RunHooks hooks(int stride);

  const std::vector<MonitorSample>& samples() const { return samples_; }
  std::vector<MonitorSample>& samples() { return samples_; }
  const std::vector<std::vector<double>>& concentration() const { return concentration_; }
  const std::vector<double>& deltas() const { return deltas_; }
  /// Last u-field that was finite and resolved r_half with >= 8 nodes.
  const std::optional<RadialField>& final_profile() const { return final_profile_; }
  double final_profile_t() const { return final_profile_t_; }
  double final_profile_r_half() const { return final_profile_r_half_; }

  /// Reinstate the recorded history (resume from a checkpoint).
  void restore(std::vector<MonitorSample> samples, std::vector<std::vector<double>> concentration,
               std::optional<RadialField> final_profile, double final_t, double final_r_half);

 private:
  Params params_;
  double epsilon_;
  std::vector<double> deltas_;
  std::vector<MonitorSample> samples_;
  std::vector<std::vector<double>> concentration_;
  std::optional<RadialField> final_profile_;
  double final_profile_t_ = 0.0;
  double final_profile_r_half_ = 0.0;
};

/// Per-run summary built from a finished run and its recorder.
struct RunAnalysis {
  std::optional<ProfileFit> profile_fit;
  std::string profile_note;
  EpsilonResult epsilon;
  double mass_drift = 0.0;             // max relative |mass - mass(0)|
  double mass_quadrature_drift = 0.0;  // same, from the reconstructed density
  double wt_min_rel = 0.0;             // min over samples of wt_min / scale
  double wr_max_rel = 0.0;             // max over samples of wr_max / scale
  double mass_singularity_C = 0.0;     // max over samples
  double gap_at_star_min_rel = 0.0;  // min over t >= T0 of estimw_gap(eps*) / scale
  double T0 = 0.0;
  std::optional<TypeRatio> type;
};

/// Summary over the recorded samples. The J and gap columns stay at the configured
/// epsilon; their values at epsilon_star are summarised here from the lattice arrays.
RunAnalysis analyze_run(const RunResult& result, RunRecorder& recorder, const Params& params);

}  // namespace kslab
