#pragma once

#include <string>
#include <utility>
#include <vector>

#include "kslab/model.hpp"

namespace kslab {

/// phi'' from  phi'' + [(n+1)/rho - rho/2] phi' - phi + n (phi + rho phi'/n) phi = 0,
/// the profile equation of w = (T-t)^{-1} phi(r / sqrt(T-t)) with mu_tilde = 0.
/// At rho = 0 the symmetric limit phi''(0) = (phi - n phi^2)/(n+2) is used.
double profile_rhs(double rho, double phi, double dphi, int n);

enum class Classification { Decaying, Homogeneous, Crossing, Diverging };
std::string classification_name(Classification c);

struct ShootOptions {
  double rho_max = 50.0;
  double abs_tol = 1e-13;
  double rel_tol = 1e-13;
  double bound = 1e6;             // |phi| or |phi'| above this is divergence
  double homogeneous_tol = 1e-12; // relative distance of alpha from 1/n
  double plateau_tol = 0.05;      // relative variation of rho^2 phi over the last decade
  double sample_step = 0.01;      // spacing of the stored trajectory
};

/// A profile on a rho grid. V = rho phi' + n phi is the density profile.
struct ProfileSolution {
  int n = 3;
  double alpha = 0.0;
  Classification classification = Classification::Diverging;
  std::vector<double> rho, phi, dphi, V, dV;
  double ell = 0.0;                // lim rho^2 phi (Decaying only)
  double L = 0.0;                  // lim rho^2 V  (Decaying only)
  double plateau_variation = 0.0;  // of rho^2 phi over the last decade of rho
  double rho_reached = 0.0;        // where the forward shot stopped
  double bracket_width = 0.0;      // find_profile only
  double match_rho = 0.0;          // find_profile: where the tail was joined
  double match_slope_error = 0.0;  // relative phi' jump at match_rho
  std::string diagnostics;

  double rho_max() const { return rho.empty() ? 0.0 : rho.back(); }
  /// Cubic Hermite interpolation; throws DomainError outside [0, rho_max].
  double phi_at(double r) const;
  double V_at(double r) const;
};

/// Integrate from phi(0) = alpha, phi'(0) = 0 to rho_max and classify the trajectory.
/// A trajectory that turns upward (phi' > 0 for rho > 0) has left the decaying
/// manifold and is classified Diverging.
ProfileSolution shoot(double alpha, int n, const ShootOptions& options = {});

/// Classifications of alphas spread logarithmically over the bracket, shot concurrently.
std::vector<std::pair<double, Classification>> scan_alpha(std::pair<double, double> bracket, int n,
                                                          int count, const ShootOptions& options = {});

struct ProfileSearchOptions {
  ShootOptions shoot;
  int max_bisections = 60;
  double tail_rho_max = 200.0;
  double tail_step = 0.05;
  double match_tol = 1e-9;
  double min_match_rho = 2.0;
};

struct ProfileSearch {
  bool found = false;
  ProfileSolution solution;
  std::string message;
  std::vector<std::pair<double, Classification>> log;  // every classified shot
};

/// Bisection on alpha between two shots of different classification, then a tail
/// obtained by integrating inward from tail_rho_max along phi ~ ell rho^-2 + c rho^-4
/// and matching phi at the last radius where the two bracketing shots still agree.
/// Throws ConfigError when both ends classify the same way.
ProfileSearch find_profile(std::pair<double, double> bracket, int n, const ProfileSearchOptions& options = {});

/// Scan the bracket for the first classification change, then find_profile on it.
/// Reports found = false (no throw) when the scan sees no change.
ProfileSearch search_profile(std::pair<double, double> bracket, int n, int scan_points = 48,
                             const ProfileSearchOptions& options = {});

/// Default bracket for the search: [1.1/n, 10].
std::pair<double, double> default_bracket(int n);

/// u0(r) = V(r / sqrt(T0)) / T0 on the grid. Throws DomainError when the grid reaches
/// past the computed rho range and ConfigError unless the profile is Decaying and T0 > 0.
RadialField seed_pde_from_profile(const ProfileSolution& profile, double T0, const GridPtr& grid);

}  // namespace kslab
