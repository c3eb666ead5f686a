#pragma once

#include <string>
#include <variant>
#include <vector>

#include "kslab/model.hpp"

namespace kslab {

/// lambda * (a + cos(pi r / R)), a >= 1. Ball only.
struct CosineCap {
  double a = 2.0;
};
/// lambda * (1 + (1 - (r/R)^2)^2). Ball only.
struct QuarticCap {};
/// lambda * exp(-(r / width)^2). Whole space only.
struct Gaussian {
  double width = 1.0;
};
/// lambda on [0, core], then a C^1 cosine ramp down to lambda/2 at r = R. Ball only.
struct Plateau {
  double core = 0.5;
};
/// lambda everywhere (homogeneous oracle; rejected by validate_i0).
struct Constant {};

using Family = std::variant<CosineCap, QuarticCap, Gaussian, Plateau, Constant>;

std::string family_name(const Family& family);

struct InitialSpec {
  Family family = CosineCap{};
  double lambda = 1.0;
  Domain domain = Ball{};
};

/// u0 on the grid. Throws ConfigError on family/domain mismatch or bad parameters.
RadialField sample(const InitialSpec& spec, const GridPtr& grid);

struct ValidationReport {
  bool passed = true;
  std::vector<std::string> failures;
  double min_value = 0.0;  // i0: min u0;   i2: min z
  double scale = 0.0;      // i0: max |u0|; i2: max |z|
  double worst_r = 0.0;    // radius where the worst value sits
};

/// Nonnegative, discretely nonincreasing, nonconstant.
ValidationReport validate_i0(const RadialField& u0);

/// z(r) = r^{n-1} u0_r + u0 * int_0^r (u0 - mu) s^{n-1} ds at interior nodes;
/// passes iff min z >= -1e-8 * max |z|.
ValidationReport validate_i2(const RadialField& u0, const Params& params);
std::vector<double> i2_profile(const RadialField& u0, const Params& params);

struct MinLambdaResult {
  bool found = false;
  double lambda = 0.0;      // smallest passing multiplier on the bisection lattice
  double lambda_fail = 0.0; // largest failing multiplier bracketing it
  bool monotone_spot_check = false;
  std::string message;
};

/// Smallest lambda (log-bisection up to a cap of 1e6) for which lambda * phi satisfies i2.
/// Throws ConfigError when phi violates phi(R) > 0, phi_r(R) = 0, or i0.
MinLambdaResult min_lambda_for_i2(const RadialField& phi, const Params& params);

enum class CriterionKind { Eigenvalue, Kaplan };

struct CriterionReport {
  CriterionKind kind = CriterionKind::Eigenvalue;
  double mass = 0.0;
  double mu = 0.0;
  double lambda1 = 0.0;     // ball: first Dirichlet eigenvalue in dimension n+2
  double kaplan_y0 = 0.0;   // whole space: weighted mass y(0)
  double threshold = 0.0;   // lambda1 or 4(n+2)/(n-2)
  bool sufficient = false;
  double margin = 0.0;      // relative distance past the threshold
};

/// First Dirichlet eigenvalue of -Laplace on the ball of radius R in R^dim,
/// by shooting on the radial eigenfunction.
double first_dirichlet_eigenvalue(int dim, double R);

/// Sufficient blowup test: mu >= lambda1 on a ball, y0 > 4(n+2)/(n-2) on the whole space.
/// Throws Unsupported for the two-dimensional whole space.
CriterionReport blowup_criterion(const RadialField& u0, const Params& params);

}  // namespace kslab
