#pragma once

// Univariate and bivariate standard Gaussian primitives.
//
// Arguments live on the extended real line: +/-infinity short-circuits to the
// marginal (or degenerate) value. All functions are pure and thread-safe.

#include <array>
#include <limits>

namespace cdr {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

double std_pdf(double x);
double std_cdf(double x);

// log Phi(x), accurate far into the lower tail where Phi underflows.
double log_std_cdf(double x);

// Inverse Mills ratio phi(x) / Phi(x), stable for x -> -infinity.
double inv_mills(double x);

// Phi^{-1}(p). Throws std::domain_error outside [0, 1]; 0 -> -inf, 1 -> +inf.
double std_quantile(double p);

struct BivArgs {
  double a = 0.0;
  double b = 0.0;
  double rho = 0.0;
};

// Phi2(a, b; rho). Drezner-Wesolowsky/Genz Gauss-Legendre scheme, absolute
// error well below 1e-14 on |rho| <= 1 (exact limits at rho = +/-1).
double biv_cdf(const BivArgs& args);

// log Phi2, evaluated in the log domain when Phi2 underflows.
double log_biv_cdf(const BivArgs& args);

// phi2(a, b; rho). Throws DegenerateCorrelationError when |rho| >= 1.
double biv_pdf(const BivArgs& args);

struct BivGrad {
  double d_a = 0.0;
  double d_b = 0.0;
  double d_rho = 0.0;
};

BivGrad biv_cdf_grad(const BivArgs& args);

// Second partials of Phi2 that involve rho.
struct BivRhoHess {
  double d_rho_a = 0.0;
  double d_rho_b = 0.0;
  double d_rho_rho = 0.0;
};

BivRhoHess biv_cdf_hess_rho(const BivArgs& args);

// Value, gradient and full Hessian of Phi2 in the order (a, b, rho).
struct BivJet {
  double value = 0.0;
  std::array<double, 3> grad{};
  std::array<std::array<double, 3>, 3> hess{};
};

BivJet biv_cdf_jet(const BivArgs& args);

}  // namespace cdr
