#include "cdr/lgr.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "cdr/errors.hpp"
#include "cdr/gauss2d.hpp"

namespace cdr {

namespace {

constexpr int kMaxIter = 200;
constexpr double kResidualTol = 1e-10;
constexpr double kFrechetSlack = 1e-14;
constexpr double kRhoBox = 1.0 - 1e-9;

double phi2(double a, double b, double rho) { return biv_cdf({a, b, rho}); }

// Pr(X > m, Y <= nu) for correlation rho.
double upper_lower(double m, double nu, double rho) { return std_cdf(nu) - phi2(m, nu, rho); }

std::array<double, 2> residuals(const std::array<double, 2>& m, const std::array<double, 2>& q,
                                double nu, double rho) {
  return {upper_lower(m[0], nu, rho) - q[0], upper_lower(m[1], nu, rho) - q[1]};
}

double max_abs(const std::array<double, 2>& r) { return std::max(std::abs(r[0]), std::abs(r[1])); }

// nu solving Pr(X > m, Y <= nu; rho) = q; strictly increasing in nu.
double solve_nu_given_rho(double m, double q, double rho) {
  double lo = -40.0;
  double hi = 40.0;
  double nu = 0.0;
  for (int it = 0; it < kMaxIter; ++it) {
    const double r = upper_lower(m, nu, rho) - q;
    if (r > 0.0) {
      hi = nu;
    } else {
      lo = nu;
    }
    const double slope = std_pdf(nu) - biv_cdf_grad({m, nu, rho}).d_b;
    double next = slope > 0.0 ? nu - r / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - nu) < 1e-15 || hi - lo < 1e-15) return next;
    nu = next;
  }
  return nu;
}

NuRho0 nested_bisection(const std::array<double, 2>& m, const std::array<double, 2>& q) {
  auto outer = [&](double rho) {
    const double nu = solve_nu_given_rho(m[0], q[0], rho);
    return std::pair{nu, upper_lower(m[1], nu, rho) - q[1]};
  };
  double lo = -kRhoBox;
  double hi = kRhoBox;
  auto [nu_lo, r_lo] = outer(lo);
  auto [nu_hi, r_hi] = outer(hi);
  if (r_lo * r_hi > 0.0) {
    throw NonconvergenceError("solve_nu_rho0: no sign change over the correlation range",
                              {r_lo, r_hi});
  }
  double nu = nu_lo;
  double rho = lo;
  for (int it = 0; it < kMaxIter && hi - lo > 1e-15; ++it) {
    rho = 0.5 * (lo + hi);
    auto [nu_mid, r_mid] = outer(rho);
    nu = nu_mid;
    if ((r_mid > 0.0) == (r_lo > 0.0)) {
      lo = rho;
      r_lo = r_mid;
    } else {
      hi = rho;
    }
  }
  return {nu, rho};
}

}  // namespace

double solve_correlation(double target, double a, double b) {
  const double lower = phi2(a, b, -1.0);
  const double upper = phi2(a, b, 1.0);
  if (target < lower - kFrechetSlack || target > upper + kFrechetSlack) {
    throw InfeasibleProbabilityError("probability " + std::to_string(target) +
                                     " outside the attainable range [" + std::to_string(lower) +
                                     ", " + std::to_string(upper) + "]");
  }
  if (target >= upper) return 1.0;
  if (target <= lower) return -1.0;

  double lo = -1.0;
  double hi = 1.0;
  double rho = 0.0;
  for (int it = 0; it < kMaxIter; ++it) {
    const double r = phi2(a, b, rho) - target;
    if (r == 0.0) return rho;
    if (r > 0.0) {
      hi = rho;
    } else {
      lo = rho;
    }
    const double slope = std::abs(rho) < 1.0 ? biv_pdf({a, b, rho}) : 0.0;
    double next = slope > 0.0 ? rho - r / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - rho) < 1e-16 || hi - lo < 1e-16) return next;
    rho = next;
  }
  return rho;
}

double local_correlation(double f_joint, double f_s, double f_y) {
  if (!(f_s > 0.0 && f_s < 1.0 && f_y > 0.0 && f_y < 1.0)) {
    throw DegenerateMarginalError("local_correlation: marginal probabilities must lie in (0, 1)");
  }
  const double lower = std::max(0.0, f_s + f_y - 1.0);
  const double upper = std::min(f_s, f_y);
  if (f_joint < lower - kFrechetSlack || f_joint > upper + kFrechetSlack) {
    throw InfeasibleProbabilityError("local_correlation: joint probability outside Frechet bounds");
  }
  return solve_correlation(f_joint, std_quantile(f_s), std_quantile(f_y));
}

NuRho0 solve_nu_rho0(const ExclusionInputs& in) {
  for (const double p : {in.p0, in.p1}) {
    if (!(p > 0.0 && p < 1.0)) {
      throw InfeasibleProbabilityError("solve_nu_rho0: selection probabilities must lie in (0, 1)");
    }
  }
  if (!(in.q0 >= 0.0 && in.q0 <= in.p0 && in.q1 >= 0.0 && in.q1 <= in.p1)) {
    throw InfeasibleProbabilityError("solve_nu_rho0: require 0 <= q_z <= p_z");
  }
  if (std::abs(in.p1 - in.p0) < 1e-12) {
    throw WeakInstrumentError("solve_nu_rho0: instrument does not shift selection (p0 == p1)");
  }

  const std::array<double, 2> m = {std_quantile(1.0 - in.p0), std_quantile(1.0 - in.p1)};
  const std::array<double, 2> q = {in.q0, in.q1};

  const double pooled = std::clamp((in.q0 + in.q1) / (in.p0 + in.p1), 1e-12, 1.0 - 1e-12);
  double nu = std_quantile(pooled);
  double rho = 0.0;
  auto r = residuals(m, q, nu, rho);

  bool ok = false;
  for (int it = 0; it < kMaxIter; ++it) {
    if (max_abs(r) <= 1e-15) {
      ok = true;
      break;
    }
    // Jacobian rows: d/dnu = phi(nu) - Phi2_b, d/drho = -phi2.
    double jac[2][2];
    for (int z = 0; z < 2; ++z) {
      const BivJet jet = biv_cdf_jet({m[z], nu, rho});
      jac[z][0] = std_pdf(nu) - jet.grad[1];
      jac[z][1] = -jet.grad[2];
    }
    const double det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    if (!(std::abs(det) > 0.0) || !std::isfinite(det)) break;
    const double dnu = (jac[1][1] * r[0] - jac[0][1] * r[1]) / det;
    const double drho = (jac[0][0] * r[1] - jac[1][0] * r[0]) / det;

    double step = 1.0;
    bool improved = false;
    for (int half = 0; half < 40; ++half, step *= 0.5) {
      const double nu_try = nu - step * dnu;
      const double rho_try = rho - step * drho;
      if (std::abs(rho_try) >= kRhoBox || std::abs(nu_try) > 40.0) continue;
      const auto r_try = residuals(m, q, nu_try, rho_try);
      if (max_abs(r_try) < max_abs(r)) {
        nu = nu_try;
        rho = rho_try;
        r = r_try;
        improved = true;
        break;
      }
    }
    if (!improved) {
      ok = max_abs(r) <= kResidualTol;
      break;
    }
    if (std::abs(step * dnu) < 1e-15 && std::abs(step * drho) < 1e-15) {
      ok = max_abs(r) <= kResidualTol;
      break;
    }
  }

  if (!ok) {
    const NuRho0 fallback = nested_bisection(m, q);
    const auto rf = residuals(m, q, fallback.nu, fallback.rho0);
    if (max_abs(rf) > kResidualTol) {
      throw NonconvergenceError("solve_nu_rho0: residual above tolerance", {rf[0], rf[1]});
    }
    return fallback;
  }
  return {nu, rho};
}

double solve_rho_s(double p_interval, double mu_z_s0, double mu_z_s, double nu, double rho0) {
  const double target = p_interval + phi2(mu_z_s0, nu, rho0);
  if (!(target > 0.0 && target < 1.0)) {
    throw InfeasibleProbabilityError("solve_rho_s: implied Phi2 value outside (0, 1)");
  }
  return solve_correlation(target, mu_z_s, nu);
}

}  // namespace cdr
