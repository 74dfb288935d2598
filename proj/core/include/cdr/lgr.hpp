#pragma once

// Local Gaussian representation: any bivariate CDF evaluated at a point equals
// Phi2(Phi^{-1}(F_S), Phi^{-1}(F_Y); rho) for a unique local correlation rho.
// This header also holds the two identification solvers built on it.

namespace cdr {

struct LgrPoint {
  double mu = 0.0;   // Phi^{-1} of the selection marginal
  double nu = 0.0;   // Phi^{-1} of the outcome marginal
  double rho = 0.0;  // local correlation
};

// Probabilities observed at the censoring level s0 for a binary instrument Z:
//   p_z = Pr(S > s0 | Z = z),  q_z = Pr(S > s0, Y <= y | Z = z).
struct ExclusionInputs {
  double p0 = 0.0;
  double p1 = 0.0;
  double q0 = 0.0;
  double q1 = 0.0;
};

struct NuRho0 {
  double nu = 0.0;
  double rho0 = 0.0;
};

// Root of rho -> Phi2(a, b; rho) = target on [-1, 1]. Monotone, so the root is
// unique whenever it exists. Throws InfeasibleProbabilityError when target is
// outside [Phi2(a, b; -1), Phi2(a, b; 1)].
double solve_correlation(double target, double a, double b);

// rho such that Phi2(Phi^{-1}(f_s), Phi^{-1}(f_y); rho) = f_joint.
double local_correlation(double f_joint, double f_s, double f_y);

// Solves Pr(S > s0, Y <= y | Z = z) = Phi(nu) - Phi2(Phi^{-1}(1 - p_z), nu; rho0)
// for z in {0, 1}. Damped Newton with the analytic Jacobian, nested bisection
// as fallback. Throws WeakInstrumentError when p0 == p1 and
// NonconvergenceError (carrying residuals) when no root is found.
NuRho0 solve_nu_rho0(const ExclusionInputs& inputs);

// rho_z(s, y) from Pr(s0 < S <= s, Y <= y | Z = z)
//   = Phi2(mu_z(s), nu; rho_s) - Phi2(mu_z(s0), nu; rho0).
double solve_rho_s(double p_interval, double mu_z_s0, double mu_z_s, double nu, double rho0);

}  // namespace cdr
