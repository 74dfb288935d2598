#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cdr/errors.hpp"
#include "cdr/gauss2d.hpp"
#include "cdr/lgr.hpp"

using namespace cdr;

TEST(LocalCorrelation, KnownValues) {
  EXPECT_NEAR(local_correlation(0.25, 0.5, 0.5), 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(local_correlation(0.5, 0.5, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(local_correlation(0.0, 0.5, 0.5), -1.0);
  // Phi2(0, 0; rho) = 1/4 + asin(rho) / (2 pi).
  const double third = 0.25 + std::asin(0.5) / (2 * M_PI);
  EXPECT_NEAR(local_correlation(third, 0.5, 0.5), 0.5, 1e-12);
  EXPECT_NEAR(local_correlation(0.3333333, 0.5, 0.5), 0.5, 1e-6);
}

TEST(LocalCorrelation, Errors) {
  EXPECT_THROW(local_correlation(0.6, 0.5, 0.5), InfeasibleProbabilityError);
  EXPECT_THROW(local_correlation(0.15, 0.3, 0.9), InfeasibleProbabilityError);
  EXPECT_NO_THROW(local_correlation(0.0, 0.3, 0.4));
  EXPECT_THROW(local_correlation(0.2, 0.0, 0.5), DegenerateMarginalError);
  EXPECT_THROW(local_correlation(0.2, 0.5, 1.0), DegenerateMarginalError);
}

// Where d Phi2 / d rho is tiny, rho moves Phi2 by less than rounding and only
// the forward residual is meaningful.
TEST(LocalCorrelation, RoundTrip) {
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> m(-3.0, 3.0);
  std::uniform_real_distribution<double> r(-0.95, 0.95);
  int recovered = 0;
  for (int i = 0; i < 500; ++i) {
    const double mu = m(gen), nu = m(gen), rho = r(gen);
    const double f = biv_cdf({mu, nu, rho});
    const double got = local_correlation(f, std_cdf(mu), std_cdf(nu));
    if (biv_pdf({mu, nu, rho}) >= 1e-6) {
      EXPECT_NEAR(got, rho, 1e-8) << mu << "," << nu << "," << rho;
      ++recovered;
    }
    EXPECT_NEAR(biv_cdf({std_quantile(std_cdf(mu)), std_quantile(std_cdf(nu)), got}), f, 1e-10);
  }
  EXPECT_GT(recovered, 400);
}

TEST(SolveNuRho0, IndependenceCase) {
  const ExclusionInputs in{0.4, 0.7, 0.4 * 0.5, 0.7 * 0.5};
  const NuRho0 sol = solve_nu_rho0(in);
  EXPECT_NEAR(sol.nu, 0.0, 1e-10);
  EXPECT_NEAR(sol.rho0, 0.0, 1e-10);
}

namespace {

ExclusionInputs forward(double nu, double rho0, double p0, double p1) {
  auto q = [&](double p) { return std_cdf(nu) - biv_cdf({std_quantile(1 - p), nu, rho0}); };
  return {p0, p1, q(p0), q(p1)};
}

}  // namespace

TEST(SolveNuRho0, ForwardRecovery) {
  for (auto [nu, rho0, p0, p1] : {std::array{0.5, 0.3, 0.5, 0.8}, std::array{-1.0, -0.6, 0.3, 0.6}}) {
    const NuRho0 sol = solve_nu_rho0(forward(nu, rho0, p0, p1));
    EXPECT_NEAR(sol.nu, nu, 1e-8);
    EXPECT_NEAR(sol.rho0, rho0, 1e-8);
  }
}

TEST(SolveNuRho0, ReproducesInputs) {
  const ExclusionInputs in = forward(0.2, 0.7, 0.35, 0.9);
  const NuRho0 sol = solve_nu_rho0(in);
  const ExclusionInputs back = forward(sol.nu, sol.rho0, in.p0, in.p1);
  EXPECT_NEAR(back.q0, in.q0, 1e-12);
  EXPECT_NEAR(back.q1, in.q1, 1e-12);
}

TEST(SolveNuRho0, Errors) {
  EXPECT_THROW(solve_nu_rho0({0.5, 0.5, 0.2, 0.2}), WeakInstrumentError);
  EXPECT_THROW(solve_nu_rho0({0.0, 0.5, 0.0, 0.2}), InfeasibleProbabilityError);
  EXPECT_THROW(solve_nu_rho0({0.4, 0.5, 0.45, 0.2}), InfeasibleProbabilityError);
  // Consistent with no Gaussian pair: q rises faster than p allows.
  try {
    solve_nu_rho0({0.4, 0.5, 0.0, 0.5});
    FAIL() << "expected a numerical error";
  } catch (const NonconvergenceError& e) {
    EXPECT_FALSE(e.residuals().empty());
  } catch (const NumericalError&) {
  }
}

TEST(SolveRhoS, ConstantCorrelation) {
  const double ms0 = -0.4, ms = 0.3, nu = 0.25, rho0 = 0.35;
  const double p = biv_cdf({ms, nu, rho0}) - biv_cdf({ms0, nu, rho0});
  EXPECT_NEAR(solve_rho_s(p, ms0, ms, nu, rho0), rho0, 1e-10);
}

TEST(SolveRhoS, ForwardRecovery) {
  for (double rho_s : {0.5, -0.7}) {
    const double ms0 = -0.5, ms = 0.2, nu = 0.1, rho0 = 0.2;
    const double p = biv_cdf({ms, nu, rho_s}) - biv_cdf({ms0, nu, rho0});
    EXPECT_NEAR(solve_rho_s(p, ms0, ms, nu, rho0), rho_s, 1e-8);
  }
  EXPECT_THROW(solve_rho_s(0.9, -0.5, 0.2, 0.1, 0.2), InfeasibleProbabilityError);
}

TEST(LocalCorrelation, GaussianSampleIsConstant) {
  const double rho = 0.4;
  const int n = 100000;
  std::mt19937_64 gen(99);
  std::normal_distribution<double> nd;
  std::vector<std::array<double, 2>> xs(n);
  for (auto& p : xs) {
    const double u = nd(gen), v = nd(gen);
    p = {u, rho * u + std::sqrt(1 - rho * rho) * v};
  }
  for (double s : {-0.8, 0.0, 0.8}) {
    for (double y : {-0.8, 0.0, 0.8}) {
      double fs = 0, fy = 0, fj = 0;
      for (const auto& p : xs) {
        fs += p[0] <= s;
        fy += p[1] <= y;
        fj += (p[0] <= s) && (p[1] <= y);
      }
      EXPECT_NEAR(local_correlation(fj / n, fs / n, fy / n), rho, 0.05) << s << "," << y;
    }
  }
}
