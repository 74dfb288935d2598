#pragma once

// Data-generating processes with known coefficient paths.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cdr/data.hpp"
#include "cdr/estimator.hpp"
#include "cdr/rng.hpp"

namespace cdr {

struct CovariateColumn {
  enum class Kind { kConstant, kNormal, kBernoulli };
  std::string name;
  Kind kind = Kind::kConstant;
  double p1 = 1.0;  // constant value, normal mean, or Bernoulli probability
  double p2 = 1.0;  // normal standard deviation
  bool in_outcome = true;
};

struct CovariateSampler {
  std::vector<CovariateColumn> columns;

  // Intercept, one N(0, 1) regressor, one Bernoulli(0.5) instrument excluded
  // from the outcome equation.
  static CovariateSampler standard();
  Eigen::RowVectorXd draw(CounterRng& rng) const;
  std::vector<std::size_t> outcome_columns() const;
  std::vector<std::string> names() const;
};

// Gaussian selection model: Y* = x'nu + sigma_u U, S* = z'mu + sigma_v V,
// corr(U, V) = rho.
struct HsmParams {
  Eigen::VectorXd nu;
  Eigen::VectorXd mu;
  double sigma_u = 1.0;
  double sigma_v = 1.0;
  double rho = 0.0;
  CovariateSampler sampler = CovariateSampler::standard();

  void validate() const;
};

// True distribution-regression coefficients implied by an HsmParams.
struct HsmTruth {
  HsmParams params;
  std::size_t intercept = 0;  // position of the constant in z

  Eigen::VectorXd mu_at(double s) const;  // z'mu(s) = (z'mu - s) / sigma_v
  Eigen::VectorXd nu_at(double y) const;  // x'nu(y) = (x'nu - y) / sigma_u
  // Sorting coefficients for a layout: atanh(rho) on the constant, 0 elsewhere.
  Eigen::VectorXd rho_coefs(const std::vector<std::size_t>& sorting_cols) const;
  CoefficientPaths paths(const GridSpec& grid, const CovariateLayout& layout) const;
};

struct Simulated {
  ObservationTable table;
  HsmTruth truth;
};

Simulated simulate_hsm(std::size_t n, const HsmParams& params, std::uint64_t seed);

// Distribution-regression model specified through its index functions:
//   F(s, y | z) = Phi2(-sel(s, z), -out(y, x); tanh(sort(s, y, z))).
// The model only needs to be a valid distribution on the knot grid in s; S*
// is drawn by exact inversion of the marginal and Y* from the knot-interval
// conditional distribution.
struct BdrModel {
  std::function<double(double s, const Eigen::RowVectorXd& z)> sel;
  std::function<double(double y, const Eigen::RowVectorXd& x)> out;
  std::function<double(double s, double y, const Eigen::RowVectorXd& z)> sort;
  std::vector<double> s_knots;  // ascending, contains 0
  double y_lo = -50.0;          // search bracket for Y*
  double y_hi = 50.0;
  double s_lo = -50.0;          // search bracket for S*
  double s_hi = 100.0;
};

// Checks marginal monotonicity and rectangle nonnegativity (which implies the
// Frechet bounds) on the extended knot grid crossed with y_check, for the
// covariate rows of `z`. Masses down to -1e-9 are accepted. Throws
// InvalidDgpError.
void validate_bdr(const BdrModel& model, const Eigen::MatrixXd& z, const std::vector<std::size_t>& x_cols,
                  const std::vector<double>& y_check);

ObservationTable simulate_bdr(std::size_t n, const BdrModel& model, const CovariateSampler& sampler,
                              std::uint64_t seed, int workers = 1);

// Index functions of an HSM whose correlation rho_of(s, y) may vary.
// A sign change of rho between two knots is only valid when the knots are
// several sigma_v apart: the lower y tail otherwise gets negative mass.
BdrModel hsm_as_bdr(const HsmParams& params, std::function<double(double s, double y)> rho_of,
                    std::vector<double> s_knots);

}  // namespace cdr
