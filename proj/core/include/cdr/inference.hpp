#pragma once

// Influence functions of the three-step estimator, their variance, the
// multiplier bootstrap and max-t uniform bands over grid cells.

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "cdr/data.hpp"
#include "cdr/estimator.hpp"
#include "cdr/likelihood.hpp"
#include "cdr/rng.hpp"

namespace cdr {

// s == 0 addresses rho(0, y) on the outcome-side sorting layout.
struct CellKey {
  std::size_t s = 0;
  std::size_t y = 0;
  bool operator==(const CellKey&) const = default;
};

struct InfluenceRecords {
  std::size_t n = 0;
  std::vector<CellKey> cells;
  std::vector<Eigen::VectorXd> estimate;  // rho-hat per cell
  std::vector<Eigen::MatrixXd> psi_rho;   // n x d_rho per cell
  std::vector<Eigen::MatrixXd> psi_eta;   // n x d_eta: (mu0, mu_s, theta_y), or (mu0, theta_y) at s == 0
  std::vector<Eigen::MatrixXd> psi_mu;    // [s] n x d_mu
  std::vector<Eigen::MatrixXd> psi_theta; // [y] n x (d_nu + d_rho0)
  std::vector<CellKey> skipped;           // failed fit cells left out

  std::size_t index_of(const CellKey& key) const;  // throws OffGridError
};

struct InfluenceOptions {
  FloorConfig floor;
  int workers = 1;
  bool include_s0 = true;
};

// Throws SingularHessianError naming the block and cell.
InfluenceRecords influence(const CoefficientPaths& fit, const ObservationTable& data,
                           const InfluenceOptions& opts = {});

// psi' psi / n per cell.
std::vector<Eigen::MatrixXd> variance_rho(const InfluenceRecords& records);

// psi_a' psi_b / n between two cells.
Eigen::MatrixXd cross_covariance(const InfluenceRecords& records, std::size_t a, std::size_t b);

// Standard normal multipliers for draw b, demeaned within the draw.
Eigen::VectorXd multipliers(std::size_t n, std::size_t b, std::uint64_t seed, Stream stream = Stream::kBootstrap);

struct BootstrapDraws {
  std::size_t B = 0;
  std::vector<Eigen::MatrixXd> draws;  // per cell, B x d_rho
};

BootstrapDraws bootstrap_draws(const InfluenceRecords& records, std::size_t B, std::uint64_t seed, int workers = 1);

// Same with caller-supplied multipliers (B x n), used to reuse one set of
// draws across several objects.
BootstrapDraws bootstrap_from_multipliers(const InfluenceRecords& records, const Eigen::MatrixXd& omega);

// A scalar functional of rho per cell, linearized: value and gradient.
struct CellFunctional {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

// c'rho with a fixed contrast.
std::vector<CellFunctional> linear_contrasts(const InfluenceRecords& records, const Eigen::VectorXd& c);

// g(z0'rho) at a covariate point z0 given on the full z vector; the gradient
// is g'(z0'rho) z0 restricted to the cell's sorting layout.
std::vector<CellFunctional> sorting_contrasts(const InfluenceRecords& records, const CovariateLayout& layout,
                                              const Eigen::VectorXd& z0);

enum class DegeneratePolicy { kDropAndFlag, kStrict };

struct CriticalValue {
  double cv = 0.0;
  std::vector<std::size_t> used;     // record indices in the sup
  std::vector<std::size_t> dropped;  // degenerate cells
};

inline constexpr double kDegenerateVariance = 1e-12;

// level-quantile over b of max over cells of |grad'(rho_b - rho)| / se.
CriticalValue max_t_critical(const BootstrapDraws& draws, const InfluenceRecords& records,
                             const std::vector<Eigen::MatrixXd>& variance,
                             const std::vector<CellFunctional>& functionals, double level,
                             const std::vector<std::size_t>& cells = {},
                             DegeneratePolicy policy = DegeneratePolicy::kDropAndFlag);

struct BandSet {
  std::vector<CellKey> cells;
  std::vector<double> estimate;
  std::vector<double> se;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<bool> degenerate;
  double critical_value = 0.0;
  double level = 0.0;
};

BandSet band(const InfluenceRecords& records, const std::vector<Eigen::MatrixXd>& variance,
             const std::vector<CellFunctional>& functionals, double cv, double level);

// Empirical quantile (inverse of the empirical CDF) of a sample.
double empirical_quantile(std::vector<double> values, double level);

}  // namespace cdr
