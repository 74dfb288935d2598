#pragma once

// Three-step estimator over a finite (s, y) grid:
//   1. probits of 1(S > s) for every s,
//   2. selection-corrected probits for (nu(y), rho(0, y)) given mu(0),
//   3. bivariate probits for rho(s, y), s > 0, given steps 1 and 2.

#include <Eigen/Dense>
#include <cstddef>
#include <string>
#include <vector>

#include "cdr/data.hpp"
#include "cdr/likelihood.hpp"
#include "cdr/optimize.hpp"

namespace cdr {

struct GridSpec {
  std::vector<double> s_points;  // ascending, s_points[0] == 0
  std::vector<double> y_points;  // ascending

  void validate() const;
  std::size_t ns() const { return s_points.size(); }
  std::size_t ny() const { return y_points.size(); }
  // Exact lookup; throws OffGridError.
  std::size_t s_index(double s) const;
  std::size_t y_index(double y) const;
};

struct CellDiagnostics {
  bool converged = false;
  bool failed = false;
  int iterations = 0;
  double grad_norm = 0.0;
  bool floor_active = false;
  bool boundary_warning = false;
  double condition = 0.0;  // condition number of the Hessian at the optimum
  std::string message;
};

struct CoefficientPaths {
  GridSpec grid;
  CovariateLayout layout;
  std::vector<Eigen::VectorXd> mu;    // [s]
  std::vector<Eigen::VectorXd> nu;    // [y]
  std::vector<Eigen::VectorXd> rho0;  // [y]
  std::vector<Eigen::VectorXd> rho;   // [s * ny + y]; entries with s == 0 are empty

  std::vector<CellDiagnostics> step1;  // [s]
  std::vector<CellDiagnostics> step2;  // [y]
  std::vector<CellDiagnostics> step3;  // [s * ny + y]

  bool weak_identification = false;   // some step-2 Hessian is nearly singular
  bool monotone_marginal = true;      // mean Phi(-z'mu_s) nondecreasing in s
  double mean_floor_active_cells = 0.0;

  const Eigen::VectorXd& rho_at(std::size_t si, std::size_t yi) const { return rho[si * grid.ny() + yi]; }
  Eigen::VectorXd& rho_at(std::size_t si, std::size_t yi) { return rho[si * grid.ny() + yi]; }
  std::size_t failed_cells() const;
};

struct FitOptions {
  FloorConfig floor;
  OptimOptions optim;
  int workers = 1;
  // Step-2 Hessian condition number above which the fit is flagged as weakly
  // identified.
  double weak_condition = 500.0;
};

CoefficientPaths fit(const ObservationTable& data, const GridSpec& grid, const CovariateLayout& layout,
                     const FitOptions& opts = {});

// Step-3 start: rho0 coordinates placed on matching sorting columns, zeros elsewhere.
Eigen::VectorXd embed_rho0(const Eigen::VectorXd& rho0, const CovariateLayout& layout);

// Sample quantiles (type 7) of Y among selected rows.
std::vector<double> selected_y_quantiles(const ObservationTable& data, const std::vector<double>& probs);

std::string cell_label(double s, double y);

}  // namespace cdr
