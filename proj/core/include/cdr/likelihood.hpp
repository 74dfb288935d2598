#pragma once

// Log-likelihoods of the three estimation steps with exact first and second
// derivatives. All objectives are sample averages over the n rows of a Design;
// unselected rows contribute to step 1 only.

#include <Eigen/Dense>
#include <cstddef>

#include "cdr/data.hpp"

namespace cdr {

// Smooth lower floor for cell probabilities: identity above tau, a tanh blend
// towards eps below it.
struct FloorConfig {
  double tau = 1e-5;
  double eps = 5e-6;

  void validate() const;
};

// eps = tau / 2.
FloorConfig floor_with_tau(double tau);

double link(double u);
double link_deriv(double u);
double link_second(double u);

struct FloorValue {
  double value = 0.0;
  double deriv = 0.0;
  double second = 0.0;
};

FloorValue smooth_floor(double p, const FloorConfig& cfg);

// Correlations produced by the link are clamped to this magnitude inside the
// likelihoods; the link derivatives are zero once clamped.
inline constexpr double kRhoClamp = 1.0 - 1e-10;

struct LikOptions {
  FloorConfig floor;
  bool floored = true;     // false: raw log-probabilities (influence functions)
  bool want_obs = false;   // fill per-observation scores
};

struct Step1Result {
  double value = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd hessian;
  Eigen::MatrixXd obs_scores;  // n x k_mu, not divided by n
};

// Probit of 1(S > s) on the selection design.
Step1Result step1_loglik(const Eigen::VectorXd& mu, const Design& design, double s, bool want_obs = false);

struct FloorReport {
  std::size_t floored_rows = 0;
  std::size_t selected_rows = 0;
  bool boundary_warning = false;  // floor active on more than half the selected rows
};

struct Step2Result {
  double value = 0.0;
  Eigen::VectorXd score;           // (nu, rho0)
  Eigen::MatrixXd hessian;
  Eigen::MatrixXd cross_jacobian;  // d score / d mu0
  Eigen::MatrixXd obs_scores;
  FloorReport floor;
};

// theta stacks (nu_y, rho0_y).
Step2Result step2_loglik(const Eigen::VectorXd& theta, const Eigen::VectorXd& mu0, const Design& design, double y,
                         const LikOptions& opts = {});

struct Step3Plugins {
  Eigen::VectorXd mu0;
  Eigen::VectorXd mus;
  Eigen::VectorXd nu;
  Eigen::VectorXd rho0;
};

struct Step3Result {
  double value = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd hessian;
  Eigen::MatrixXd j_mu0;    // d score / d mu0
  Eigen::MatrixXd j_mus;    // d score / d mu_s
  Eigen::MatrixXd j_theta;  // d score / d (nu, rho0)
  Eigen::MatrixXd obs_scores;
  FloorReport floor;
};

Step3Result step3_loglik(const Eigen::VectorXd& rho, const Step3Plugins& plugins, const Design& design, double s,
                         double y, const LikOptions& opts = {});

// The four step-3 cells for one row before flooring:
// (S > s, Y > y), (S > s, Y <= y), (0 < S <= s, Y > y), (0 < S <= s, Y <= y).
struct CellProbabilities {
  double a1 = 0.0;
  double a2 = 0.0;
  double a3 = 0.0;
  double a4 = 0.0;
};

CellProbabilities cell_probabilities(double a0, double as, double b, double r0, double rs);

}  // namespace cdr
