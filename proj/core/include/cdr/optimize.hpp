#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

namespace cdr {

// Objective returning its value and, when the pointers are non-null, the
// gradient and Hessian.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad, Eigen::MatrixXd* hess)>;

struct OptimOptions {
  double grad_tol = 1e-6;  // Euclidean norm of the gradient
  int max_iter = 500;
  int max_polish = 50;
  // Newton polishing continues past grad_tol towards this norm while steps
  // still improve the objective.
  double polish_tol = 1e-12;
};

struct OptimReport {
  bool converged = false;
  int iterations = 0;
  double value = 0.0;
  double grad_norm = 0.0;
  std::string message;
};

struct OptimResult {
  Eigen::VectorXd argmax;
  OptimReport report;
};

// BFGS with backtracking Armijo search on the gradient only, followed by a
// safeguarded Newton polish when the objective supplies Hessians. Throws
// BadStartError when the objective is not finite at start.
OptimResult maximize(const Objective& objective, const Eigen::VectorXd& start, const OptimOptions& opts = {},
                     bool newton_polish = true);

}  // namespace cdr
