#include "cdr/optimize.hpp"

#include <cmath>

#include "cdr/errors.hpp"

namespace cdr {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kArmijo = 1e-4;

bool finite(double v, const VectorXd& g) { return std::isfinite(v) && g.allFinite(); }

struct Point {
  VectorXd x;
  double f = 0.0;
  VectorXd g;
};

// Backtracks along dir until the Armijo condition holds; false if no step helps.
bool line_search(const Objective& obj, const Point& cur, const VectorXd& dir, Point& next) {
  const double slope = cur.g.dot(dir);
  if (!(slope > 0.0)) return false;
  double step = 1.0;
  for (int k = 0; k < 60; ++k, step *= 0.5) {
    next.x = cur.x + step * dir;
    next.f = obj(next.x, &next.g, nullptr);
    if (finite(next.f, next.g) && next.f >= cur.f + kArmijo * step * slope) return true;
  }
  return false;
}

void bfgs(const Objective& obj, Point& cur, const OptimOptions& opts, OptimReport& rep) {
  const auto k = cur.x.size();
  MatrixXd Hinv = MatrixXd::Identity(k, k);  // inverse Hessian of -f
  bool scaled = false;
  for (; rep.iterations < opts.max_iter; ++rep.iterations) {
    if (cur.g.norm() <= opts.grad_tol) return;
    VectorXd dir = Hinv * cur.g;
    if (!(cur.g.dot(dir) > 0.0)) {
      Hinv.setIdentity();
      dir = cur.g;
    }
    Point next;
    if (!line_search(obj, cur, dir, next)) {
      if (Hinv.isIdentity()) return;
      Hinv.setIdentity();
      continue;
    }
    const VectorXd s = next.x - cur.x;
    const VectorXd y = cur.g - next.g;  // gradient change of -f
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        Hinv *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const MatrixXd I = MatrixXd::Identity(k, k);
      Hinv = (I - rho * s * y.transpose()) * Hinv * (I - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    cur = std::move(next);
  }
}

void newton(const Objective& obj, Point& cur, const OptimOptions& opts, OptimReport& rep) {
  for (int it = 0; it < opts.max_polish; ++it) {
    MatrixXd H;
    cur.f = obj(cur.x, &cur.g, &H);
    if (cur.g.norm() <= opts.polish_tol) return;
    ++rep.iterations;
    VectorXd dir;
    Eigen::LLT<MatrixXd> llt(-H);
    if (H.allFinite() && llt.info() == Eigen::Success) {
      dir = llt.solve(cur.g);
    } else {
      dir = cur.g;
    }
    Point next;
    if (!line_search(obj, cur, dir, next)) {
      if (!line_search(obj, cur, cur.g, next)) return;
    }
    // Near the optimum the value stalls at rounding; keep a step only if it
    // shrinks the gradient.
    if (cur.g.norm() <= opts.grad_tol && next.g.norm() >= cur.g.norm()) return;
    cur = std::move(next);
  }
}

}  // namespace

OptimResult maximize(const Objective& objective, const VectorXd& start, const OptimOptions& opts,
                     bool newton_polish) {
  Point cur;
  cur.x = start;
  cur.f = objective(cur.x, &cur.g, nullptr);
  if (!finite(cur.f, cur.g)) throw BadStartError("objective is not finite at the starting point");

  OptimReport rep;
  bfgs(objective, cur, opts, rep);
  if (newton_polish) newton(objective, cur, opts, rep);
  cur.f = objective(cur.x, &cur.g, nullptr);

  rep.value = cur.f;
  rep.grad_norm = cur.g.norm();
  rep.converged = rep.grad_norm <= opts.grad_tol;
  rep.message = rep.converged ? "converged" : "gradient norm above tolerance";
  return {cur.x, rep};
}

}  // namespace cdr
