#pragma once

// Small random samples for derivative checks, generated with std::mt19937_64
// so they do not depend on the library's own generators.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>

#include "cdr/data.hpp"

namespace fixture {

// z = (1, x1, z1) with x1 ~ N(0,1), z1 ~ Bernoulli(0.5); x = (1, x1).
// S* = z'mu + V, Y* = x'nu + U, corr(U, V) = rho, S = max(S*, 0).
inline cdr::ObservationTable small_sample(int n, unsigned seed, double rho = 0.5) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  std::bernoulli_distribution bern(0.5);
  cdr::ObservationTable t;
  t.z.resize(n, 3);
  t.x_cols = {0, 1};
  t.z_names = {"const", "x1", "z1"};
  for (int i = 0; i < n; ++i) {
    const double x1 = nd(gen);
    const double z1 = bern(gen) ? 1.0 : 0.0;
    t.z.row(i) << 1.0, x1, z1;
    const double v = nd(gen);
    const double u = rho * v + std::sqrt(1 - rho * rho) * nd(gen);
    const double s_star = 0.5 + 0.5 * x1 + 1.0 * z1 + v;
    const double s = std::max(0.0, s_star);
    t.s.push_back(s);
    t.y.push_back(s > 0 ? 1.0 + 0.5 * x1 + u : std::nan(""));
  }
  return t;
}

inline cdr::CovariateLayout full_layout() {
  cdr::CovariateLayout l;
  l.selection = {0, 1, 2};
  l.outcome = {0, 1};
  l.sorting0 = {0, 1};
  l.sorting = {0, 1, 2};
  return l;
}

// Five-point central-difference Jacobian of a vector function.
inline Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-5) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd J(f0.size(), x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    auto at = [&](double d) {
      Eigen::VectorXd p = x;
      p(k) += d;
      return f(p);
    };
    J.col(k) = (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
  }
  return J;
}

inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                   double h = 1e-5) {
  return fd_jacobian([&](const Eigen::VectorXd& p) { return Eigen::VectorXd::Constant(1, f(p)); }, x, h)
      .transpose();
}

// Largest elementwise |a - b| / max(|b|, floor).
inline double max_rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double floor = 1e-4) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / std::max(std::abs(b(i, j)), floor));
    }
  }
  return worst;
}

}  // namespace fixture
