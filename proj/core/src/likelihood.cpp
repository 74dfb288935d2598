#include "cdr/likelihood.hpp"

#include <array>
#include <cmath>
#include <string>

#include "cdr/errors.hpp"
#include "cdr/gauss2d.hpp"

namespace cdr {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Row-level index vector t = (a0, as, b, u0, us).
enum : int { kA0 = 0, kAS = 1, kB = 2, kU0 = 3, kUS = 4, kDim = 5 };

using Vec5 = std::array<double, kDim>;
using Mat5 = std::array<Vec5, kDim>;

struct LinkJet {
  double g = 0.0;
  double dg = 0.0;
  double d2g = 0.0;
};

LinkJet clamped_link(double u) {
  const double g = std::tanh(u);
  if (std::abs(g) > kRhoClamp) return {std::copysign(kRhoClamp, g), 0.0, 0.0};
  const double dg = 1.0 - g * g;
  return {g, dg, -2.0 * g * dg};
}

// coef * Phi2(t[ia], sigma * t[kB]; sigma * g(t[iu])).
struct Term {
  double coef;
  int ia;
  int iu;
  double sigma;
};

struct RowJet {
  double p = 0.0;
  Vec5 grad{};
  Mat5 hess{};
};

void add_term(RowJet& row, const Vec5& t, const Term& term) {
  const LinkJet lk = clamped_link(t[term.iu]);
  const double sg = term.sigma;
  const BivJet f = biv_cdf_jet({t[term.ia], sg * t[kB], sg * lk.g});
  const double c = term.coef;
  const int a = term.ia;
  const int u = term.iu;

  const double fa = f.grad[0], fb = f.grad[1], fr = f.grad[2];
  row.p += c * f.value;
  row.grad[a] += c * fa;
  row.grad[kB] += c * sg * fb;
  row.grad[u] += c * sg * fr * lk.dg;

  auto put = [&](int i, int j, double v) {
    row.hess[i][j] += c * v;
    if (i != j) row.hess[j][i] += c * v;
  };
  put(a, a, f.hess[0][0]);
  put(a, kB, sg * f.hess[0][1]);
  put(a, u, sg * f.hess[0][2] * lk.dg);
  put(kB, kB, f.hess[1][1]);
  put(kB, u, f.hess[1][2] * lk.dg);
  put(u, u, f.hess[2][2] * lk.dg * lk.dg + sg * fr * lk.d2g);
}

struct LogWeights {
  double value = 0.0;
  double w1 = 0.0;  // dL / dP
  double w2 = 0.0;  // d2L / dP2
  bool floored = false;
};

LogWeights log_weights(double p, const LikOptions& opts) {
  if (opts.floored || !(p > 0.0)) {
    const FloorValue fv = smooth_floor(p, opts.floor);
    const double w1 = fv.deriv / fv.value;
    return {std::log(fv.value), w1, fv.second / fv.value - w1 * w1, p < opts.floor.tau};
  }
  return {std::log(p), 1.0 / p, -1.0 / (p * p), p < opts.floor.tau};
}

// Gradient and Hessian of log f(P) in t.
struct RowLog {
  double value = 0.0;
  Vec5 grad{};
  Mat5 hess{};
  bool floored = false;
};

RowLog row_log(const RowJet& row, const LikOptions& opts) {
  const LogWeights w = log_weights(row.p, opts);
  RowLog out;
  out.value = w.value;
  out.floored = w.floored;
  for (int i = 0; i < kDim; ++i) {
    out.grad[i] = w.w1 * row.grad[i];
    for (int j = 0; j < kDim; ++j) out.hess[i][j] = w.w2 * row.grad[i] * row.grad[j] + w.w1 * row.hess[i][j];
  }
  return out;
}

// A' diag(w) B / n.
MatrixXd weighted_cross(const MatrixXd& a, const VectorXd& w, const MatrixXd& b, double n) {
  return a.transpose() * (w.asDiagonal() * b) / n;
}

void finish_floor(FloorReport& rep) { rep.boundary_warning = 2 * rep.floored_rows > rep.selected_rows; }

}  // namespace

void FloorConfig::validate() const {
  if (!(eps > 0.0 && eps < tau && tau < 0.5)) {
    throw ConfigError("floor: require 0 < eps < tau < 0.5 (got tau=" + std::to_string(tau) +
                      ", eps=" + std::to_string(eps) + ")");
  }
}

FloorConfig floor_with_tau(double tau) {
  FloorConfig cfg{tau, 0.5 * tau};
  cfg.validate();
  return cfg;
}

double link(double u) { return std::tanh(u); }

double link_deriv(double u) {
  const double g = std::tanh(u);
  return 1.0 - g * g;
}

double link_second(double u) {
  const double g = std::tanh(u);
  return -2.0 * g * (1.0 - g * g);
}

FloorValue smooth_floor(double p, const FloorConfig& cfg) {
  if (p >= cfg.tau) return {p, 1.0, 0.0};
  const double scale = cfg.tau - cfg.eps;
  const double t = std::tanh((p - cfg.tau) / scale);
  const double d = 1.0 - t * t;
  return {scale * t + cfg.tau, d, -2.0 * t * d / scale};
}

CellProbabilities cell_probabilities(double a0, double as, double b, double r0, double rs) {
  CellProbabilities c;
  c.a1 = biv_cdf({as, b, rs});
  c.a2 = biv_cdf({as, -b, -rs});
  c.a3 = biv_cdf({a0, b, r0}) - c.a1;
  c.a4 = biv_cdf({a0, -b, -r0}) - c.a2;
  return c;
}

Step1Result step1_loglik(const VectorXd& mu, const Design& design, double s, bool want_obs) {
  const auto n = static_cast<Index>(design.n());
  if (n == 0) throw EmptySelectionError("step 1: no observations");
  const VectorXd index = design.sel * mu;
  VectorXd g1(n), g2(n);
  double value = 0.0;
  Index above = 0;
  for (Index i = 0; i < n; ++i) {
    const double a = index(i);
    const bool up = design.s[static_cast<std::size_t>(i)] > s;  // 1 - J^s
    above += up;
    // d/da log Phi(a) = lambda(a), d2 = -lambda(a) (a + lambda(a)).
    if (up) {
      const double lam = inv_mills(a);
      value += log_std_cdf(a);
      g1(i) = lam;
      g2(i) = -lam * (a + lam);
    } else {
      const double lam = inv_mills(-a);
      value += log_std_cdf(-a);
      g1(i) = -lam;
      g2(i) = -lam * (-a + lam);
    }
  }
  if (above == 0 || above == n) {
    throw SeparationError("step 1: indicator 1(S <= " + std::to_string(s) + ") is constant");
  }
  const double dn = static_cast<double>(n);
  Step1Result r;
  r.value = value / dn;
  r.score = design.sel.transpose() * g1 / dn;
  r.hessian = weighted_cross(design.sel, g2, design.sel, dn);
  if (want_obs) r.obs_scores = g1.asDiagonal() * design.sel;
  return r;
}

Step2Result step2_loglik(const VectorXd& theta, const VectorXd& mu0, const Design& design, double y,
                         const LikOptions& opts) {
  opts.floor.validate();
  const auto n = static_cast<Index>(design.n());
  const Index kn = design.out.cols();
  const Index kr = design.sort0.cols();
  if (theta.size() != kn + kr) throw std::invalid_argument("step 2: parameter length does not match layout");

  const VectorXd nu = theta.head(kn);
  const VectorXd rho0 = theta.tail(kr);
  const VectorXd a0 = design.sel * mu0;
  const VectorXd b = design.out * nu;
  const VectorXd u0 = design.sort0 * rho0;

  VectorXd lb = VectorXd::Zero(n), lu = VectorXd::Zero(n);
  VectorXd lbb = VectorXd::Zero(n), lbu = VectorXd::Zero(n), luu = VectorXd::Zero(n);
  VectorXd lba = VectorXd::Zero(n), lua = VectorXd::Zero(n);
  double value = 0.0;
  FloorReport rep;
  for (Index i = 0; i < n; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    if (!design.selected(iu)) continue;
    ++rep.selected_rows;
    Vec5 t{a0(i), 0.0, b(i), u0(i), 0.0};
    RowJet row;
    // Y > y: Phi2(a0, b; r0); Y <= y: Phi2(a0, -b; -r0).
    const double sigma = design.y[iu] > y ? 1.0 : -1.0;
    add_term(row, t, {1.0, kA0, kU0, sigma});
    const RowLog L = row_log(row, opts);
    value += L.value;
    rep.floored_rows += L.floored;
    lb(i) = L.grad[kB];
    lu(i) = L.grad[kU0];
    lbb(i) = L.hess[kB][kB];
    lbu(i) = L.hess[kB][kU0];
    luu(i) = L.hess[kU0][kU0];
    lba(i) = L.hess[kB][kA0];
    lua(i) = L.hess[kU0][kA0];
  }
  if (rep.selected_rows == 0) throw EmptySelectionError("step 2: no selected observations");
  finish_floor(rep);

  const double dn = static_cast<double>(n);
  const MatrixXd& X = design.out;
  const MatrixXd& X0 = design.sort0;
  const MatrixXd& Z = design.sel;
  Step2Result r;
  r.value = value / dn;
  r.score.resize(kn + kr);
  r.score.head(kn) = X.transpose() * lb / dn;
  r.score.tail(kr) = X0.transpose() * lu / dn;
  r.hessian.resize(kn + kr, kn + kr);
  r.hessian.topLeftCorner(kn, kn) = weighted_cross(X, lbb, X, dn);
  r.hessian.topRightCorner(kn, kr) = weighted_cross(X, lbu, X0, dn);
  r.hessian.bottomLeftCorner(kr, kn) = r.hessian.topRightCorner(kn, kr).transpose();
  r.hessian.bottomRightCorner(kr, kr) = weighted_cross(X0, luu, X0, dn);
  r.cross_jacobian.resize(kn + kr, Z.cols());
  r.cross_jacobian.topRows(kn) = weighted_cross(X, lba, Z, dn);
  r.cross_jacobian.bottomRows(kr) = weighted_cross(X0, lua, Z, dn);
  if (opts.want_obs) {
    r.obs_scores.resize(n, kn + kr);
    r.obs_scores.leftCols(kn) = lb.asDiagonal() * X;
    r.obs_scores.rightCols(kr) = lu.asDiagonal() * X0;
  }
  r.floor = rep;
  return r;
}

Step3Result step3_loglik(const VectorXd& rho, const Step3Plugins& pl, const Design& design, double s, double y,
                         const LikOptions& opts) {
  opts.floor.validate();
  if (!(s > 0.0)) throw std::invalid_argument("step 3: selection level must be positive");
  const auto n = static_cast<Index>(design.n());
  if (rho.size() != design.sort.cols()) throw std::invalid_argument("step 3: parameter length does not match layout");

  const VectorXd a0 = design.sel * pl.mu0;
  const VectorXd as = design.sel * pl.mus;
  const VectorXd b = design.out * pl.nu;
  const VectorXd u0 = design.sort0 * pl.rho0;
  const VectorXd us = design.sort * rho;

  VectorXd l_u = VectorXd::Zero(n), l_uu = VectorXd::Zero(n);
  VectorXd l_ua0 = VectorXd::Zero(n), l_uas = VectorXd::Zero(n), l_ub = VectorXd::Zero(n),
           l_uu0 = VectorXd::Zero(n);
  double value = 0.0;
  FloorReport rep;
  for (Index i = 0; i < n; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    if (!design.selected(iu)) continue;
    ++rep.selected_rows;
    const Vec5 t{a0(i), as(i), b(i), u0(i), us(i)};
    const double sigma = design.y[iu] > y ? 1.0 : -1.0;
    RowJet row;
    if (design.s[iu] > s) {
      // A1 = Phi2(as, b; rs) or A2 = Phi2(as, -b; -rs).
      add_term(row, t, {1.0, kAS, kUS, sigma});
    } else {
      // A3 = Phi2(a0, b; r0) - A1 or A4 = Phi2(a0, -b; -r0) - A2.
      add_term(row, t, {1.0, kA0, kU0, sigma});
      add_term(row, t, {-1.0, kAS, kUS, sigma});
    }
    const RowLog L = row_log(row, opts);
    value += L.value;
    rep.floored_rows += L.floored;
    l_u(i) = L.grad[kUS];
    l_uu(i) = L.hess[kUS][kUS];
    l_ua0(i) = L.hess[kUS][kA0];
    l_uas(i) = L.hess[kUS][kAS];
    l_ub(i) = L.hess[kUS][kB];
    l_uu0(i) = L.hess[kUS][kU0];
  }
  if (rep.selected_rows == 0) throw EmptySelectionError("step 3: no selected observations");
  finish_floor(rep);

  const double dn = static_cast<double>(n);
  const MatrixXd& R = design.sort;
  const Index kn = design.out.cols();
  const Index kr0 = design.sort0.cols();
  Step3Result r;
  r.value = value / dn;
  r.score = R.transpose() * l_u / dn;
  r.hessian = weighted_cross(R, l_uu, R, dn);
  r.j_mu0 = weighted_cross(R, l_ua0, design.sel, dn);
  r.j_mus = weighted_cross(R, l_uas, design.sel, dn);
  r.j_theta.resize(R.cols(), kn + kr0);
  r.j_theta.leftCols(kn) = weighted_cross(R, l_ub, design.out, dn);
  r.j_theta.rightCols(kr0) = weighted_cross(R, l_uu0, design.sort0, dn);
  if (opts.want_obs) r.obs_scores = l_u.asDiagonal() * R;
  r.floor = rep;
  return r;
}

}  // namespace cdr
