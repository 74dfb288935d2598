#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cdr/errors.hpp"
#include "cdr/gauss2d.hpp"
#include "cdr/likelihood.hpp"
#include "fixtures.hpp"

using namespace cdr;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd uniform_vec(std::mt19937_64& gen, Eigen::Index k, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  VectorXd v(k);
  for (Eigen::Index i = 0; i < k; ++i) v(i) = u(gen);
  return v;
}

double positive_median_s(const Design& d) {
  std::vector<double> pos;
  for (double s : d.s) {
    if (s > 0) pos.push_back(s);
  }
  std::nth_element(pos.begin(), pos.begin() + pos.size() / 2, pos.end());
  return pos[pos.size() / 2];
}

}  // namespace

TEST(Link, Values) {
  EXPECT_EQ(link(0.0), 0.0);
  EXPECT_EQ(link_deriv(0.0), 1.0);
  EXPECT_EQ(link_second(0.0), 0.0);
  EXPECT_NEAR(link(20.0), 1.0, 1e-15);
  EXPECT_NEAR(link_deriv(20.0), 0.0, 1e-15);
  EXPECT_NEAR(link_second(20.0), 0.0, 1e-15);
  EXPECT_NEAR(link(0.5), 0.46211715726000974, 1e-15);
  EXPECT_NEAR(link_deriv(0.5), 0.7864477329659274, 1e-15);
  EXPECT_NEAR(link_second(0.5), -2 * 0.46211715726000974 * 0.7864477329659274, 1e-15);
  for (double u : {-2.0, -0.3, 0.1, 1.7}) {
    EXPECT_NEAR(link_deriv(u), (link(u + 1e-6) - link(u - 1e-6)) / 2e-6, 1e-8);
    EXPECT_NEAR(link_second(u), (link_deriv(u + 1e-6) - link_deriv(u - 1e-6)) / 2e-6, 1e-8);
  }
}

TEST(SmoothFloor, Values) {
  const FloorConfig cfg = floor_with_tau(1e-5);
  EXPECT_EQ(cfg.eps, 5e-6);
  const FloorValue at = smooth_floor(cfg.tau, cfg);
  EXPECT_EQ(at.value, cfg.tau);
  EXPECT_EQ(at.deriv, 1.0);
  const FloorValue pass = smooth_floor(0.9, cfg);
  EXPECT_EQ(pass.value, 0.9);
  EXPECT_EQ(pass.deriv, 1.0);
  EXPECT_NEAR(smooth_floor(-1e6, cfg).value, cfg.eps, 1e-20);
  EXPECT_GT(smooth_floor(-1.0, cfg).value, 0.0);
  EXPECT_THROW(floor_with_tau(0.7), ConfigError);
  EXPECT_THROW((FloorConfig{1e-5, 2e-5}.validate()), ConfigError);
}

TEST(SmoothFloor, DerivativesMatchFiniteDifferences) {
  const FloorConfig cfg = floor_with_tau(1e-3);
  for (double p : {-0.01, -1e-3, 0.0, 2e-4, 9e-4}) {
    const double h = 1e-8;
    EXPECT_NEAR(smooth_floor(p, cfg).deriv, (smooth_floor(p + h, cfg).value - smooth_floor(p - h, cfg).value) / (2 * h),
                1e-6);
    EXPECT_NEAR(smooth_floor(p, cfg).second,
                (smooth_floor(p + h, cfg).deriv - smooth_floor(p - h, cfg).deriv) / (2 * h), 1e-2);
  }
}

TEST(Step1, TrivialCases) {
  Design d;
  d.sel = MatrixXd::Ones(2, 1);
  d.s = {1.0, 0.0};
  d.y = {0.3, std::nan("")};
  const auto r = step1_loglik(VectorXd::Zero(1), d, 0.0);
  EXPECT_NEAR(r.value, std::log(0.5), 1e-15);
  EXPECT_NEAR(r.score(0), 0.0, 1e-15);

  Design one;
  one.sel = MatrixXd::Ones(1, 1);
  one.s = {1.0};
  one.y = {0.0};
  EXPECT_THROW(step1_loglik(VectorXd::Zero(1), one, 0.0), SeparationError);
}

TEST(Step1, SingleObservationValue) {
  // A one-row sample is separated; the per-row contribution is still log 0.5.
  Design d;
  d.sel = MatrixXd::Ones(2, 1);
  d.s = {2.0, 2.0};
  d.y = {0.0, 0.0};
  EXPECT_THROW(step1_loglik(VectorXd::Zero(1), d, 1.0), SeparationError);
  d.s = {2.0, 0.5};
  EXPECT_NEAR(step1_loglik(VectorXd::Zero(1), d, 1.0).value, std::log(0.5), 1e-15);
}

TEST(Step1, DerivativesAndConcavity) {
  const auto table = fixture::small_sample(50, 1);
  const Design d = make_design(table, fixture::full_layout());
  std::mt19937_64 gen(2);
  for (int rep = 0; rep < 20; ++rep) {
    const VectorXd mu = uniform_vec(gen, 3, -1.5, 1.5);
    for (double s : {0.0, 1.0}) {
      const auto r = step1_loglik(mu, d, s, true);
      const VectorXd fd = fixture::fd_gradient([&](const VectorXd& m) { return step1_loglik(m, d, s).value; }, mu);
      EXPECT_LE(fixture::max_rel_err(r.score, fd), 1e-6);
      const MatrixXd fdh = fixture::fd_jacobian([&](const VectorXd& m) { return step1_loglik(m, d, s).score; }, mu);
      EXPECT_LE(fixture::max_rel_err(r.hessian, fdh), 1e-6);
      EXPECT_LE(Eigen::SelfAdjointEigenSolver<MatrixXd>(r.hessian).eigenvalues().maxCoeff(), 1e-14);
      EXPECT_LE((r.obs_scores.colwise().sum().transpose() / 50.0 - r.score).cwiseAbs().maxCoeff(), 1e-14);
    }
  }
}

TEST(Step2, ReducesToProbitWithoutCensoring) {
  const auto table = fixture::small_sample(40, 3);
  const Design d = make_design(table, fixture::full_layout());
  VectorXd mu0 = VectorXd::Zero(3);
  mu0(0) = 40.0;
  VectorXd theta(4);
  theta << 0.8, 0.4, 0.0, 0.0;
  const auto r = step2_loglik(theta, mu0, d, 1.0);
  double want = 0.0;
  for (std::size_t i = 0; i < d.n(); ++i) {
    if (!d.selected(i)) continue;
    const double b = d.out.row(static_cast<Eigen::Index>(i)).dot(theta.head(2));
    want += d.y[i] > 1.0 ? std::log(std_cdf(b)) : std::log(std_cdf(-b));
  }
  EXPECT_NEAR(r.value, want / static_cast<double>(d.n()), 1e-12);
}

TEST(Step2, Derivatives) {
  const auto table = fixture::small_sample(50, 4);
  const Design d = make_design(table, fixture::full_layout());
  std::mt19937_64 gen(5);
  for (int rep = 0; rep < 20; ++rep) {
    const VectorXd theta = uniform_vec(gen, 4, -1.0, 1.0);
    const VectorXd mu0 = uniform_vec(gen, 3, -1.0, 1.5);
    const double y = std::uniform_real_distribution<double>(0.0, 2.0)(gen);
    const auto r = step2_loglik(theta, mu0, d, y);
    const VectorXd fd = fixture::fd_gradient([&](const VectorXd& t) { return step2_loglik(t, mu0, d, y).value; }, theta);
    EXPECT_LE(fixture::max_rel_err(r.score, fd), 1e-5);
    const MatrixXd fdh =
        fixture::fd_jacobian([&](const VectorXd& t) { return step2_loglik(t, mu0, d, y).score; }, theta);
    EXPECT_LE(fixture::max_rel_err(r.hessian, fdh), 1e-5);
    const MatrixXd fdj =
        fixture::fd_jacobian([&](const VectorXd& m) { return step2_loglik(theta, m, d, y).score; }, mu0);
    EXPECT_LE(fixture::max_rel_err(r.cross_jacobian, fdj), 1e-5);
  }
}

TEST(Step2, EmptySelection) {
  Design d;
  d.sel = MatrixXd::Ones(2, 1);
  d.out = MatrixXd::Ones(2, 1);
  d.sort0 = MatrixXd::Ones(2, 1);
  d.sort = MatrixXd::Ones(2, 1);
  d.s = {0.0, 0.0};
  d.y = {std::nan(""), std::nan("")};
  EXPECT_THROW(step2_loglik(VectorXd::Zero(2), VectorXd::Zero(1), d, 0.0), EmptySelectionError);
}

TEST(Step3, CellsSumToSelectionProbability) {
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> u(-2.5, 2.5);
  std::uniform_real_distribution<double> r(-0.95, 0.95);
  for (int i = 0; i < 200; ++i) {
    const double a0 = u(gen), as = u(gen), b = u(gen);
    const auto c = cell_probabilities(a0, as, b, r(gen), r(gen));
    EXPECT_NEAR(c.a1 + c.a2 + c.a3 + c.a4, std_cdf(a0), 1e-12);
  }
}

TEST(Step3, Derivatives) {
  const auto table = fixture::small_sample(80, 7);
  const Design d = make_design(table, fixture::full_layout());
  const double s = positive_median_s(d);
  std::mt19937_64 gen(8);
  for (int rep = 0; rep < 20; ++rep) {
    Step3Plugins pl;
    pl.mu0 = uniform_vec(gen, 3, -0.5, 1.5);
    pl.mus = pl.mu0 - uniform_vec(gen, 3, 0.3, 1.0);
    pl.nu = uniform_vec(gen, 2, -1.0, 1.0);
    pl.rho0 = uniform_vec(gen, 2, -0.8, 0.8);
    const VectorXd rho = uniform_vec(gen, 3, -0.8, 0.8);
    const double y = std::uniform_real_distribution<double>(0.0, 2.0)(gen);
    const auto r = step3_loglik(rho, pl, d, s, y);
    auto score_at = [&](const Step3Plugins& p, const VectorXd& rr) { return step3_loglik(rr, p, d, s, y).score; };
    // The floor bends on a (tau - eps) = 5e-6 probability scale, so the step is small.
    const double h = 2e-6;

    const VectorXd fd =
        fixture::fd_gradient([&](const VectorXd& v) { return step3_loglik(v, pl, d, s, y).value; }, rho, h);
    EXPECT_LE(fixture::max_rel_err(r.score, fd), 1e-5);
    const MatrixXd fdh = fixture::fd_jacobian([&](const VectorXd& v) { return score_at(pl, v); }, rho, h);
    EXPECT_LE(fixture::max_rel_err(r.hessian, fdh), 1e-5);
    const MatrixXd fd0 = fixture::fd_jacobian(
        [&](const VectorXd& v) {
          Step3Plugins p = pl;
          p.mu0 = v;
          return score_at(p, rho);
        },
        pl.mu0, h);
    EXPECT_LE(fixture::max_rel_err(r.j_mu0, fd0), 1e-5);
    const MatrixXd fds = fixture::fd_jacobian(
        [&](const VectorXd& v) {
          Step3Plugins p = pl;
          p.mus = v;
          return score_at(p, rho);
        },
        pl.mus, h);
    EXPECT_LE(fixture::max_rel_err(r.j_mus, fds), 1e-5);
    VectorXd theta(4);
    theta << pl.nu, pl.rho0;
    const MatrixXd fdt = fixture::fd_jacobian(
        [&](const VectorXd& v) {
          Step3Plugins p = pl;
          p.nu = v.head(2);
          p.rho0 = v.tail(2);
          return score_at(p, rho);
        },
        theta, h);
    EXPECT_LE(fixture::max_rel_err(r.j_theta, fdt), 1e-5) << "floored rows " << r.floor.floored_rows;
  }
}

TEST(Step3, FloorChainRule) {
  // One selected row with 0 < S <= s and Y > y, where rs pushes A3 below tau.
  Design d;
  d.sel = MatrixXd::Ones(2, 1);
  d.out = MatrixXd::Ones(2, 1);
  d.sort0 = MatrixXd::Ones(2, 1);
  d.sort = MatrixXd::Ones(2, 1);
  d.s = {0.5, 0.0};
  d.y = {1.0, std::nan("")};
  Step3Plugins pl;
  pl.mu0 = VectorXd::Constant(1, 0.3);
  pl.mus = VectorXd::Constant(1, 0.2995);
  pl.nu = VectorXd::Constant(1, -0.2);
  pl.rho0 = VectorXd::Constant(1, 0.1);
  VectorXd rho = VectorXd::Constant(1, 0.1);
  LikOptions opts;
  opts.floor = floor_with_tau(1e-3);
  const auto c = cell_probabilities(0.3, 0.2995, -0.2, std::tanh(0.1), std::tanh(0.1));
  ASSERT_LT(c.a3, opts.floor.tau);
  ASSERT_GT(c.a3, 0.0);
  const auto r = step3_loglik(rho, pl, d, 1.0, 0.0, opts);
  EXPECT_EQ(r.floor.floored_rows, 1u);
  EXPECT_TRUE(r.floor.boundary_warning);
  const double h = 1e-7;
  const double fd = (step3_loglik(rho.array() + h, pl, d, 1.0, 0.0, opts).value -
                     step3_loglik(rho.array() - h, pl, d, 1.0, 0.0, opts).value) /
                    (2 * h);
  EXPECT_NEAR(r.score(0), fd, 1e-6 * std::abs(fd));
  // Unfloored slope differs by the floor derivative factor.
  LikOptions raw = opts;
  raw.floored = false;
  const auto ru = step3_loglik(rho, pl, d, 1.0, 0.0, raw);
  const FloorValue fv = smooth_floor(c.a3, opts.floor);
  EXPECT_NEAR(r.score(0), ru.score(0) * c.a3 * fv.deriv / fv.value, 1e-9 * std::abs(r.score(0)));
}
