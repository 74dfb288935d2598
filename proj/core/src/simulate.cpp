#include "cdr/simulate.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "cdr/errors.hpp"
#include "cdr/gauss2d.hpp"
#include "cdr/parallel.hpp"

namespace cdr {

namespace {

constexpr int kValidationGrid = 4000;

std::string fmt_prob(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

using Eigen::RowVectorXd;
using Eigen::VectorXd;

RowVectorXd take(const RowVectorXd& z, const std::vector<std::size_t>& cols) {
  RowVectorXd x(static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) x(static_cast<Eigen::Index>(k)) = z(static_cast<Eigen::Index>(cols[k]));
  return x;
}

// Joint and marginal CDFs of the model, extended to s, y = +/-infinity.
struct BdrRow {
  const BdrModel& m;
  const RowVectorXd& z;
  const RowVectorXd& x;

  double fs(double s) const {
    if (s == -kInf) return 0.0;
    if (s == kInf) return 1.0;
    return std_cdf(-m.sel(s, z));
  }
  double joint(double s, double y) const {
    if (s == -kInf || y == -kInf) return 0.0;
    if (s == kInf) return y == kInf ? 1.0 : std_cdf(-m.out(y, x));
    if (y == kInf) return fs(s);
    const double r = std::tanh(m.sort(s, y, z));
    return biv_cdf({-m.sel(s, z), -m.out(y, x), r});
  }
};

std::vector<double> extended_knots(const std::vector<double>& knots) {
  std::vector<double> out;
  out.push_back(-kInf);
  out.insert(out.end(), knots.begin(), knots.end());
  out.push_back(kInf);
  return out;
}

template <class F>
double bisect(F&& increasing_minus_target, double lo, double hi) {
  for (int it = 0; it < 100 && hi - lo > 1e-12 * std::max(1.0, std::abs(lo) + std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (increasing_minus_target(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

CovariateSampler CovariateSampler::standard() {
  CovariateSampler s;
  s.columns = {
      {"const", CovariateColumn::Kind::kConstant, 1.0, 0.0, true},
      {"x1", CovariateColumn::Kind::kNormal, 0.0, 1.0, true},
      {"z1", CovariateColumn::Kind::kBernoulli, 0.5, 0.0, false},
  };
  return s;
}

RowVectorXd CovariateSampler::draw(CounterRng& rng) const {
  RowVectorXd z(static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) {
    const auto& c = columns[k];
    double v = c.p1;
    if (c.kind == CovariateColumn::Kind::kNormal) v = c.p1 + c.p2 * rng.normal();
    if (c.kind == CovariateColumn::Kind::kBernoulli) v = rng.bernoulli(c.p1) ? 1.0 : 0.0;
    z(static_cast<Eigen::Index>(k)) = v;
  }
  return z;
}

std::vector<std::size_t> CovariateSampler::outcome_columns() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < columns.size(); ++k) {
    if (columns[k].in_outcome) out.push_back(k);
  }
  return out;
}

std::vector<std::string> CovariateSampler::names() const {
  std::vector<std::string> out;
  for (const auto& c : columns) out.push_back(c.name);
  return out;
}

void HsmParams::validate() const {
  if (!(std::abs(rho) < 1.0)) throw std::invalid_argument("HSM: |rho| must be below 1");
  if (!(sigma_u > 0.0 && sigma_v > 0.0)) throw std::invalid_argument("HSM: scales must be positive");
  if (mu.size() != static_cast<Eigen::Index>(sampler.columns.size())) {
    throw std::invalid_argument("HSM: mu length must equal the covariate count");
  }
  if (nu.size() != static_cast<Eigen::Index>(sampler.outcome_columns().size())) {
    throw std::invalid_argument("HSM: nu length must equal the outcome covariate count");
  }
}

VectorXd HsmTruth::mu_at(double s) const {
  VectorXd m = params.mu;
  m(static_cast<Eigen::Index>(intercept)) -= s;
  return m / params.sigma_v;
}

VectorXd HsmTruth::nu_at(double y) const {
  const auto xcols = params.sampler.outcome_columns();
  VectorXd v = params.nu;
  for (std::size_t k = 0; k < xcols.size(); ++k) {
    if (xcols[k] == intercept) v(static_cast<Eigen::Index>(k)) -= y;
  }
  return v / params.sigma_u;
}

VectorXd HsmTruth::rho_coefs(const std::vector<std::size_t>& sorting_cols) const {
  VectorXd r = VectorXd::Zero(static_cast<Eigen::Index>(sorting_cols.size()));
  for (std::size_t k = 0; k < sorting_cols.size(); ++k) {
    if (sorting_cols[k] == intercept) r(static_cast<Eigen::Index>(k)) = std::atanh(params.rho);
  }
  return r;
}

CoefficientPaths HsmTruth::paths(const GridSpec& grid, const CovariateLayout& layout) const {
  CoefficientPaths p;
  p.grid = grid;
  p.layout = layout;
  auto pick = [](const VectorXd& full, const std::vector<std::size_t>& full_cols,
                 const std::vector<std::size_t>& want) {
    VectorXd out(static_cast<Eigen::Index>(want.size()));
    for (std::size_t k = 0; k < want.size(); ++k) {
      const auto it = std::find(full_cols.begin(), full_cols.end(), want[k]);
      out(static_cast<Eigen::Index>(k)) = it == full_cols.end() ? 0.0 : full(it - full_cols.begin());
    }
    return out;
  };
  std::vector<std::size_t> zcols(params.sampler.columns.size());
  for (std::size_t k = 0; k < zcols.size(); ++k) zcols[k] = k;
  const auto xcols = params.sampler.outcome_columns();
  for (double s : grid.s_points) p.mu.push_back(pick(mu_at(s), zcols, layout.selection));
  for (double y : grid.y_points) {
    p.nu.push_back(pick(nu_at(y), xcols, layout.outcome));
    p.rho0.push_back(rho_coefs(layout.sorting0));
  }
  p.rho.resize(grid.ns() * grid.ny());
  for (std::size_t k = 1; k < grid.ns(); ++k) {
    for (std::size_t j = 0; j < grid.ny(); ++j) p.rho_at(k, j) = rho_coefs(layout.sorting);
  }
  CellDiagnostics exact;
  exact.converged = true;
  exact.message = "true coefficients";
  p.step1.assign(grid.ns(), exact);
  p.step2.assign(grid.ny(), exact);
  p.step3.assign(grid.ns() * grid.ny(), exact);
  return p;
}

Simulated simulate_hsm(std::size_t n, const HsmParams& params, std::uint64_t seed) {
  params.validate();
  if (n == 0) throw std::invalid_argument("simulate_hsm: n must be positive");
  Simulated out;
  out.truth.params = params;
  out.truth.intercept = params.sampler.columns.size();
  for (std::size_t k = 0; k < params.sampler.columns.size(); ++k) {
    if (params.sampler.columns[k].kind == CovariateColumn::Kind::kConstant && params.sampler.columns[k].p1 == 1.0) {
      out.truth.intercept = k;
      break;
    }
  }
  if (out.truth.intercept == params.sampler.columns.size()) {
    throw std::invalid_argument("simulate_hsm: sampler needs a constant-one column");
  }

  ObservationTable& t = out.table;
  t.x_cols = params.sampler.outcome_columns();
  t.z_names = params.sampler.names();
  t.z.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(params.sampler.columns.size()));
  t.s.resize(n);
  t.y.resize(n);
  const double root = std::sqrt(1.0 - params.rho * params.rho);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng cov(seed, Stream::kCovariates, static_cast<std::uint32_t>(i));
    const RowVectorXd z = params.sampler.draw(cov);
    const RowVectorXd x = take(z, t.x_cols);
    CounterRng lat(seed, Stream::kLatent, static_cast<std::uint32_t>(i));
    const double v = lat.normal();
    const double u = params.rho * v + root * lat.normal();
    const double s_star = z.dot(params.mu) + params.sigma_v * v;
    const double y_star = x.dot(params.nu) + params.sigma_u * u;
    t.z.row(static_cast<Eigen::Index>(i)) = z;
    t.s[i] = std::max(0.0, s_star);
    t.y[i] = s_star > 0.0 ? y_star : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

void validate_bdr(const BdrModel& model, const Eigen::MatrixXd& z, const std::vector<std::size_t>& x_cols,
                  const std::vector<double>& y_check) {
  const std::vector<double> ks = extended_knots(model.s_knots);
  std::vector<double> ys;
  ys.push_back(-kInf);
  ys.insert(ys.end(), y_check.begin(), y_check.end());
  ys.push_back(kInf);
  constexpr double kSlack = 1e-9;
  std::vector<double> prev(ys.size());
  std::vector<double> cur(ys.size());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const RowVectorXd zi = z.row(i);
    const RowVectorXd xi = take(zi, x_cols);
    const BdrRow row{model, zi, xi};
    for (std::size_t b = 0; b < ys.size(); ++b) prev[b] = row.joint(ks[0], ys[b]);
    for (std::size_t a = 1; a < ks.size(); ++a) {
      if (row.fs(ks[a]) < row.fs(ks[a - 1]) - kSlack) {
        throw InvalidDgpError("selection marginal decreases between knots at covariate row " + std::to_string(i));
      }
      for (std::size_t b = 0; b < ys.size(); ++b) cur[b] = row.joint(ks[a], ys[b]);
      for (std::size_t b = 1; b < ys.size(); ++b) {
        const double mass = cur[b] - prev[b] - cur[b - 1] + prev[b - 1];
        if (mass < -kSlack) {
          throw InvalidDgpError("negative rectangle probability " + fmt_prob(mass) + " at covariate row " +
                                std::to_string(i) + ", knot interval ending at " + fmt_prob(ks[a]));
        }
      }
      std::swap(prev, cur);
    }
  }
}

ObservationTable simulate_bdr(std::size_t n, const BdrModel& model, const CovariateSampler& sampler,
                              std::uint64_t seed, int workers) {
  if (n == 0) throw std::invalid_argument("simulate_bdr: n must be positive");
  if (std::find(model.s_knots.begin(), model.s_knots.end(), 0.0) == model.s_knots.end()) {
    throw InvalidDgpError("knot grid must contain the censoring point 0");
  }
  for (std::size_t k = 1; k < model.s_knots.size(); ++k) {
    if (!(model.s_knots[k] > model.s_knots[k - 1])) throw InvalidDgpError("knots must be strictly ascending");
  }

  ObservationTable t;
  t.x_cols = sampler.outcome_columns();
  t.z_names = sampler.names();
  t.z.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(sampler.columns.size()));
  t.s.resize(n);
  t.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng cov(seed, Stream::kCovariates, static_cast<std::uint32_t>(i));
    t.z.row(static_cast<Eigen::Index>(i)) = sampler.draw(cov);
  }

  // Validity on a probe of covariate rows and a y grid spanning the bracket.
  std::vector<double> y_check;
  for (int k = 0; k <= kValidationGrid; ++k) {
    y_check.push_back(model.y_lo + (model.y_hi - model.y_lo) * k / kValidationGrid);
  }
  validate_bdr(model, t.z.topRows(std::min<Eigen::Index>(200, t.z.rows())), t.x_cols, y_check);

  const std::vector<double> ks = extended_knots(model.s_knots);
  parallel_for(n, resolve_workers(workers), [&](std::size_t i) {
    const RowVectorXd zi = t.z.row(static_cast<Eigen::Index>(i));
    const RowVectorXd xi = take(zi, t.x_cols);
    const BdrRow row{model, zi, xi};
    CounterRng lat(seed, Stream::kLatent, static_cast<std::uint32_t>(i));
    const double u1 = lat.uniform();
    const double u2 = lat.uniform();

    std::size_t a = 1;
    while (a + 1 < ks.size() && row.fs(ks[a]) < u1) ++a;
    const double lo = std::isfinite(ks[a - 1]) ? ks[a - 1] : model.s_lo;
    const double hi = std::isfinite(ks[a]) ? ks[a] : model.s_hi;
    const double s_star = bisect([&](double s) { return row.fs(s) - u1; }, lo, hi);

    const double f_lo = row.fs(ks[a - 1]);
    const double f_hi = row.fs(ks[a]);
    const double denom = f_hi - f_lo;
    auto cond = [&](double y) {
      if (!(denom > 0.0)) return std_cdf(-model.out(y, xi)) - u2;
      return (row.joint(ks[a], y) - row.joint(ks[a - 1], y)) / denom - u2;
    };
    const double y_star = bisect(cond, model.y_lo, model.y_hi);
    t.s[i] = std::max(0.0, s_star);
    t.y[i] = s_star > 0.0 ? y_star : std::numeric_limits<double>::quiet_NaN();
  });
  return t;
}

BdrModel hsm_as_bdr(const HsmParams& params, std::function<double(double, double)> rho_of,
                    std::vector<double> s_knots) {
  params.validate();
  BdrModel m;
  const VectorXd mu = params.mu;
  const VectorXd nu = params.nu;
  const double sv = params.sigma_v;
  const double su = params.sigma_u;
  m.sel = [mu, sv](double s, const RowVectorXd& z) { return (z.dot(mu) - s) / sv; };
  m.out = [nu, su](double y, const RowVectorXd& x) { return (x.dot(nu) - y) / su; };
  m.sort = [rho_of](double s, double y, const RowVectorXd&) { return std::atanh(rho_of(s, y)); };
  m.s_knots = std::move(s_knots);
  return m;
}

}  // namespace cdr
