#include "cdr/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "cdr/errors.hpp"
#include "cdr/gauss2d.hpp"
#include "cdr/parallel.hpp"

namespace cdr {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t lookup(const std::vector<double>& pts, double v, const char* axis) {
  const auto it = std::find(pts.begin(), pts.end(), v);
  if (it == pts.end()) throw OffGridError(std::string(axis) + " = " + fmt(v) + " is not a grid point");
  return static_cast<std::size_t>(it - pts.begin());
}

// Condition number of the Hessian after scaling to unit diagonal.
double scaled_condition(const MatrixXd& h) {
  const VectorXd d = h.diagonal().cwiseAbs().cwiseSqrt();
  if ((d.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
  const MatrixXd c = d.cwiseInverse().asDiagonal() * h * d.cwiseInverse().asDiagonal();
  const VectorXd ev = Eigen::SelfAdjointEigenSolver<MatrixXd>(c).eigenvalues().cwiseAbs();
  return ev.minCoeff() > 0.0 ? ev.maxCoeff() / ev.minCoeff() : std::numeric_limits<double>::infinity();
}

bool negative_definite(const MatrixXd& h) {
  return h.allFinite() && Eigen::LLT<MatrixXd>(-h).info() == Eigen::Success;
}

CellDiagnostics diagnose(const OptimReport& rep, const MatrixXd& hessian) {
  CellDiagnostics d;
  d.converged = rep.converged;
  d.failed = !rep.converged;
  d.iterations = rep.iterations;
  d.grad_norm = rep.grad_norm;
  d.condition = scaled_condition(hessian);
  d.message = rep.message;
  return d;
}

// Probit of 1(Y > y) on x over selected rows: start for nu(y).
VectorXd outcome_probit_start(const Design& design, double y, const OptimOptions& optim) {
  Design sub;
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < design.n(); ++i) {
    if (design.selected(i)) rows.push_back(static_cast<Eigen::Index>(i));
  }
  sub.sel.resize(static_cast<Eigen::Index>(rows.size()), design.out.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    sub.sel.row(static_cast<Eigen::Index>(k)) = design.out.row(rows[k]);
    sub.s.push_back(design.y[static_cast<std::size_t>(rows[k])]);
  }
  sub.y = sub.s;
  auto obj = [&](const VectorXd& v, VectorXd* g, MatrixXd* h) {
    const auto r = step1_loglik(v, sub, y);
    if (g) *g = r.score;
    if (h) *h = r.hessian;
    return r.value;
  };
  return maximize(obj, VectorXd::Zero(design.out.cols()), optim).argmax;
}

}  // namespace

void GridSpec::validate() const {
  if (s_points.empty() || s_points.front() != 0.0) throw ConfigError("grid: s points must start at 0");
  if (y_points.empty()) throw ConfigError("grid: y points are empty");
  auto ascending = [](const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (!(v[i] > v[i - 1])) return false;
    }
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  if (!ascending(s_points)) throw ConfigError("grid: s points must be finite and strictly ascending");
  if (!ascending(y_points)) throw ConfigError("grid: y points must be finite and strictly ascending");
}

std::size_t GridSpec::s_index(double s) const { return lookup(s_points, s, "s"); }
std::size_t GridSpec::y_index(double y) const { return lookup(y_points, y, "y"); }

std::size_t CoefficientPaths::failed_cells() const {
  std::size_t k = 0;
  for (const auto& d : step3) k += d.failed;
  return k;
}

std::string cell_label(double s, double y) { return "(s=" + fmt(s) + ", y=" + fmt(y) + ")"; }

VectorXd embed_rho0(const VectorXd& rho0, const CovariateLayout& layout) {
  VectorXd out = VectorXd::Zero(static_cast<Eigen::Index>(layout.sorting.size()));
  const auto pos = embed_positions(layout);
  for (std::size_t k = 0; k < pos.size(); ++k) {
    if (pos[k] < layout.sorting.size()) out(static_cast<Eigen::Index>(pos[k])) = rho0(static_cast<Eigen::Index>(k));
  }
  return out;
}

std::vector<double> selected_y_quantiles(const ObservationTable& data, const std::vector<double>& probs) {
  std::vector<double> ys;
  for (std::size_t i = 0; i < data.n(); ++i) {
    if (data.selected(i)) ys.push_back(data.y[i]);
  }
  if (ys.empty()) throw EmptySelectionError("no selected rows for outcome quantiles");
  std::sort(ys.begin(), ys.end());
  std::vector<double> out;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("quantile index outside [0, 1]");
    const double h = p * static_cast<double>(ys.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, ys.size() - 1);
    out.push_back(ys[lo] + (h - static_cast<double>(lo)) * (ys[hi] - ys[lo]));
  }
  return out;
}

CoefficientPaths fit(const ObservationTable& data, const GridSpec& grid, const CovariateLayout& layout,
                     const FitOptions& opts) {
  data.validate();
  grid.validate();
  opts.floor.validate();
  const Design design = make_design(data, layout);
  if (data.n_selected() == 0 || data.n_selected() == data.n()) {
    throw DataError("sample needs both censored and selected rows");
  }
  const int workers = resolve_workers(opts.workers);
  const std::size_t ns = grid.ns();
  const std::size_t ny = grid.ny();

  CoefficientPaths paths;
  paths.grid = grid;
  paths.layout = layout;
  paths.mu.resize(ns);
  paths.nu.resize(ny);
  paths.rho0.resize(ny);
  paths.rho.resize(ns * ny);
  paths.step1.resize(ns);
  paths.step2.resize(ny);
  paths.step3.resize(ns * ny);

  // Step 1.
  parallel_for(ns, workers, [&](std::size_t k) {
    const double s = grid.s_points[k];
    auto obj = [&](const VectorXd& v, VectorXd* g, MatrixXd* h) {
      const auto r = step1_loglik(v, design, s);
      if (g) *g = r.score;
      if (h) *h = r.hessian;
      return r.value;
    };
    const std::string cell = "step 1 (s=" + fmt(s) + ")";
    OptimResult res;
    try {
      res = maximize(obj, VectorXd::Zero(design.sel.cols()), opts.optim);
    } catch (const NumericalError& e) {
      throw FitError(e.what(), cell);
    }
    if (!res.report.converged) throw FitError("probit did not converge", cell);
    paths.mu[k] = res.argmax;
    paths.step1[k] = diagnose(res.report, step1_loglik(res.argmax, design, s).hessian);
  });

  LikOptions lik;
  lik.floor = opts.floor;

  // Step 2.
  parallel_for(ny, workers, [&](std::size_t j) {
    const double y = grid.y_points[j];
    const std::string cell = "step 2 (y=" + fmt(y) + ")";
    auto obj = [&](const VectorXd& v, VectorXd* g, MatrixXd* h) {
      const auto r = step2_loglik(v, paths.mu[0], design, y, lik);
      if (g) *g = r.score;
      if (h) *h = r.hessian;
      return r.value;
    };
    OptimResult res;
    try {
      VectorXd start = VectorXd::Zero(design.out.cols() + design.sort0.cols());
      start.head(design.out.cols()) = outcome_probit_start(design, y, opts.optim);
      res = maximize(obj, start, opts.optim);
    } catch (const NumericalError& e) {
      throw FitError(e.what(), cell);
    }
    if (!res.report.converged) throw FitError("selection-corrected probit did not converge", cell);
    const auto at = step2_loglik(res.argmax, paths.mu[0], design, y, lik);
    paths.nu[j] = res.argmax.head(design.out.cols());
    paths.rho0[j] = res.argmax.tail(design.sort0.cols());
    paths.step2[j] = diagnose(res.report, at.hessian);
    paths.step2[j].floor_active = at.floor.floored_rows > 0;
    paths.step2[j].boundary_warning = at.floor.boundary_warning;
  });
  for (const auto& d : paths.step2) {
    if (d.condition > opts.weak_condition) paths.weak_identification = true;
  }

  // Step 3.
  const std::size_t cells = (ns - 1) * ny;
  parallel_for(cells, workers, [&](std::size_t c) {
    const std::size_t k = 1 + c / ny;
    const std::size_t j = c % ny;
    const double s = grid.s_points[k];
    const double y = grid.y_points[j];
    const Step3Plugins pl{paths.mu[0], paths.mu[k], paths.nu[j], paths.rho0[j]};
    auto obj = [&](const VectorXd& v, VectorXd* g, MatrixXd* h) {
      const auto r = step3_loglik(v, pl, design, s, y, lik);
      if (g) *g = r.score;
      if (h) *h = r.hessian;
      return r.value;
    };
    CellDiagnostics& diag = paths.step3[k * ny + j];
    try {
      auto res = maximize(obj, embed_rho0(paths.rho0[j], layout), opts.optim);
      auto at = step3_loglik(res.argmax, pl, design, s, y, lik);
      // An extreme rho0 can start the search on a flat floored plateau; retry
      // from independence and keep the better optimum.
      if (!res.report.converged || !negative_definite(at.hessian)) {
        auto alt = maximize(obj, VectorXd::Zero(design.sort.cols()), opts.optim);
        if (alt.report.converged && (!res.report.converged || alt.report.value > res.report.value)) {
          res = std::move(alt);
          at = step3_loglik(res.argmax, pl, design, s, y, lik);
        }
      }
      paths.rho_at(k, j) = res.argmax;
      diag = diagnose(res.report, at.hessian);
      diag.floor_active = at.floor.floored_rows > 0;
      diag.boundary_warning = at.floor.boundary_warning;
    } catch (const NumericalError& e) {
      diag = CellDiagnostics{};
      diag.failed = true;
      diag.message = e.what();
    }
  });

  // Diagnostics that need all cells.
  double prev = -1.0;
  for (std::size_t k = 0; k < ns; ++k) {
    const VectorXd idx = design.sel * paths.mu[k];
    double m = 0.0;
    for (Eigen::Index i = 0; i < idx.size(); ++i) m += std_cdf(-idx(i));
    m /= static_cast<double>(idx.size());
    if (m < prev - 1e-12) paths.monotone_marginal = false;
    prev = m;
  }
  std::size_t floored = 0, total = 0;
  for (std::size_t c = ny; c < ns * ny; ++c) {
    floored += paths.step3[c].floor_active;
    ++total;
  }
  for (const auto& d : paths.step2) {
    floored += d.floor_active;
    ++total;
  }
  paths.mean_floor_active_cells = total ? static_cast<double>(floored) / static_cast<double>(total) : 0.0;
  return paths;
}

}  // namespace cdr
