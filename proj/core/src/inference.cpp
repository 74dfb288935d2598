#include "cdr/inference.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cdr/errors.hpp"
#include "cdr/parallel.hpp"

namespace cdr {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kSingularRcond = 1e-12;

std::string s_label(double s) { return "(s=" + std::to_string(s) + ")"; }
std::string y_label(double y) { return "(y=" + std::to_string(y) + ")"; }

// -S H^{-1} for an averaged Hessian H and per-row scores S.
MatrixXd solve_rows(const MatrixXd& h, const MatrixXd& rows, const std::string& block, const std::string& cell) {
  if (!h.allFinite()) throw SingularHessianError(block, cell);
  const VectorXd ev = Eigen::SelfAdjointEigenSolver<MatrixXd>(h).eigenvalues().cwiseAbs();
  if (ev.size() == 0 || !(ev.minCoeff() > kSingularRcond * ev.maxCoeff())) throw SingularHessianError(block, cell);
  return -h.ldlt().solve(rows.transpose()).transpose();
}

}  // namespace

std::size_t InfluenceRecords::index_of(const CellKey& key) const {
  const auto it = std::find(cells.begin(), cells.end(), key);
  if (it == cells.end()) throw OffGridError("cell not present in influence records");
  return static_cast<std::size_t>(it - cells.begin());
}

InfluenceRecords influence(const CoefficientPaths& fit, const ObservationTable& data, const InfluenceOptions& opts) {
  const Design design = make_design(data, fit.layout);
  const GridSpec& grid = fit.grid;
  const std::size_t ns = grid.ns();
  const std::size_t ny = grid.ny();
  const int workers = resolve_workers(opts.workers);
  LikOptions lik;
  lik.floor = opts.floor;
  lik.floored = false;
  lik.want_obs = true;

  InfluenceRecords rec;
  rec.n = data.n();
  rec.psi_mu.resize(ns);
  rec.psi_theta.resize(ny);

  // Step 1 influence per s.
  parallel_for(ns, workers, [&](std::size_t k) {
    const std::string cell = s_label(grid.s_points[k]);
    Step1Result r;
    try {
      r = step1_loglik(fit.mu[k], design, grid.s_points[k], true);
    } catch (const SeparationError&) {
      throw SingularHessianError(k == 0 ? "H10" : "H1s", cell);
    }
    rec.psi_mu[k] = solve_rows(r.hessian, r.obs_scores, k == 0 ? "H10" : "H1s", cell);
  });

  // Step 2 influence per y, corrected for the estimated mu0.
  parallel_for(ny, workers, [&](std::size_t j) {
    VectorXd theta(fit.nu[j].size() + fit.rho0[j].size());
    theta << fit.nu[j], fit.rho0[j];
    const auto r = step2_loglik(theta, fit.mu[0], design, grid.y_points[j], lik);
    const MatrixXd rhs = r.obs_scores + rec.psi_mu[0] * r.cross_jacobian.transpose();
    rec.psi_theta[j] = solve_rows(r.hessian, rhs, "H2y", y_label(grid.y_points[j]));
  });

  // Cells.
  const Index kn = design.out.cols();
  const Index kr0 = design.sort0.cols();
  if (opts.include_s0) {
    for (std::size_t j = 0; j < ny; ++j) rec.cells.push_back({0, j});
  }
  for (std::size_t k = 1; k < ns; ++k) {
    for (std::size_t j = 0; j < ny; ++j) {
      if (fit.step3[k * ny + j].failed || fit.rho_at(k, j).size() == 0) {
        rec.skipped.push_back({k, j});
      } else {
        rec.cells.push_back({k, j});
      }
    }
  }
  const std::size_t nc = rec.cells.size();
  rec.estimate.resize(nc);
  rec.psi_rho.resize(nc);
  rec.psi_eta.resize(nc);
  parallel_for(nc, workers, [&](std::size_t c) {
    const CellKey key = rec.cells[c];
    const std::size_t j = key.y;
    if (key.s == 0) {
      rec.estimate[c] = fit.rho0[j];
      rec.psi_rho[c] = rec.psi_theta[j].rightCols(kr0);
      MatrixXd eta(static_cast<Index>(rec.n), rec.psi_mu[0].cols() + rec.psi_theta[j].cols());
      eta << rec.psi_mu[0], rec.psi_theta[j];
      rec.psi_eta[c] = std::move(eta);
      return;
    }
    const std::size_t k = key.s;
    const double s = grid.s_points[k];
    const double y = grid.y_points[j];
    const Step3Plugins pl{fit.mu[0], fit.mu[k], fit.nu[j], fit.rho0[j]};
    const auto r = step3_loglik(fit.rho_at(k, j), pl, design, s, y, lik);
    const MatrixXd rhs = r.obs_scores + rec.psi_mu[0] * r.j_mu0.transpose() + rec.psi_mu[k] * r.j_mus.transpose() +
                         rec.psi_theta[j] * r.j_theta.transpose();
    rec.estimate[c] = fit.rho_at(k, j);
    rec.psi_rho[c] = solve_rows(r.hessian, rhs, "H3", cell_label(s, y));
    MatrixXd eta(static_cast<Index>(rec.n), 2 * rec.psi_mu[0].cols() + kn + kr0);
    eta << rec.psi_mu[0], rec.psi_mu[k], rec.psi_theta[j];
    rec.psi_eta[c] = std::move(eta);
  });
  return rec;
}

std::vector<MatrixXd> variance_rho(const InfluenceRecords& records) {
  std::vector<MatrixXd> out;
  out.reserve(records.psi_rho.size());
  const double n = static_cast<double>(records.n);
  for (const auto& psi : records.psi_rho) out.push_back(psi.transpose() * psi / n);
  return out;
}

MatrixXd cross_covariance(const InfluenceRecords& records, std::size_t a, std::size_t b) {
  return records.psi_rho.at(a).transpose() * records.psi_rho.at(b) / static_cast<double>(records.n);
}

VectorXd multipliers(std::size_t n, std::size_t b, std::uint64_t seed, Stream stream) {
  CounterRng rng(seed, stream, static_cast<std::uint32_t>(b));
  VectorXd w(static_cast<Index>(n));
  for (Index i = 0; i < w.size(); ++i) w(i) = rng.normal();
  w.array() -= w.mean();
  return w;
}

BootstrapDraws bootstrap_from_multipliers(const InfluenceRecords& records, const MatrixXd& omega) {
  if (omega.cols() != static_cast<Index>(records.n)) throw std::invalid_argument("multiplier matrix has wrong width");
  BootstrapDraws out;
  out.B = static_cast<std::size_t>(omega.rows());
  const double n = static_cast<double>(records.n);
  for (std::size_t c = 0; c < records.cells.size(); ++c) {
    MatrixXd d = omega * records.psi_rho[c] / n;
    d.rowwise() += records.estimate[c].transpose();
    out.draws.push_back(std::move(d));
  }
  return out;
}

BootstrapDraws bootstrap_draws(const InfluenceRecords& records, std::size_t B, std::uint64_t seed, int workers) {
  if (B < 2) throw ConfigError("bootstrap needs B >= 2");
  MatrixXd omega(static_cast<Index>(B), static_cast<Index>(records.n));
  parallel_for(B, resolve_workers(workers), [&](std::size_t b) {
    omega.row(static_cast<Index>(b)) = multipliers(records.n, b, seed).transpose();
  });
  return bootstrap_from_multipliers(records, omega);
}

std::vector<CellFunctional> linear_contrasts(const InfluenceRecords& records, const VectorXd& c) {
  std::vector<CellFunctional> out;
  for (const auto& est : records.estimate) {
    if (est.size() != c.size()) throw std::invalid_argument("contrast length does not match cell dimension");
    out.push_back({c.dot(est), c});
  }
  return out;
}

std::vector<CellFunctional> sorting_contrasts(const InfluenceRecords& records, const CovariateLayout& layout,
                                              const VectorXd& z0) {
  auto pick = [&](const std::vector<std::size_t>& cols) {
    VectorXd v(static_cast<Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
      if (cols[k] >= static_cast<std::size_t>(z0.size())) throw std::invalid_argument("z0 shorter than layout");
      v(static_cast<Index>(k)) = z0(static_cast<Index>(cols[k]));
    }
    return v;
  };
  const VectorXd x0 = pick(layout.sorting0);
  const VectorXd zr = pick(layout.sorting);
  std::vector<CellFunctional> out;
  for (std::size_t c = 0; c < records.cells.size(); ++c) {
    const VectorXd& at = records.cells[c].s == 0 ? x0 : zr;
    const double u = at.dot(records.estimate[c]);
    out.push_back({link(u), link_deriv(u) * at});
  }
  return out;
}

double empirical_quantile(std::vector<double> values, double level) {
  if (values.empty()) throw std::invalid_argument("empirical_quantile: empty sample");
  if (!(level > 0.0 && level < 1.0)) throw std::domain_error("level must lie in (0, 1)");
  std::sort(values.begin(), values.end());
  const auto k = static_cast<std::size_t>(std::ceil(level * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(k, 1, values.size()) - 1];
}

CriticalValue max_t_critical(const BootstrapDraws& draws, const InfluenceRecords& records,
                             const std::vector<MatrixXd>& variance, const std::vector<CellFunctional>& functionals,
                             double level, const std::vector<std::size_t>& cells, DegeneratePolicy policy) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
  std::vector<std::size_t> want = cells;
  if (want.empty()) {
    for (std::size_t c = 0; c < records.cells.size(); ++c) want.push_back(c);
  }
  const double n = static_cast<double>(records.n);
  CriticalValue out;
  std::vector<double> se;
  for (std::size_t c : want) {
    const VectorXd& g = functionals.at(c).gradient;
    const double v = g.dot(variance.at(c) * g);
    if (!(v >= kDegenerateVariance)) {
      if (policy == DegeneratePolicy::kStrict) {
        throw DegenerateCellError("zero variance at cell (s index " + std::to_string(records.cells[c].s) +
                                  ", y index " + std::to_string(records.cells[c].y) + ")");
      }
      out.dropped.push_back(c);
      continue;
    }
    out.used.push_back(c);
    se.push_back(std::sqrt(v / n));
  }
  if (out.used.empty()) throw DegenerateCellError("every requested cell has zero variance");

  std::vector<double> tmax(draws.B, 0.0);
  for (std::size_t u = 0; u < out.used.size(); ++u) {
    const std::size_t c = out.used[u];
    const VectorXd dev = (draws.draws.at(c).rowwise() - records.estimate[c].transpose()) * functionals[c].gradient;
    for (std::size_t b = 0; b < draws.B; ++b) tmax[b] = std::max(tmax[b], std::abs(dev(static_cast<Index>(b))) / se[u]);
  }
  out.cv = empirical_quantile(std::move(tmax), level);
  return out;
}

BandSet band(const InfluenceRecords& records, const std::vector<MatrixXd>& variance,
             const std::vector<CellFunctional>& functionals, double cv, double level) {
  BandSet out;
  out.critical_value = cv;
  out.level = level;
  const double n = static_cast<double>(records.n);
  for (std::size_t c = 0; c < records.cells.size(); ++c) {
    const VectorXd& g = functionals.at(c).gradient;
    const double v = g.dot(variance.at(c) * g);
    const double se = std::sqrt(std::max(v, 0.0) / n);
    const double est = functionals[c].value;
    out.cells.push_back(records.cells[c]);
    out.estimate.push_back(est);
    out.se.push_back(se);
    out.lower.push_back(est - cv * se);
    out.upper.push_back(est + cv * se);
    out.degenerate.push_back(!(v >= kDegenerateVariance));
  }
  return out;
}

}  // namespace cdr
