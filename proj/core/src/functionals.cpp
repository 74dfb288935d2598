#include "cdr/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cdr/errors.hpp"
#include "cdr/gauss2d.hpp"
#include "cdr/likelihood.hpp"
#include "cdr/parallel.hpp"

namespace cdr {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kEmptyStratum = 1e-10;
constexpr double kBoundSlack = 1e-12;

// A group's covariate rows with (bootstrap) weights.
struct Rows {
  Design design;
  VectorXd w;
  double wsum = 0.0;
};

Rows make_rows(const GroupInputs& g, const VectorXd* weights = nullptr) {
  Rows r;
  r.design = make_design(g.covariates, g.paths.layout);
  const Index n = static_cast<Index>(g.covariates.n());
  if (n == 0) throw DataError("group has no covariate rows");
  r.w = weights ? *weights : VectorXd::Ones(n);
  r.wsum = r.w.sum();
  return r;
}

double wmean(const Rows& rows, const VectorXd& v) { return rows.w.dot(v) / rows.wsum; }

bool same_layout(const CovariateLayout& a, const CovariateLayout& b) {
  return a.selection == b.selection && a.outcome == b.outcome && a.sorting0 == b.sorting0 && a.sorting == b.sorting;
}

void check_compatible(const std::vector<const GroupInputs*>& groups) {
  const GroupInputs& first = *groups.front();
  for (const GroupInputs* g : groups) {
    if (!same_layout(g->paths.layout, first.paths.layout)) throw ConfigError("groups use different covariate layouts");
    if (g->paths.grid.s_points != first.paths.grid.s_points || g->paths.grid.y_points != first.paths.grid.y_points) {
      throw ConfigError("groups are fitted on different grids");
    }
    if (g->covariates.z.cols() != first.covariates.z.cols()) throw ConfigError("groups have different covariates");
  }
}

// Per-row sorting correlation at grid cell (si, yi).
VectorXd sorting_corr(const CoefficientPaths& p, const Design& d, std::size_t si, std::size_t yi) {
  VectorXd u;
  if (si == 0) {
    u = d.sort0 * p.rho0[yi];
  } else {
    const VectorXd& rho = p.rho_at(si, yi);
    if (rho.size() == 0) throw FitError("no sorting estimate", cell_label(p.grid.s_points[si], p.grid.y_points[yi]));
    u = d.sort * rho;
  }
  return u.unaryExpr([](double v) { return link(v); });
}

struct Stratum {
  std::size_t lo = 0;
  std::size_t hi = 0;
  bool hi_inf = false;
};

Stratum resolve_stratum(const GridSpec& grid, double s_lo, double s_hi) {
  if (!(s_lo >= 0.0) || !(s_lo < s_hi)) throw std::invalid_argument("stratum needs 0 <= s_lo < s_hi");
  Stratum st;
  st.lo = grid.s_index(s_lo);
  st.hi_inf = std::isinf(s_hi);
  if (!st.hi_inf) st.hi = grid.s_index(s_hi);
  return st;
}

// Numerator and denominator of the stratum ratio for one y.
FlaggedValue cf_value(const CoefficientPaths& t, const CoefficientPaths& j, const CoefficientPaths& r, const Rows& k,
                      const Stratum& st, std::size_t yi) {
  const Design& d = k.design;
  const VectorXd b = -(d.out * t.nu[yi]);
  const VectorXd a_lo = -(d.sel * r.mu[st.lo]);
  const VectorXd r_lo = sorting_corr(j, d, st.lo, yi);
  VectorXd num(b.size());
  VectorXd den(b.size());
  if (st.hi_inf) {
    for (Index i = 0; i < b.size(); ++i) {
      num(i) = std_cdf(b(i)) - biv_cdf({a_lo(i), b(i), r_lo(i)});
      den(i) = 1.0 - std_cdf(a_lo(i));
    }
  } else {
    const VectorXd a_hi = -(d.sel * r.mu[st.hi]);
    const VectorXd r_hi = sorting_corr(j, d, st.hi, yi);
    for (Index i = 0; i < b.size(); ++i) {
      num(i) = biv_cdf({a_hi(i), b(i), r_hi(i)}) - biv_cdf({a_lo(i), b(i), r_lo(i)});
      den(i) = std_cdf(a_hi(i)) - std_cdf(a_lo(i));
    }
  }
  const double dv = wmean(k, den);
  if (!(dv > kEmptyStratum)) throw EmptyStratumError("selection stratum has probability " + std::to_string(dv));
  const double ratio = wmean(k, num) / dv;
  FlaggedValue out{std::clamp(ratio, 0.0, 1.0), false};
  out.flagged = ratio < -kBoundSlack || ratio > 1.0 + kBoundSlack;
  return out;
}

std::vector<double> cf_path(const CoefficientPaths& t, const CoefficientPaths& j, const CoefficientPaths& r,
                            const Rows& k, const Stratum& st) {
  std::vector<double> out(t.grid.ny());
  for (std::size_t yi = 0; yi < out.size(); ++yi) out[yi] = cf_value(t, j, r, k, st, yi).value;
  return out;
}

using Pattern = std::array<int, 4>;  // group index per component: (t, j, r, k)

std::array<Pattern, 5> switching_path(const ComponentOrder& order) {
  std::array<Pattern, 5> path;
  Pattern cur = {1, 1, 1, 1};
  path[0] = cur;
  for (std::size_t q = 0; q < 4; ++q) {
    cur[static_cast<std::size_t>(order[q])] = 0;
    path[q + 1] = cur;
  }
  return path;
}

void validate_order(const ComponentOrder& order) {
  std::array<bool, 4> seen{};
  for (Component c : order) seen[static_cast<std::size_t>(c)] = true;
  if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
    throw ConfigError("component order must list each component once");
  }
}

void validate_taus(const std::vector<double>& taus) {
  if (taus.empty()) throw ConfigError("no quantile indices requested");
  for (double t : taus) {
    if (!(t > 0.0 && t < 1.0)) throw std::domain_error("quantile index must lie in (0, 1)");
  }
}

DecompositionTable decompose(const std::array<const CoefficientPaths*, 2>& paths, const std::array<const Rows*, 2>& rows,
                             const Stratum& st, const std::vector<double>& taus, const ComponentOrder& order,
                             int workers) {
  const auto path = switching_path(order);
  const std::vector<double>& y_grid = paths[0]->grid.y_points;
  std::array<std::vector<double>, 5> cdfs;
  parallel_for(5, workers, [&](std::size_t q) {
    const Pattern& p = path[q];
    cdfs[q] = cf_path(*paths[p[0]], *paths[p[1]], *paths[p[2]], *rows[p[3]], st);
  });
  DecompositionTable out;
  out.quantile_index = taus;
  for (std::size_t q = 0; q < 5; ++q) {
    for (double tau : taus) out.path_quantiles[q].push_back(generalized_quantile(y_grid, cdfs[q], tau));
  }
  for (std::size_t i = 0; i < taus.size(); ++i) {
    out.total.push_back(out.path_quantiles[0][i] - out.path_quantiles[4][i]);
  }
  for (std::size_t q = 0; q < 4; ++q) {
    auto& comp = out.components[static_cast<std::size_t>(order[q])];
    for (std::size_t i = 0; i < taus.size(); ++i) {
      comp.push_back(out.path_quantiles[q][i] - out.path_quantiles[q + 1][i]);
    }
  }
  return out;
}

std::vector<double> selection_cdf(const CoefficientPaths& r, const Rows& k, const std::vector<std::size_t>& s_idx) {
  std::vector<double> out;
  for (std::size_t si : s_idx) {
    const VectorXd idx = k.design.sel * r.mu[si];
    out.push_back(wmean(k, idx.unaryExpr([](double v) { return std_cdf(-v); })));
  }
  return out;
}

HoursTable hours(const std::array<const CoefficientPaths*, 2>& paths, const std::array<const Rows*, 2>& rows,
                 const std::vector<double>& s_grid) {
  std::vector<std::size_t> s_idx;
  for (double s : s_grid) s_idx.push_back(paths[0]->grid.s_index(s));
  HoursTable out;
  out.s = s_grid;
  out.f00 = selection_cdf(*paths[0], *rows[0], s_idx);
  out.f10 = selection_cdf(*paths[1], *rows[0], s_idx);
  out.f11 = selection_cdf(*paths[1], *rows[1], s_idx);
  for (std::size_t i = 0; i < s_grid.size(); ++i) {
    out.total.push_back(out.f00[i] - out.f11[i]);
    out.structure.push_back(out.f00[i] - out.f10[i]);
    out.composition.push_back(out.f10[i] - out.f11[i]);
  }
  return out;
}

// Pointwise percentile band over draws[b][i].
PercentileBand percentile_band(const std::vector<std::vector<double>>& draws, double level) {
  PercentileBand band;
  if (draws.empty()) return band;
  const double lo = 0.5 * (1.0 - level);
  const double hi = 0.5 * (1.0 + level);
  for (std::size_t i = 0; i < draws.front().size(); ++i) {
    std::vector<double> col;
    col.reserve(draws.size());
    for (const auto& d : draws) col.push_back(d[i]);
    band.lower.push_back(empirical_quantile(col, lo));
    band.upper.push_back(empirical_quantile(std::move(col), hi));
  }
  return band;
}

void check_bootstrap_args(std::size_t B, double level, const GroupInputs& g1, const InfluenceRecords& r1,
                          const GroupInputs& g0, const InfluenceRecords& r0) {
  if (B < 2) throw ConfigError("bootstrap needs B >= 2");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
  if (r1.n != g1.covariates.n() || r0.n != g0.covariates.n()) {
    throw std::invalid_argument("influence records do not match the group rows");
  }
}

struct DrawInputs {
  CoefficientPaths paths1, paths0;
  Rows rows1, rows0;
};

DrawInputs draw_inputs(std::size_t b, std::uint64_t seed, const GroupInputs& g1, const InfluenceRecords& r1,
                       const GroupInputs& g0, const InfluenceRecords& r0) {
  const VectorXd w1 = multipliers(r1.n, b, seed, Stream::kBootstrapGroup1);
  const VectorXd w0 = multipliers(r0.n, b, seed, Stream::kBootstrapGroup0);
  const VectorXd s1 = (1.0 + w1.array()).matrix();
  const VectorXd s0 = (1.0 + w0.array()).matrix();
  return {perturb_paths(g1.paths, r1, w1), perturb_paths(g0.paths, r0, w0), make_rows(g1, &s1), make_rows(g0, &s0)};
}

}  // namespace

double marginal_cdf_outcome(const GroupInputs& g, double y) {
  const std::size_t yi = g.paths.grid.y_index(y);
  const Rows rows = make_rows(g);
  const VectorXd idx = rows.design.out * g.paths.nu[yi];
  return wmean(rows, idx.unaryExpr([](double v) { return std_cdf(-v); }));
}

double marginal_cdf_selection(const GroupInputs& g, double s) {
  const std::size_t si = g.paths.grid.s_index(s);
  return selection_cdf(g.paths, make_rows(g), {si}).front();
}

FlaggedValue joint_cdf(const GroupInputs& g, double s, double y) {
  const std::size_t si = g.paths.grid.s_index(s);
  const std::size_t yi = g.paths.grid.y_index(y);
  const Rows rows = make_rows(g);
  const Design& d = rows.design;
  const VectorXd a = -(d.sel * g.paths.mu[si]);
  const VectorXd b = -(d.out * g.paths.nu[yi]);
  const VectorXd r = sorting_corr(g.paths, d, si, yi);
  VectorXd v(a.size());
  VectorXd fs(a.size());
  VectorXd fy(a.size());
  for (Index i = 0; i < a.size(); ++i) {
    v(i) = biv_cdf({a(i), b(i), r(i)});
    fs(i) = std_cdf(a(i));
    fy(i) = std_cdf(b(i));
  }
  FlaggedValue out{wmean(rows, v), false};
  const double ms = wmean(rows, fs);
  const double my = wmean(rows, fy);
  out.flagged = out.value > std::min(ms, my) + kBoundSlack || out.value < std::max(0.0, ms + my - 1.0) - kBoundSlack;
  return out;
}

FlaggedValue conditional_cdf_by_interval(const GroupInputs& g, double s_lo, double s_hi, double y) {
  return counterfactual_cdf(g, g, g, g, s_lo, s_hi, y);
}

FlaggedValue counterfactual_cdf(const GroupInputs& t, const GroupInputs& j, const GroupInputs& r,
                                const GroupInputs& k, double s_lo, double s_hi, double y) {
  check_compatible({&t, &j, &r, &k});
  const Stratum st = resolve_stratum(t.paths.grid, s_lo, s_hi);
  return cf_value(t.paths, j.paths, r.paths, make_rows(k), st, t.paths.grid.y_index(y));
}

std::vector<FlaggedValue> counterfactual_cdf_path(const GroupInputs& t, const GroupInputs& j, const GroupInputs& r,
                                                  const GroupInputs& k, double s_lo, double s_hi, int workers) {
  check_compatible({&t, &j, &r, &k});
  const Stratum st = resolve_stratum(t.paths.grid, s_lo, s_hi);
  const Rows rows = make_rows(k);
  std::vector<FlaggedValue> out(t.paths.grid.ny());
  parallel_for(out.size(), resolve_workers(workers),
               [&](std::size_t yi) { out[yi] = cf_value(t.paths, j.paths, r.paths, rows, st, yi); });
  return out;
}

double generalized_quantile(const std::vector<double>& y_grid, std::vector<double> F, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::domain_error("quantile index must lie in (0, 1)");
  if (y_grid.empty() || y_grid.size() != F.size()) throw std::invalid_argument("grid and CDF sizes differ");
  std::sort(F.begin(), F.end());
  const auto m = static_cast<std::size_t>(std::upper_bound(F.begin(), F.end(), tau) - F.begin());
  return y_grid[std::min(m, y_grid.size() - 1)];
}

ComponentOrder parse_component_order(const std::string& text) {
  ComponentOrder order{};
  std::stringstream ss(text);
  std::string item;
  std::size_t q = 0;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }), item.end());
    if (q >= 4) throw ConfigError("component order has more than four entries");
    if (item == "wage") {
      order[q++] = Component::kWageStructure;
    } else if (item == "sorting") {
      order[q++] = Component::kSelectionSorting;
    } else if (item == "selection") {
      order[q++] = Component::kSelectionStructure;
    } else if (item == "composition") {
      order[q++] = Component::kComposition;
    } else {
      throw ConfigError("unknown decomposition component '" + item + "'");
    }
  }
  if (q != 4) throw ConfigError("component order needs four entries");
  validate_order(order);
  return order;
}

std::string component_name(Component c) {
  switch (c) {
    case Component::kWageStructure:
      return "wage_structure";
    case Component::kSelectionSorting:
      return "selection_sorting";
    case Component::kSelectionStructure:
      return "selection_structure";
    case Component::kComposition:
      return "composition";
  }
  return "unknown";
}

std::vector<double> DecompositionTable::share(Component c) const {
  const auto& comp = component(c);
  std::vector<double> out;
  for (std::size_t i = 0; i < total.size(); ++i) {
    out.push_back(total[i] == 0.0 ? std::numeric_limits<double>::quiet_NaN() : comp[i] / total[i]);
  }
  return out;
}

DecompositionTable wage_decomposition(const GroupInputs& group1, const GroupInputs& group0, double s_lo, double s_hi,
                                      const std::vector<double>& taus, const ComponentOrder& order, int workers) {
  check_compatible({&group1, &group0});
  validate_order(order);
  validate_taus(taus);
  const Stratum st = resolve_stratum(group1.paths.grid, s_lo, s_hi);
  const Rows r1 = make_rows(group1);
  const Rows r0 = make_rows(group0);
  return decompose({&group0.paths, &group1.paths}, {&r0, &r1}, st, taus, order, resolve_workers(workers));
}

HoursTable hours_decomposition(const GroupInputs& group1, const GroupInputs& group0, const std::vector<double>& s_grid) {
  check_compatible({&group1, &group0});
  const Rows r1 = make_rows(group1);
  const Rows r0 = make_rows(group0);
  return hours({&group0.paths, &group1.paths}, {&r0, &r1}, s_grid);
}

CoefficientPaths perturb_paths(const CoefficientPaths& paths, const InfluenceRecords& records, const VectorXd& omega) {
  if (omega.size() != static_cast<Index>(records.n)) throw std::invalid_argument("multiplier length mismatch");
  if (records.psi_mu.size() != paths.grid.ns() || records.psi_theta.size() != paths.grid.ny()) {
    throw std::invalid_argument("influence records do not match the grid");
  }
  const double n = static_cast<double>(records.n);
  CoefficientPaths out = paths;
  for (std::size_t k = 0; k < out.mu.size(); ++k) out.mu[k] += records.psi_mu[k].transpose() * omega / n;
  for (std::size_t j = 0; j < out.nu.size(); ++j) {
    const VectorXd step = records.psi_theta[j].transpose() * omega / n;
    out.nu[j] += step.head(out.nu[j].size());
    out.rho0[j] += step.tail(out.rho0[j].size());
  }
  for (std::size_t c = 0; c < records.cells.size(); ++c) {
    const CellKey key = records.cells[c];
    if (key.s == 0) continue;
    out.rho_at(key.s, key.y) += records.psi_rho[c].transpose() * omega / n;
  }
  return out;
}

DecompositionBands wage_decomposition_bootstrap(const GroupInputs& group1, const InfluenceRecords& records1,
                                                const GroupInputs& group0, const InfluenceRecords& records0,
                                                double s_lo, double s_hi, const std::vector<double>& taus,
                                                std::size_t B, std::uint64_t seed, double level,
                                                const ComponentOrder& order, int workers) {
  check_compatible({&group1, &group0});
  check_bootstrap_args(B, level, group1, records1, group0, records0);
  validate_order(order);
  validate_taus(taus);
  const Stratum st = resolve_stratum(group1.paths.grid, s_lo, s_hi);
  std::vector<DecompositionTable> tables(B);
  parallel_for(B, resolve_workers(workers), [&](std::size_t b) {
    const DrawInputs in = draw_inputs(b, seed, group1, records1, group0, records0);
    tables[b] = decompose({&in.paths0, &in.paths1}, {&in.rows0, &in.rows1}, st, taus, order, 1);
  });
  auto collect = [&](auto&& get) {
    std::vector<std::vector<double>> draws;
    for (const auto& t : tables) draws.push_back(get(t));
    return percentile_band(draws, level);
  };
  DecompositionBands out;
  out.level = level;
  out.B = B;
  for (std::size_t q = 0; q < 5; ++q) out.path_quantiles[q] = collect([q](const DecompositionTable& t) { return t.path_quantiles[q]; });
  out.total = collect([](const DecompositionTable& t) { return t.total; });
  for (std::size_t c = 0; c < 4; ++c) out.components[c] = collect([c](const DecompositionTable& t) { return t.components[c]; });
  return out;
}

HoursBands hours_decomposition_bootstrap(const GroupInputs& group1, const InfluenceRecords& records1,
                                         const GroupInputs& group0, const InfluenceRecords& records0,
                                         const std::vector<double>& s_grid, std::size_t B, std::uint64_t seed,
                                         double level, int workers) {
  check_compatible({&group1, &group0});
  check_bootstrap_args(B, level, group1, records1, group0, records0);
  std::vector<HoursTable> tables(B);
  parallel_for(B, resolve_workers(workers), [&](std::size_t b) {
    const DrawInputs in = draw_inputs(b, seed, group1, records1, group0, records0);
    tables[b] = hours({&in.paths0, &in.paths1}, {&in.rows0, &in.rows1}, s_grid);
  });
  auto collect = [&](std::vector<double> HoursTable::*field) {
    std::vector<std::vector<double>> draws;
    for (const auto& t : tables) draws.push_back(t.*field);
    return percentile_band(draws, level);
  };
  HoursBands out;
  out.level = level;
  out.B = B;
  out.f00 = collect(&HoursTable::f00);
  out.f10 = collect(&HoursTable::f10);
  out.f11 = collect(&HoursTable::f11);
  out.total = collect(&HoursTable::total);
  out.structure = collect(&HoursTable::structure);
  out.composition = collect(&HoursTable::composition);
  return out;
}

}  // namespace cdr
