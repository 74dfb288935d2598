#include "cdr/pipeline.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <exception>
#include <ostream>

#include "cdr/errors.hpp"
#include "cdr/estimator.hpp"
#include "cdr/functionals.hpp"
#include "cdr/inference.hpp"
#include "cdr/likelihood.hpp"
#include "cdr/simulate.hpp"
#include "json.hpp"

#ifndef CDR_VERSION
#define CDR_VERSION "unknown"
#endif

namespace cdr {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

using Rows = std::vector<std::vector<std::string>>;

std::string num(double v) { return format_number(v); }

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json diag_json(const CellDiagnostics& d) {
  json j;
  j["converged"] = d.converged;
  j["failed"] = d.failed;
  j["iterations"] = d.iterations;
  j["grad_norm"] = number_or_null(d.grad_norm);
  j["condition"] = number_or_null(d.condition);
  j["floor_active"] = d.floor_active;
  j["boundary_warning"] = d.boundary_warning;
  if (!d.message.empty()) j["message"] = d.message;
  return j;
}

json fit_json(const CoefficientPaths& p) {
  json j;
  j["failed_cells"] = p.failed_cells();
  j["weak_identification"] = p.weak_identification;
  j["monotone_marginal"] = p.monotone_marginal;
  j["mean_floor_active_cells"] = p.mean_floor_active_cells;
  json s1 = json::array();
  for (std::size_t k = 0; k < p.grid.ns(); ++k) {
    json c = diag_json(p.step1[k]);
    c["s"] = p.grid.s_points[k];
    s1.push_back(std::move(c));
  }
  json s2 = json::array();
  for (std::size_t j2 = 0; j2 < p.grid.ny(); ++j2) {
    json c = diag_json(p.step2[j2]);
    c["y"] = p.grid.y_points[j2];
    s2.push_back(std::move(c));
  }
  json s3 = json::array();
  for (std::size_t k = 1; k < p.grid.ns(); ++k) {
    for (std::size_t y = 0; y < p.grid.ny(); ++y) {
      json c = diag_json(p.step3[k * p.grid.ny() + y]);
      c["s"] = p.grid.s_points[k];
      c["y"] = p.grid.y_points[y];
      s3.push_back(std::move(c));
    }
  }
  j["step1"] = std::move(s1);
  j["step2"] = std::move(s2);
  j["step3"] = std::move(s3);
  return j;
}

// Everything a command produces, in write order.
struct Output {
  fs::path dir;
  json manifest;
  std::vector<std::string> files;

  void csv(const std::string& name, const std::vector<std::string>& header, const Rows& rows) {
    write_csv((dir / name).string(), header, rows);
    files.push_back(name);
  }
};

struct Prepared {
  IngestResult data;
  CovariateLayout layout;
  GridSpec grid;
};

Prepared prepare(const RunConfig& cfg, Output& out) {
  if (cfg.input.empty()) throw ConfigError("input is required");
  Prepared p{ingest(cfg.input, cfg), {}, {}};
  p.layout = layout_from_config(p.data.table, cfg);
  p.grid = grid_from_config(p.data.table, cfg);
  json d;
  d["rows"] = p.data.table.n();
  d["selected"] = p.data.table.n_selected();
  d["outcome_at_censored"] = p.data.outcome_at_censored;
  d["covariates"] = p.data.table.z_names;
  d["warnings"] = p.data.warnings;
  out.manifest["data"] = std::move(d);
  out.manifest["grid"] = {{"s", p.grid.s_points}, {"y", p.grid.y_points}};
  return p;
}

FitOptions fit_options(const RunConfig& cfg) {
  FitOptions o;
  o.floor = floor_with_tau(cfg.floor_tau);
  o.workers = cfg.workers;
  return o;
}

InfluenceOptions influence_options(const RunConfig& cfg) {
  InfluenceOptions o;
  o.floor = floor_with_tau(cfg.floor_tau);
  o.workers = cfg.workers;
  return o;
}

// Reference point z0: configured values, 1 on the intercept, sample means
// elsewhere.
VectorXd reference_point(const ObservationTable& t, const RunConfig& cfg) {
  for (const auto& [name, v] : cfg.reference) {
    if (std::find(t.z_names.begin(), t.z_names.end(), name) == t.z_names.end()) {
      throw ConfigError("reference: unknown covariate '" + name + "'");
    }
  }
  const std::size_t icol = intercept_column(t);
  VectorXd z0(t.z.cols());
  for (Eigen::Index k = 0; k < t.z.cols(); ++k) {
    const auto it = cfg.reference.find(t.z_names[static_cast<std::size_t>(k)]);
    if (it != cfg.reference.end()) {
      z0(k) = it->second;
    } else if (static_cast<std::size_t>(k) == icol) {
      z0(k) = 1.0;
    } else {
      z0(k) = t.z.col(k).mean();
    }
  }
  return z0;
}

double dot_on(const VectorXd& z0, const std::vector<std::size_t>& cols, const VectorXd& coef) {
  double u = 0.0;
  for (std::size_t k = 0; k < cols.size(); ++k) u += z0(static_cast<Eigen::Index>(cols[k])) * coef(static_cast<Eigen::Index>(k));
  return u;
}

void coefficient_rows(const CoefficientPaths& p, const InfluenceRecords& rec, const ObservationTable& t,
                      const std::string& group, Rows& rows) {
  const double n = static_cast<double>(rec.n);
  auto se_of = [&](const MatrixXd& psi, Eigen::Index c) { return std::sqrt(psi.col(c).squaredNorm() / n / n); };
  auto emit = [&](const char* block, const std::string& s, const std::string& y, const std::vector<std::size_t>& cols,
                  const VectorXd& est, const MatrixXd& psi, Eigen::Index offset) {
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const auto c = static_cast<Eigen::Index>(k);
      std::vector<std::string> r;
      if (!group.empty()) r.push_back(group);
      for (auto&& f : {std::string(block), s, y, t.z_names[cols[k]], num(est(c)), num(se_of(psi, offset + c))}) {
        r.push_back(f);
      }
      rows.push_back(std::move(r));
    }
  };
  const auto& g = p.grid;
  const auto d_nu = static_cast<Eigen::Index>(p.layout.outcome.size());
  for (std::size_t k = 0; k < g.ns(); ++k) emit("mu", num(g.s_points[k]), "", p.layout.selection, p.mu[k], rec.psi_mu[k], 0);
  for (std::size_t j = 0; j < g.ny(); ++j) emit("nu", "", num(g.y_points[j]), p.layout.outcome, p.nu[j], rec.psi_theta[j], 0);
  for (std::size_t j = 0; j < g.ny(); ++j) {
    emit("rho", num(0.0), num(g.y_points[j]), p.layout.sorting0, p.rho0[j], rec.psi_theta[j], d_nu);
  }
  for (std::size_t c = 0; c < rec.cells.size(); ++c) {
    const CellKey key = rec.cells[c];
    if (key.s == 0) continue;
    emit("rho", num(g.s_points[key.s]), num(g.y_points[key.y]), p.layout.sorting, rec.estimate[c], rec.psi_rho[c], 0);
  }
}

std::vector<std::string> coefficient_header(bool grouped) {
  std::vector<std::string> h{"block", "s", "y", "coefficient", "estimate", "se"};
  if (grouped) h.insert(h.begin(), "group");
  return h;
}

// g(z0'rho) over the grid in long format. Failed cells are filled by linear
// interpolation in y within the same s for display and marked as such.
struct PlotCell {
  double estimate = std::nan("");
  double lower = std::nan("");
  double upper = std::nan("");
  bool interpolated = false;
};

Rows sorting_plot(const CoefficientPaths& p, const VectorXd& z0, const BandSet* bands) {
  const auto& g = p.grid;
  std::vector<PlotCell> cells(g.ns() * g.ny());
  for (std::size_t k = 0; k < g.ns(); ++k) {
    for (std::size_t j = 0; j < g.ny(); ++j) {
      PlotCell& c = cells[k * g.ny() + j];
      if (k == 0) {
        c.estimate = link(dot_on(z0, p.layout.sorting0, p.rho0[j]));
      } else if (!p.step3[k * g.ny() + j].failed && p.rho_at(k, j).size() > 0) {
        c.estimate = link(dot_on(z0, p.layout.sorting, p.rho_at(k, j)));
      }
    }
  }
  if (bands) {
    for (std::size_t c = 0; c < bands->cells.size(); ++c) {
      PlotCell& pc = cells[bands->cells[c].s * g.ny() + bands->cells[c].y];
      pc.lower = bands->lower[c];
      pc.upper = bands->upper[c];
    }
  }
  for (std::size_t k = 1; k < g.ns(); ++k) {
    for (std::size_t j = 0; j < g.ny(); ++j) {
      PlotCell& c = cells[k * g.ny() + j];
      if (!std::isnan(c.estimate)) continue;
      std::ptrdiff_t lo = static_cast<std::ptrdiff_t>(j) - 1;
      std::size_t hi = j + 1;
      while (lo >= 0 && std::isnan(cells[k * g.ny() + static_cast<std::size_t>(lo)].estimate)) --lo;
      while (hi < g.ny() && std::isnan(cells[k * g.ny() + hi].estimate)) ++hi;
      const bool has_lo = lo >= 0;
      const bool has_hi = hi < g.ny();
      if (!has_lo && !has_hi) continue;
      const auto ulo = static_cast<std::size_t>(has_lo ? lo : 0);
      if (has_lo && has_hi) {
        const double w = (g.y_points[j] - g.y_points[ulo]) / (g.y_points[hi] - g.y_points[ulo]);
        c.estimate = (1.0 - w) * cells[k * g.ny() + ulo].estimate + w * cells[k * g.ny() + hi].estimate;
      } else {
        c.estimate = cells[k * g.ny() + (has_lo ? ulo : hi)].estimate;
      }
      c.interpolated = true;
    }
  }
  Rows rows;
  for (std::size_t k = 0; k < g.ns(); ++k) {
    for (std::size_t j = 0; j < g.ny(); ++j) {
      const PlotCell& c = cells[k * g.ny() + j];
      rows.push_back({num(g.s_points[k]), std::to_string(j), num(g.y_points[j]), num(c.estimate), num(c.lower),
                      num(c.upper), c.interpolated ? "1" : "0"});
    }
  }
  return rows;
}

const std::vector<std::string> kPlotHeader{"s", "y_index", "y", "sorting", "lower", "upper", "interpolated"};

json config_echo(const RunConfig& cfg) {
  json j = json::object();
  for (const auto& [k, v] : cfg.raw) {
    if (!is_runtime_key(k)) j[k] = v;
  }
  return j;
}

void do_fit(const RunConfig& cfg, Output& out) {
  Prepared p = prepare(cfg, out);
  const auto paths = fit(p.data.table, p.grid, p.layout, fit_options(cfg));
  out.manifest["fit"] = fit_json(paths);
  const auto rec = influence(paths, p.data.table, influence_options(cfg));
  Rows coef;
  coefficient_rows(paths, rec, p.data.table, "", coef);
  out.csv("coefficients.csv", coefficient_header(false), coef);
  out.csv("sorting_plot.csv", kPlotHeader, sorting_plot(paths, reference_point(p.data.table, cfg), nullptr));
}

void do_bands(const RunConfig& cfg, Output& out) {
  Prepared p = prepare(cfg, out);
  const auto paths = fit(p.data.table, p.grid, p.layout, fit_options(cfg));
  out.manifest["fit"] = fit_json(paths);
  const auto rec = influence(paths, p.data.table, influence_options(cfg));
  const VectorXd z0 = reference_point(p.data.table, cfg);
  const auto draws = bootstrap_draws(rec, cfg.bootstrap_b, cfg.seed, cfg.workers);
  const auto var = variance_rho(rec);
  const auto fun = sorting_contrasts(rec, p.layout, z0);
  const auto cv = max_t_critical(draws, rec, var, fun, cfg.level, {},
                                 cfg.strict_degenerate ? DegeneratePolicy::kStrict : DegeneratePolicy::kDropAndFlag);
  const BandSet b = band(rec, var, fun, cv.cv, cfg.level);

  Rows coef;
  coefficient_rows(paths, rec, p.data.table, "", coef);
  out.csv("coefficients.csv", coefficient_header(false), coef);
  Rows rows;
  for (std::size_t c = 0; c < b.cells.size(); ++c) {
    rows.push_back({num(p.grid.s_points[b.cells[c].s]), num(p.grid.y_points[b.cells[c].y]), num(b.estimate[c]),
                    num(b.lower[c]), num(b.upper[c]), num(b.se[c]), num(b.critical_value), num(b.level),
                    b.degenerate[c] ? "1" : "0"});
  }
  out.csv("bands.csv", {"s", "y", "estimate", "lower", "upper", "se", "cv", "level", "degenerate"}, rows);
  out.csv("sorting_plot.csv", kPlotHeader, sorting_plot(paths, z0, &b));

  json bj;
  bj["B"] = cfg.bootstrap_b;
  bj["level"] = cfg.level;
  bj["critical_value"] = number_or_null(cv.cv);
  bj["reference"] = std::vector<double>(z0.data(), z0.data() + z0.size());
  json dropped = json::array();
  for (std::size_t c : cv.dropped) {
    dropped.push_back({{"s", p.grid.s_points[rec.cells[c].s]}, {"y", p.grid.y_points[rec.cells[c].y]}});
  }
  bj["degenerate_cells"] = std::move(dropped);
  out.manifest["bands"] = std::move(bj);
}

void do_decompose(const RunConfig& cfg, Output& out) {
  if (cfg.group_column.empty()) throw ConfigError("decompose needs columns.group");
  Prepared p = prepare(cfg, out);
  const auto order = parse_component_order(cfg.order);
  GroupInputs g1{{}, p.data.table.group_rows(cfg.group1)};
  GroupInputs g0{{}, p.data.table.group_rows(cfg.group0)};
  g1.paths = fit(g1.covariates, p.grid, p.layout, fit_options(cfg));
  g0.paths = fit(g0.covariates, p.grid, p.layout, fit_options(cfg));
  out.manifest["fit"] = {{"group1", fit_json(g1.paths)}, {"group0", fit_json(g0.paths)}};
  const auto r1 = influence(g1.paths, g1.covariates, influence_options(cfg));
  const auto r0 = influence(g0.paths, g0.covariates, influence_options(cfg));

  Rows coef;
  coefficient_rows(g1.paths, r1, g1.covariates, std::to_string(cfg.group1), coef);
  coefficient_rows(g0.paths, r0, g0.covariates, std::to_string(cfg.group0), coef);
  out.csv("coefficients.csv", coefficient_header(true), coef);

  const auto table = wage_decomposition(g1, g0, cfg.s_lo, cfg.s_hi, cfg.taus, order, cfg.workers);
  const auto wb = wage_decomposition_bootstrap(g1, r1, g0, r0, cfg.s_lo, cfg.s_hi, cfg.taus, cfg.bootstrap_b,
                                               cfg.seed, cfg.level, order, cfg.workers);
  std::vector<std::string> header{"tau", "total", "total_lower", "total_upper"};
  const std::array<Component, 4> all{Component::kWageStructure, Component::kSelectionSorting,
                                     Component::kSelectionStructure, Component::kComposition};
  for (Component c : all) {
    header.push_back(component_name(c));
    header.push_back(component_name(c) + "_lower");
    header.push_back(component_name(c) + "_upper");
  }
  Rows rows;
  Rows plot;
  for (std::size_t q = 0; q < cfg.taus.size(); ++q) {
    std::vector<std::string> r{num(cfg.taus[q]), num(table.total[q]), num(wb.total.lower[q]), num(wb.total.upper[q])};
    plot.push_back({"wage", num(cfg.taus[q]), "total", num(table.total[q]), num(wb.total.lower[q]),
                    num(wb.total.upper[q])});
    for (Component c : all) {
      const auto i = static_cast<std::size_t>(c);
      r.push_back(num(table.components[i][q]));
      r.push_back(num(wb.components[i].lower[q]));
      r.push_back(num(wb.components[i].upper[q]));
      plot.push_back({"wage", num(cfg.taus[q]), component_name(c), num(table.components[i][q]),
                      num(wb.components[i].lower[q]), num(wb.components[i].upper[q])});
    }
    rows.push_back(std::move(r));
  }
  out.csv("decomposition.csv", header, rows);

  const std::vector<double> hs = cfg.hours_s.empty() ? p.grid.s_points : cfg.hours_s;
  const auto ht = hours_decomposition(g1, g0, hs);
  const auto hb = hours_decomposition_bootstrap(g1, r1, g0, r0, hs, cfg.bootstrap_b, cfg.seed, cfg.level, cfg.workers);
  Rows hrows;
  struct Series {
    const char* name;
    const std::vector<double>* value;
    const PercentileBand* band;
  };
  const std::array<Series, 6> series{Series{"f00", &ht.f00, &hb.f00}, Series{"f10", &ht.f10, &hb.f10},
                                     Series{"f11", &ht.f11, &hb.f11}, Series{"total", &ht.total, &hb.total},
                                     Series{"structure", &ht.structure, &hb.structure},
                                     Series{"composition", &ht.composition, &hb.composition}};
  std::vector<std::string> hheader{"s"};
  for (const auto& sr : series) {
    hheader.push_back(sr.name);
    hheader.push_back(std::string(sr.name) + "_lower");
    hheader.push_back(std::string(sr.name) + "_upper");
  }
  for (std::size_t k = 0; k < hs.size(); ++k) {
    std::vector<std::string> r{num(hs[k])};
    for (const auto& sr : series) {
      r.push_back(num((*sr.value)[k]));
      r.push_back(num(sr.band->lower[k]));
      r.push_back(num(sr.band->upper[k]));
      if (std::string(sr.name) == "total" || std::string(sr.name) == "structure" ||
          std::string(sr.name) == "composition") {
        plot.push_back({"hours", num(hs[k]), sr.name, num((*sr.value)[k]), num(sr.band->lower[k]),
                        num(sr.band->upper[k])});
      }
    }
    hrows.push_back(std::move(r));
  }
  out.csv("hours.csv", hheader, hrows);
  out.csv("decomposition_plot.csv", {"measure", "x", "component", "value", "lower", "upper"}, plot);

  json dj;
  dj["s_lo"] = cfg.s_lo;
  dj["s_hi"] = number_or_null(cfg.s_hi);
  dj["order"] = cfg.order;
  dj["B"] = cfg.bootstrap_b;
  dj["level"] = cfg.level;
  dj["group1_rows"] = g1.covariates.n();
  dj["group0_rows"] = g0.covariates.n();
  out.manifest["decompose"] = std::move(dj);
}

HsmParams hsm_params(const SimulateGroupConfig& g) {
  HsmParams p;
  p.mu = Eigen::Map<const VectorXd>(g.mu.data(), static_cast<Eigen::Index>(g.mu.size()));
  p.nu = Eigen::Map<const VectorXd>(g.nu.data(), static_cast<Eigen::Index>(g.nu.size()));
  p.sigma_u = g.sigma_u;
  p.sigma_v = g.sigma_v;
  p.rho = g.rho;
  p.sampler = CovariateSampler::standard();
  p.sampler.columns[1].p1 = g.x1_mean;
  p.sampler.columns[1].p2 = g.x1_sd;
  p.sampler.columns[2].p1 = g.z1_p;
  return p;
}

ObservationTable simulate_group(const SimulateGroupConfig& g, std::size_t n, std::uint64_t seed, int workers) {
  const HsmParams p = hsm_params(g);
  if (g.model == "hsm") return simulate_hsm(n, p, seed).table;
  std::vector<double> knots{0.0};
  knots.insert(knots.end(), g.rho_knots.begin(), g.rho_knots.end());
  auto rho_of = [g](double s, double) {
    for (std::size_t k = 0; k < g.rho_knots.size(); ++k) {
      if (s <= g.rho_knots[k]) return g.rho_values[k];
    }
    return g.rho_values.back();
  };
  return simulate_bdr(n, hsm_as_bdr(p, rho_of, knots), p.sampler, seed, workers);
}

ObservationTable concatenate(const ObservationTable& a, const ObservationTable& b) {
  ObservationTable t = a;
  t.s.insert(t.s.end(), b.s.begin(), b.s.end());
  t.y.insert(t.y.end(), b.y.begin(), b.y.end());
  t.group.insert(t.group.end(), b.group.begin(), b.group.end());
  t.z.resize(a.z.rows() + b.z.rows(), a.z.cols());
  t.z << a.z, b.z;
  return t;
}

void do_simulate(const RunConfig& cfg, Output& out) {
  const auto& sim = cfg.simulate;
  ObservationTable t = simulate_group(sim.group0, sim.n, cfg.seed, cfg.workers);
  if (sim.two_groups) {
    t.group.assign(t.n(), cfg.group0);
    ObservationTable t1 = simulate_group(sim.group1, sim.n, cfg.seed + 1, cfg.workers);
    t1.group.assign(t1.n(), cfg.group1);
    t = concatenate(t1, t);
  }
  write_table_csv((out.dir / "data.csv").string(), t);
  out.files.push_back("data.csv");
  out.manifest["data"] = {{"rows", t.n()}, {"selected", t.n_selected()}, {"covariates", t.z_names}};
}

const char* error_class(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
  if (dynamic_cast<const DataError*>(&e)) return "DataError";
  if (dynamic_cast<const FitError*>(&e)) return "FitError";
  if (dynamic_cast<const SingularHessianError*>(&e)) return "SingularHessianError";
  if (dynamic_cast<const DegenerateCellError*>(&e)) return "DegenerateCellError";
  if (dynamic_cast<const EmptyStratumError*>(&e)) return "EmptyStratumError";
  if (dynamic_cast<const NumericalError*>(&e)) return "NumericalError";
  if (dynamic_cast<const OffGridError*>(&e)) return "OffGridError";
  if (dynamic_cast<const InvalidDgpError*>(&e)) return "InvalidDgpError";
  if (dynamic_cast<const std::invalid_argument*>(&e)) return "InvalidArgument";
  if (dynamic_cast<const std::domain_error*>(&e)) return "DomainError";
  return "Error";
}

json error_object(const std::exception& e) {
  json j;
  j["class"] = error_class(e);
  j["message"] = e.what();
  j["exit_code"] = exit_code_for(e);
  if (const auto* d = dynamic_cast<const DataError*>(&e); d && d->row()) j["row"] = *d->row();
  if (const auto* f = dynamic_cast<const FitError*>(&e)) j["cell"] = f->cell();
  if (const auto* h = dynamic_cast<const SingularHessianError*>(&e)) j["cell"] = h->cell();
  return j;
}

}  // namespace

std::string command_name(Command c) {
  switch (c) {
    case Command::kFit: return "fit";
    case Command::kBands: return "bands";
    case Command::kDecompose: return "decompose";
    case Command::kSimulate: return "simulate";
  }
  return "unknown";
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const OffGridError*>(&e) ||
      dynamic_cast<const std::invalid_argument*>(&e) || dynamic_cast<const std::domain_error*>(&e)) {
    return 2;
  }
  if (dynamic_cast<const DataError*>(&e)) return 3;
  if (dynamic_cast<const NumericalError*>(&e)) return 4;
  return 1;
}

std::string error_json(const std::exception& e) { return error_object(e).dump(); }

namespace {

// Runs body and writes the manifest whatever happens.
int execute(Command command, const RunConfig& config, std::ostream& err, const std::function<void(Output&)>& body) {
  Output out;
  out.dir = config.output_dir;
  out.manifest["command"] = command_name(command);
  out.manifest["status"] = "ok";
  out.manifest["config"] = config_echo(config);
  out.manifest["seed"] = config.seed;
  out.manifest["versions"] = {{"cdr", CDR_VERSION},
                              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                            "." + std::to_string(EIGEN_MINOR_VERSION)},
                              {"compiler", __VERSION__}};
  int code = 0;
  bool have_dir = false;
  try {
    std::error_code ec;
    fs::create_directories(out.dir, ec);
    have_dir = !ec && fs::is_directory(out.dir);
    if (!have_dir) throw ConfigError("cannot create output directory " + out.dir.string());
    body(out);
  } catch (const std::exception& e) {
    code = exit_code_for(e);
    out.manifest["status"] = "error";
    out.manifest["error"] = error_object(e);
    err << error_json(e) << '\n';
  }
  out.manifest["exit_code"] = code;
  out.manifest["outputs"] = out.files;
  if (!have_dir) return code;
  std::ofstream mf(out.dir / "manifest.json", std::ios::binary);
  mf << out.manifest.dump(2) << '\n';
  if (!mf && code == 0) {
    err << error_json(ConfigError("cannot write manifest in " + out.dir.string())) << '\n';
    return 2;
  }
  return code;
}

}  // namespace

int run(Command command, const RunConfig& config, std::ostream& err) {
  return execute(command, config, err, [&](Output& out) {
    switch (command) {
      case Command::kFit: do_fit(config, out); break;
      case Command::kBands: do_bands(config, out); break;
      case Command::kDecompose: do_decompose(config, out); break;
      case Command::kSimulate: do_simulate(config, out); break;
    }
  });
}

int run(Command command, const ConfigMap& kv, std::ostream& err) {
  RunConfig config;
  try {
    config = parse_config(kv);
  } catch (const std::exception& e) {
    RunConfig partial;
    partial.raw = kv;
    if (const auto it = kv.find("output_dir"); it != kv.end()) partial.output_dir = it->second;
    const std::exception_ptr failure = std::current_exception();
    return execute(command, partial, err, [&](Output&) { std::rethrow_exception(failure); });
  }
  return run(command, config, err);
}

}  // namespace cdr
