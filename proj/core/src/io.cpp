#include "cdr/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "cdr/errors.hpp"
#include "cdr/likelihood.hpp"

namespace cdr {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

bool parse_double(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* first = t.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  if (!parse_double(v, out)) throw ConfigError(key + ": not a number: '" + v + "'");
  return out;
}

long long to_integer(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError(key + ": not an integer: '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  if (trim(v).empty()) return out;
  for (const auto& item : split(v, ',')) out.push_back(to_double(key, item));
  return out;
}

std::vector<std::string> to_names(const std::string& v) {
  std::vector<std::string> out;
  if (trim(v).empty()) return out;
  for (const auto& item : split(v, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool parse_group_key(const std::string& key, const std::string& value, SimulateGroupConfig& g) {
  if (key == "model") {
    if (value != "hsm" && value != "step") throw ConfigError("simulate.model must be hsm or step");
    g.model = value;
  } else if (key == "mu") {
    g.mu = to_doubles(key, value);
  } else if (key == "nu") {
    g.nu = to_doubles(key, value);
  } else if (key == "sigma_u") {
    g.sigma_u = to_double(key, value);
  } else if (key == "sigma_v") {
    g.sigma_v = to_double(key, value);
  } else if (key == "rho") {
    g.rho = to_double(key, value);
  } else if (key == "rho_knots") {
    g.rho_knots = to_doubles(key, value);
  } else if (key == "rho_values") {
    g.rho_values = to_doubles(key, value);
  } else if (key == "x1_mean") {
    g.x1_mean = to_double(key, value);
  } else if (key == "x1_sd") {
    g.x1_sd = to_double(key, value);
  } else if (key == "z1_p") {
    g.z1_p = to_double(key, value);
  } else {
    return false;
  }
  return true;
}

void validate_group(const SimulateGroupConfig& g, const char* which) {
  const std::string w = which;
  if (g.mu.size() != 3) throw ConfigError(w + ".mu needs 3 values (const, x1, z1)");
  if (g.nu.size() != 2) throw ConfigError(w + ".nu needs 2 values (const, x1)");
  if (!(g.sigma_u > 0.0) || !(g.sigma_v > 0.0)) throw ConfigError(w + ": sigmas must be positive");
  if (!(std::abs(g.rho) < 1.0)) throw ConfigError(w + ".rho must lie in (-1, 1)");
  if (!(g.x1_sd > 0.0)) throw ConfigError(w + ".x1_sd must be positive");
  if (!(g.z1_p >= 0.0 && g.z1_p <= 1.0)) throw ConfigError(w + ".z1_p must lie in [0, 1]");
  if (g.model == "step") {
    if (g.rho_values.size() != g.rho_knots.size() + 1) {
      throw ConfigError(w + ": step model needs one more rho value than rho knots");
    }
    for (std::size_t k = 0; k < g.rho_knots.size(); ++k) {
      if (!(g.rho_knots[k] > 0.0) || (k > 0 && !(g.rho_knots[k] > g.rho_knots[k - 1]))) {
        throw ConfigError(w + ".rho_knots must be positive and ascending");
      }
    }
    for (double r : g.rho_values) {
      if (!(std::abs(r) < 1.0)) throw ConfigError(w + ".rho_values must lie in (-1, 1)");
    }
  }
}

bool is_missing(const std::string& t) { return t.empty() || t == "NA" || t == "nan" || t == "NaN"; }

std::size_t find_name(const std::vector<std::string>& names, const std::string& name) {
  const auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? names.size() : static_cast<std::size_t>(it - names.begin());
}

}  // namespace

ConfigMap read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  ConfigMap kv;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)).empty()) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

void apply_override(ConfigMap& kv, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || trim(assignment.substr(0, eq)).empty()) {
    throw ConfigError("override must look like key=value: '" + assignment + "'");
  }
  kv[trim(assignment.substr(0, eq))] = trim(assignment.substr(eq + 1));
}

bool is_runtime_key(const std::string& key) { return key == "workers" || key == "output_dir"; }

RunConfig parse_config(const ConfigMap& kv) {
  RunConfig c;
  c.raw = kv;
  for (const auto& [key, value] : kv) {
    if (key == "input") {
      c.input = value;
    } else if (key == "output_dir") {
      c.output_dir = value;
    } else if (key == "columns.s") {
      c.s_column = value;
    } else if (key == "columns.y") {
      c.y_column = value;
    } else if (key == "columns.group") {
      c.group_column = value;
    } else if (key == "covariates") {
      c.covariates = to_names(value);
    } else if (key == "instruments") {
      c.instruments = to_names(value);
    } else if (key == "intercept") {
      c.intercept = to_bool(key, value);
    } else if (key == "censor.point") {
      c.censor_point = to_double(key, value);
    } else if (key == "censor.direction") {
      if (value != "max" && value != "min") throw ConfigError("censor.direction must be max or min");
      c.censor_min = value == "min";
    } else if (key == "grid.s") {
      c.s_points = to_doubles(key, value);
    } else if (key == "grid.y") {
      c.y_points = to_doubles(key, value);
    } else if (key == "grid.y_quantiles") {
      c.y_quantiles = to_doubles(key, value);
    } else if (key == "sorting0") {
      c.sorting0 = to_names(value);
    } else if (key == "sorting") {
      c.sorting = to_names(value);
    } else if (key == "reference") {
      c.reference.clear();
      for (const auto& item : to_names(value)) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError("reference entries look like name:value, got '" + item + "'");
        c.reference[trim(item.substr(0, colon))] = to_double(key, item.substr(colon + 1));
      }
    } else if (key == "floor.tau") {
      c.floor_tau = to_double(key, value);
    } else if (key == "bootstrap.B") {
      const auto b = to_integer(key, value);
      if (b < 2) throw ConfigError("bootstrap.B must be at least 2");
      c.bootstrap_b = static_cast<std::size_t>(b);
    } else if (key == "level") {
      c.level = to_double(key, value);
    } else if (key == "seed") {
      const auto s = to_integer(key, value);
      if (s < 0) throw ConfigError("seed must be nonnegative");
      c.seed = static_cast<std::uint64_t>(s);
    } else if (key == "workers") {
      c.workers = static_cast<int>(to_integer(key, value));
      if (c.workers < 0) throw ConfigError("workers must be nonnegative");
    } else if (key == "degenerate") {
      if (value != "drop" && value != "strict") throw ConfigError("degenerate must be drop or strict");
      c.strict_degenerate = value == "strict";
    } else if (key == "decompose.group1") {
      c.group1 = static_cast<int>(to_integer(key, value));
    } else if (key == "decompose.group0") {
      c.group0 = static_cast<int>(to_integer(key, value));
    } else if (key == "decompose.s_lo") {
      c.s_lo = to_double(key, value);
    } else if (key == "decompose.s_hi") {
      c.s_hi = to_double(key, value);
    } else if (key == "decompose.taus") {
      c.taus = to_doubles(key, value);
    } else if (key == "decompose.order") {
      c.order = value;
    } else if (key == "decompose.hours_s") {
      c.hours_s = to_doubles(key, value);
    } else if (key == "simulate.n") {
      const auto n = to_integer(key, value);
      if (n < 1) throw ConfigError("simulate.n must be positive");
      c.simulate.n = static_cast<std::size_t>(n);
    } else if (key.rfind("simulate.g1.", 0) == 0) {
      c.simulate.two_groups = true;
      if (!parse_group_key(key.substr(12), value, c.simulate.group1)) throw ConfigError("unknown config key " + key);
    } else if (key.rfind("simulate.", 0) == 0) {
      if (!parse_group_key(key.substr(9), value, c.simulate.group0)) throw ConfigError("unknown config key " + key);
    } else {
      throw ConfigError("unknown config key " + key);
    }
  }
  // Group 1 inherits every group-0 setting it does not override.
  if (c.simulate.two_groups) {
    SimulateGroupConfig g1 = c.simulate.group0;
    for (const auto& [key, value] : kv) {
      if (key.rfind("simulate.g1.", 0) == 0) parse_group_key(key.substr(12), value, g1);
    }
    c.simulate.group1 = g1;
  }
  c.validate();
  return c;
}

void RunConfig::validate() const {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie in (0, 1)");
  if (s_points.empty() || s_points.front() != 0.0) throw ConfigError("grid.s must start at 0");
  for (std::size_t k = 1; k < s_points.size(); ++k) {
    if (!(s_points[k] > s_points[k - 1])) throw ConfigError("grid.s must be strictly ascending");
  }
  if (y_points.empty() && y_quantiles.empty()) throw ConfigError("grid.y or grid.y_quantiles is required");
  for (double p : y_quantiles) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("grid.y_quantiles must lie in (0, 1)");
  }
  floor_with_tau(floor_tau).validate();
  if (bootstrap_b < 2) throw ConfigError("bootstrap.B must be at least 2");
  for (double t : taus) {
    if (!(t > 0.0 && t < 1.0)) throw ConfigError("decompose.taus must lie in (0, 1)");
  }
  if (!(s_lo >= 0.0 && s_lo < s_hi)) throw ConfigError("decompose needs 0 <= s_lo < s_hi");
  if (group0 == group1) throw ConfigError("decompose.group0 and decompose.group1 must differ");
  if (sorting0.empty() || sorting.empty()) throw ConfigError("sorting0 and sorting need at least one covariate");
  validate_group(simulate.group0, "simulate");
  if (simulate.two_groups) validate_group(simulate.group1, "simulate.g1");
}

std::size_t CsvTable::column(const std::string& name) const {
  const std::size_t k = find_name(header, name);
  if (k == header.size()) throw DataError("missing column '" + name + "'");
  return k;
}

CsvTable read_csv_text(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool have_header = false;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header) {
      if (trim(line).empty()) continue;
      t.header = split(line, ',');
      for (auto& h : t.header) {
        if (h.size() >= 2 && h.front() == '"' && h.back() == '"') h = h.substr(1, h.size() - 2);
      }
      have_header = true;
      continue;
    }
    ++row;
    if (trim(line).empty()) continue;
    auto fields = split(line, ',');
    if (fields.size() != t.header.size()) {
      throw DataError("expected " + std::to_string(t.header.size()) + " fields, found " + std::to_string(fields.size()),
                      row);
    }
    t.rows.push_back(std::move(fields));
  }
  if (!have_header) throw DataError("CSV input has no header");
  return t;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return read_csv_text(buf.str());
}

IngestResult ingest_text(const std::string& text, const RunConfig& config) {
  const CsvTable csv = read_csv_text(text);
  const std::size_t s_col = csv.column(config.s_column);
  const std::size_t y_col = csv.column(config.y_column);
  const std::size_t g_col = config.group_column.empty() ? csv.header.size() : csv.column(config.group_column);

  auto reserved = [&](const std::string& name) {
    return name == config.s_column || name == config.y_column ||
           (!config.group_column.empty() && name == config.group_column);
  };
  std::vector<std::string> covariates = config.covariates;
  if (covariates.empty()) {
    for (const auto& h : csv.header) {
      if (!reserved(h) && find_name(config.instruments, h) == config.instruments.size()) covariates.push_back(h);
    }
  }
  std::vector<std::string> names;
  if (config.intercept) names.push_back("const");
  for (const auto& c : covariates) names.push_back(c);
  for (const auto& c : config.instruments) names.push_back(c);
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (find_name(names, names[k]) != k) throw ConfigError("covariate '" + names[k] + "' is listed twice");
    if (reserved(names[k])) throw ConfigError("column '" + names[k] + "' cannot be both a covariate and a role column");
  }
  if (config.intercept && find_name(csv.header, "const") != csv.header.size()) {
    throw ConfigError("the file has a 'const' column; set intercept = false to use it");
  }
  std::vector<std::size_t> src;  // csv column per z column, npos for the intercept
  for (const auto& nm : names) {
    src.push_back(config.intercept && nm == "const" && src.empty() ? static_cast<std::size_t>(-1) : csv.column(nm));
  }

  IngestResult res;
  ObservationTable& t = res.table;
  const std::size_t n = csv.rows.size();
  t.z_names = names;
  t.z.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(names.size()));
  for (std::size_t k = 0; k < (config.intercept ? 1 + covariates.size() : covariates.size()); ++k) t.x_cols.push_back(k);
  t.s.reserve(n);
  t.y.reserve(n);

  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = csv.rows[i];
    const std::size_t rowno = i + 1;
    double s = 0.0;
    if (!parse_double(row[s_col], s) || !std::isfinite(s)) {
      throw DataError("non-numeric selection value '" + row[s_col] + "'", rowno);
    }
    s = config.censor_min ? config.censor_point - s : s - config.censor_point;
    if (s < 0.0) throw DataError("selection value beyond the censoring point", rowno);
    double y = std::nan("");
    const std::string& ytext = row[y_col];
    if (!is_missing(ytext)) {
      if (!parse_double(ytext, y) || !std::isfinite(y)) throw DataError("non-numeric outcome '" + ytext + "'", rowno);
    }
    if (s == 0.0 && !std::isnan(y)) {
      ++res.outcome_at_censored;
      y = std::nan("");
    } else if (s > 0.0 && std::isnan(y)) {
      throw DataError("outcome missing for a selected row", rowno);
    }
    t.s.push_back(s);
    t.y.push_back(y);
    for (std::size_t k = 0; k < names.size(); ++k) {
      double v = 1.0;
      if (src[k] != static_cast<std::size_t>(-1)) {
        const std::string& cell = row[src[k]];
        if (!parse_double(cell, v) || !std::isfinite(v)) {
          throw DataError("non-numeric value '" + cell + "' in column '" + names[k] + "'", rowno);
        }
      }
      t.z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v;
    }
    if (g_col < csv.header.size()) {
      double g = 0.0;
      if (!parse_double(row[g_col], g) || g != std::floor(g) || std::abs(g) > 1e9) {
        throw DataError("group value '" + row[g_col] + "' is not an integer", rowno);
      }
      t.group.push_back(static_cast<int>(g));
    }
  }
  if (res.outcome_at_censored > 0) {
    res.warnings.push_back(std::to_string(res.outcome_at_censored) +
                           " rows with s = 0 carry an outcome; treated as missing");
  }
  t.validate();
  return res;
}

IngestResult ingest(const std::string& path, const RunConfig& config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open input file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return ingest_text(buf.str(), config);
}

std::string format_number(double v) {
  if (std::isnan(v)) return {};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t k = 0; k < fields.size(); ++k) {
      if (k) out << ',';
      out << fields[k];
    }
    out << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  if (!out) throw ConfigError("failed writing " + path);
}

void write_table_csv(const std::string& path, const ObservationTable& table) {
  const std::size_t icol = intercept_column(table);
  std::vector<std::string> header{"s", "y"};
  std::vector<std::size_t> cols;
  for (std::size_t k = 0; k < table.z_names.size(); ++k) {
    if (k == icol) continue;
    header.push_back(table.z_names[k]);
    cols.push_back(k);
  }
  if (!table.group.empty()) header.push_back("group");
  std::vector<std::vector<std::string>> rows;
  rows.reserve(table.n());
  for (std::size_t i = 0; i < table.n(); ++i) {
    std::vector<std::string> r{format_number(table.s[i]), format_number(table.y[i])};
    for (std::size_t k : cols) r.push_back(format_number(table.z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k))));
    if (!table.group.empty()) r.push_back(std::to_string(table.group[i]));
    rows.push_back(std::move(r));
  }
  write_csv(path, header, rows);
}

CovariateLayout layout_from_config(const ObservationTable& table, const RunConfig& config) {
  auto resolve = [&](const std::vector<std::string>& names, const char* key) {
    std::vector<std::size_t> out;
    for (const auto& nm : names) {
      const std::size_t k = find_name(table.z_names, nm);
      if (k == table.z_names.size()) throw ConfigError(std::string(key) + ": unknown covariate '" + nm + "'");
      out.push_back(k);
    }
    return out;
  };
  CovariateLayout layout;
  for (std::size_t k = 0; k < table.z_names.size(); ++k) layout.selection.push_back(k);
  layout.outcome = table.x_cols;
  layout.sorting0 = resolve(config.sorting0, "sorting0");
  layout.sorting = resolve(config.sorting, "sorting");
  layout.validate(table);
  return layout;
}

GridSpec grid_from_config(const ObservationTable& table, const RunConfig& config) {
  GridSpec grid;
  grid.s_points = config.s_points;
  grid.y_points = config.y_points.empty() ? selected_y_quantiles(table, config.y_quantiles) : config.y_points;
  grid.validate();
  return grid;
}

}  // namespace cdr
