#pragma once

// Run configuration, CSV ingestion and CSV output.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "cdr/data.hpp"
#include "cdr/estimator.hpp"

namespace cdr {

// Flat key = value pairs. Later assignments win.
using ConfigMap = std::map<std::string, std::string>;

// Reads a config file: one key = value per line, '#' starts a comment.
// Throws ConfigError with the line number on malformed lines.
ConfigMap read_config_file(const std::string& path);

// Applies one "key=value" override.
void apply_override(ConfigMap& kv, const std::string& assignment);

struct SimulateGroupConfig {
  std::string model = "hsm";  // hsm or step
  std::vector<double> mu{-0.5, 0.5, 2.5};  // const, x1, z1
  std::vector<double> nu{1.0, 0.5};
  double sigma_u = 1.0;
  double sigma_v = 1.0;
  double rho = 0.5;
  // step model: rho_values[k] applies for s <= rho_knots[k], the last value
  // beyond the last knot.
  std::vector<double> rho_knots;
  std::vector<double> rho_values;
  double x1_mean = 0.0;
  double x1_sd = 1.0;
  double z1_p = 0.5;
};

struct SimulateConfig {
  std::size_t n = 2000;
  SimulateGroupConfig group0;
  bool two_groups = false;
  SimulateGroupConfig group1;
};

struct RunConfig {
  std::string input;
  std::string output_dir = "cdr_out";

  std::string s_column = "s";
  std::string y_column = "y";
  std::string group_column;  // empty: none
  std::vector<std::string> covariates;   // empty: every other column
  std::vector<std::string> instruments;  // excluded from the outcome equation
  bool intercept = true;

  // Shifted or reversed censoring: S is max(S*, point) or min(S*, point) in
  // the file and is mapped to max(., 0) on ingestion.
  double censor_point = 0.0;
  bool censor_min = false;

  std::vector<double> s_points{0.0};
  std::vector<double> y_points;       // explicit values
  std::vector<double> y_quantiles{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

  std::vector<std::string> sorting0{"const"};
  std::vector<std::string> sorting{"const"};
  std::map<std::string, double> reference;  // z0 for g(z0'rho); other sorting covariates at their means

  double floor_tau = 1e-5;
  std::size_t bootstrap_b = 500;
  double level = 0.95;
  std::uint64_t seed = 1;
  int workers = 0;
  bool strict_degenerate = false;

  int group1 = 1;
  int group0 = 0;
  double s_lo = 0.0;
  double s_hi = std::numeric_limits<double>::infinity();
  std::vector<double> taus{0.1, 0.25, 0.5, 0.75, 0.9};
  std::string order = "wage,sorting,selection,composition";
  std::vector<double> hours_s;  // empty: the s grid without 0

  SimulateConfig simulate;

  ConfigMap raw;  // as given, for the manifest

  void validate() const;
};

// Throws ConfigError on unknown keys or malformed values.
RunConfig parse_config(const ConfigMap& kv);

// Keys that do not affect results and are left out of the manifest echo.
bool is_runtime_key(const std::string& key);

struct IngestResult {
  ObservationTable table;
  std::size_t outcome_at_censored = 0;  // rows with s = 0 and y in the file
  std::vector<std::string> warnings;
};

IngestResult ingest(const std::string& path, const RunConfig& config);
IngestResult ingest_text(const std::string& text, const RunConfig& config);

// s, y, covariates other than the intercept, then group if present.
void write_table_csv(const std::string& path, const ObservationTable& table);

// %.17g, empty for NaN.
std::string format_number(double v);

// Header plus rows; fields are written as given.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::size_t column(const std::string& name) const;  // throws DataError
};

CsvTable read_csv_text(const std::string& text);
CsvTable read_csv(const std::string& path);

// Layout from covariate names on an ingested table.
CovariateLayout layout_from_config(const ObservationTable& table, const RunConfig& config);

// s grid and y grid (explicit or quantiles of the selected outcomes).
GridSpec grid_from_config(const ObservationTable& table, const RunConfig& config);

}  // namespace cdr
