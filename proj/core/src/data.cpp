#include "cdr/data.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cdr/errors.hpp"

namespace cdr {

namespace {

constexpr std::size_t kNpos = static_cast<std::size_t>(-1);

Eigen::MatrixXd take_columns(const Eigen::MatrixXd& m, const std::vector<std::size_t>& cols) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(static_cast<Eigen::Index>(cols[j]));
  return out;
}

void check_columns(const std::vector<std::size_t>& cols, std::size_t dz, const char* what) {
  if (cols.empty()) throw ConfigError(std::string("layout: ") + what + " has no columns");
  for (std::size_t c : cols) {
    if (c >= dz) throw ConfigError(std::string("layout: ") + what + " column out of range");
  }
  std::vector<std::size_t> sorted = cols;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError(std::string("layout: ") + what + " repeats a column");
  }
}

bool contains(const std::vector<std::size_t>& v, std::size_t c) {
  return std::find(v.begin(), v.end(), c) != v.end();
}

}  // namespace

std::size_t ObservationTable::n_selected() const {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](double v) { return v > 0.0; }));
}

Eigen::MatrixXd ObservationTable::x() const { return take_columns(z, x_cols); }

void ObservationTable::validate() const {
  const std::size_t rows = s.size();
  if (y.size() != rows || static_cast<std::size_t>(z.rows()) != rows) {
    throw DataError("table columns have different lengths");
  }
  if (!group.empty() && group.size() != rows) throw DataError("group column has wrong length");
  if (!z_names.empty() && z_names.size() != static_cast<std::size_t>(z.cols())) {
    throw DataError("covariate names do not match covariate count");
  }
  for (std::size_t c : x_cols) {
    if (c >= static_cast<std::size_t>(z.cols())) throw DataError("outcome covariate not among covariates");
  }
  for (std::size_t i = 0; i < rows; ++i) {
    if (!std::isfinite(s[i]) || s[i] < 0.0) throw DataError("selection value must be finite and >= 0", i + 1);
    if (selected(i) != std::isfinite(y[i])) {
      throw DataError(selected(i) ? "outcome missing for a selected row" : "outcome present for a censored row",
                      i + 1);
    }
    if (!z.row(static_cast<Eigen::Index>(i)).allFinite()) throw DataError("non-finite covariate", i + 1);
  }
}

ObservationTable ObservationTable::subset(const std::vector<std::size_t>& rows) const {
  ObservationTable out;
  out.x_cols = x_cols;
  out.z_names = z_names;
  out.z.resize(static_cast<Eigen::Index>(rows.size()), z.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t i = rows[k];
    out.s.push_back(s[i]);
    out.y.push_back(y[i]);
    out.z.row(static_cast<Eigen::Index>(k)) = z.row(static_cast<Eigen::Index>(i));
    if (!group.empty()) out.group.push_back(group[i]);
  }
  return out;
}

ObservationTable ObservationTable::group_rows(int g) const {
  if (group.empty()) throw DataError("table has no group column");
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < group.size(); ++i) {
    if (group[i] == g) rows.push_back(i);
  }
  if (rows.empty()) throw DataError("group " + std::to_string(g) + " has no rows");
  return subset(rows);
}

void CovariateLayout::validate(const ObservationTable& table) const {
  const auto dz = static_cast<std::size_t>(table.z.cols());
  check_columns(selection, dz, "selection");
  check_columns(outcome, dz, "outcome");
  check_columns(sorting0, dz, "sorting0");
  check_columns(sorting, dz, "sorting");
  for (std::size_t c : sorting0) {
    if (!contains(outcome, c)) throw ConfigError("layout: sorting index at the censoring point may use outcome covariates only");
  }
}

std::size_t intercept_column(const ObservationTable& table) {
  for (Eigen::Index j = 0; j < table.z.cols(); ++j) {
    if ((table.z.col(j).array() == 1.0).all()) return static_cast<std::size_t>(j);
  }
  return kNpos;
}

CovariateLayout default_layout(const ObservationTable& table) {
  const std::size_t c = intercept_column(table);
  if (c == kNpos) throw ConfigError("default layout needs an all-ones covariate column");
  if (!contains(table.x_cols, c)) throw ConfigError("default layout needs the intercept among outcome covariates");
  CovariateLayout layout;
  for (Eigen::Index j = 0; j < table.z.cols(); ++j) layout.selection.push_back(static_cast<std::size_t>(j));
  layout.outcome = table.x_cols;
  layout.sorting0 = {c};
  layout.sorting = {c};
  return layout;
}

Design make_design(const ObservationTable& table, const CovariateLayout& layout) {
  layout.validate(table);
  Design d;
  d.sel = take_columns(table.z, layout.selection);
  d.out = take_columns(table.z, layout.outcome);
  d.sort0 = take_columns(table.z, layout.sorting0);
  d.sort = take_columns(table.z, layout.sorting);
  d.s = table.s;
  d.y = table.y;
  return d;
}

std::vector<std::size_t> embed_positions(const CovariateLayout& layout) {
  std::vector<std::size_t> pos;
  for (std::size_t c : layout.sorting0) {
    const auto it = std::find(layout.sorting.begin(), layout.sorting.end(), c);
    pos.push_back(it == layout.sorting.end() ? kNpos : static_cast<std::size_t>(it - layout.sorting.begin()));
  }
  return pos;
}

}  // namespace cdr
