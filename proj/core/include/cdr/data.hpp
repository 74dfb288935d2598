#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <string>
#include <vector>

namespace cdr {

// Censored selection sample. Row i is selected (d = 1) iff s[i] > 0; y[i] is
// NaN for unselected rows. x is the sub-vector of z listed in x_cols.
struct ObservationTable {
  std::vector<double> s;
  std::vector<double> y;
  Eigen::MatrixXd z;
  std::vector<std::size_t> x_cols;
  std::vector<std::string> z_names;
  std::vector<int> group;  // empty when no group column

  std::size_t n() const { return s.size(); }
  bool selected(std::size_t i) const { return s[i] > 0.0; }
  std::size_t n_selected() const;
  Eigen::MatrixXd x() const;

  // Throws DataError on any broken invariant.
  void validate() const;
  ObservationTable subset(const std::vector<std::size_t>& rows) const;
  ObservationTable group_rows(int g) const;
};

// Column indices into z for each index of the model.
struct CovariateLayout {
  std::vector<std::size_t> selection;  // mu(s)
  std::vector<std::size_t> outcome;    // nu(y)
  std::vector<std::size_t> sorting0;   // rho(0, y), must lie within outcome
  std::vector<std::size_t> sorting;    // rho(s, y), s > 0

  void validate(const ObservationTable& table) const;
};

// Index of the first all-ones column of z, or npos.
std::size_t intercept_column(const ObservationTable& table);

// mu on all of z, nu on x, and intercept-only sorting indices.
CovariateLayout default_layout(const ObservationTable& table);

// Row-aligned design matrices for one layout.
struct Design {
  Eigen::MatrixXd sel;
  Eigen::MatrixXd out;
  Eigen::MatrixXd sort0;
  Eigen::MatrixXd sort;
  std::vector<double> s;
  std::vector<double> y;

  std::size_t n() const { return s.size(); }
  bool selected(std::size_t i) const { return s[i] > 0.0; }
};

Design make_design(const ObservationTable& table, const CovariateLayout& layout);

// Position of each sorting0 column inside the sorting layout (npos if absent).
std::vector<std::size_t> embed_positions(const CovariateLayout& layout);

}  // namespace cdr
