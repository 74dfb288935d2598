#pragma once

// Distribution functionals of a fitted model, the generalized quantile
// operator and the wage and hours decompositions between two groups.
//
// Covariate distributions are the empirical distributions of each group's
// rows. All (s, y) arguments must lie on the fitted grid; s_hi may be +inf.

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cdr/data.hpp"
#include "cdr/estimator.hpp"
#include "cdr/inference.hpp"

namespace cdr {

struct GroupInputs {
  CoefficientPaths paths;
  ObservationTable covariates;
};

// A probability with a flag set when noise pushed it outside its bounds
// (Frechet bounds for joints, [0, 1] for clipped conditional CDFs).
struct FlaggedValue {
  double value = 0.0;
  bool flagged = false;
};

double marginal_cdf_outcome(const GroupInputs& g, double y);
double marginal_cdf_selection(const GroupInputs& g, double s);
FlaggedValue joint_cdf(const GroupInputs& g, double s, double y);

// F_Y(y | s_lo < S* <= s_hi). Throws EmptyStratumError when the stratum has
// probability <= 1e-10.
FlaggedValue conditional_cdf_by_interval(const GroupInputs& g, double s_lo, double s_hi, double y);

// nu from t, rho from j, mu from r, covariate rows from k.
FlaggedValue counterfactual_cdf(const GroupInputs& t, const GroupInputs& j, const GroupInputs& r,
                                const GroupInputs& k, double s_lo, double s_hi, double y);

// Same over every y of the grid.
std::vector<FlaggedValue> counterfactual_cdf_path(const GroupInputs& t, const GroupInputs& j, const GroupInputs& r,
                                                  const GroupInputs& k, double s_lo, double s_hi, int workers = 1);

// Left inverse of the rearranged CDF on an ascending grid. F is 0 below the
// first grid point and 1 at or above the last one. Throws std::domain_error
// for tau outside (0, 1).
double generalized_quantile(const std::vector<double>& y_grid, std::vector<double> F, double tau);

enum class Component { kWageStructure = 0, kSelectionSorting = 1, kSelectionStructure = 2, kComposition = 3 };

// Order in which components are switched from group 1 to group 0.
using ComponentOrder = std::array<Component, 4>;
inline constexpr ComponentOrder kDefaultOrder = {Component::kWageStructure, Component::kSelectionSorting,
                                                 Component::kSelectionStructure, Component::kComposition};

// Parses "wage,sorting,selection,composition" style lists.
ComponentOrder parse_component_order(const std::string& text);
std::string component_name(Component c);

struct DecompositionTable {
  std::vector<double> quantile_index;
  // Counterfactual quantiles along the switching path: [0] is all group 1,
  // [4] is all group 0.
  std::array<std::vector<double>, 5> path_quantiles;
  std::vector<double> total;
  std::array<std::vector<double>, 4> components;  // indexed by Component

  const std::vector<double>& component(Component c) const { return components[static_cast<std::size_t>(c)]; }
  // component / total; NaN where total is 0.
  std::vector<double> share(Component c) const;
};

DecompositionTable wage_decomposition(const GroupInputs& group1, const GroupInputs& group0, double s_lo, double s_hi,
                                      const std::vector<double>& taus, const ComponentOrder& order = kDefaultOrder,
                                      int workers = 1);

struct HoursTable {
  std::vector<double> s;
  std::vector<double> f00;  // F_S<0,0>
  std::vector<double> f10;  // F_S<1,0>: mu from group 1, covariates from group 0
  std::vector<double> f11;
  std::vector<double> total;        // f00 - f11
  std::vector<double> structure;    // f00 - f10
  std::vector<double> composition;  // f10 - f11
};

HoursTable hours_decomposition(const GroupInputs& group1, const GroupInputs& group0, const std::vector<double>& s_grid);

// Coefficient paths moved by one multiplier draw: eta + psi' omega / n for
// every mu(s), (nu(y), rho(0, y)) and rho(s, y) in the records.
CoefficientPaths perturb_paths(const CoefficientPaths& paths, const InfluenceRecords& records,
                               const Eigen::VectorXd& omega);

struct PercentileBand {
  std::vector<double> lower;
  std::vector<double> upper;
};

struct DecompositionBands {
  double level = 0.0;
  std::size_t B = 0;
  std::array<PercentileBand, 5> path_quantiles;
  PercentileBand total;
  std::array<PercentileBand, 4> components;
};

struct HoursBands {
  double level = 0.0;
  std::size_t B = 0;
  PercentileBand f00, f10, f11, total, structure, composition;
};

// Multiplier bootstrap of the plug-in decomposition. Each draw perturbs all
// coefficient paths of a group with one multiplier vector (independent
// streams per group) and reweights that group's covariate rows by 1 + omega.
// Bounds are pointwise percentiles at (1 -+ level) / 2.
DecompositionBands wage_decomposition_bootstrap(const GroupInputs& group1, const InfluenceRecords& records1,
                                                const GroupInputs& group0, const InfluenceRecords& records0,
                                                double s_lo, double s_hi, const std::vector<double>& taus,
                                                std::size_t B, std::uint64_t seed, double level,
                                                const ComponentOrder& order = kDefaultOrder, int workers = 1);

HoursBands hours_decomposition_bootstrap(const GroupInputs& group1, const InfluenceRecords& records1,
                                         const GroupInputs& group0, const InfluenceRecords& records0,
                                         const std::vector<double>& s_grid, std::size_t B, std::uint64_t seed,
                                         double level, int workers = 1);

}  // namespace cdr
