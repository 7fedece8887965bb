#pragma once

#include "lccmix/estimation.hpp"

#include <map>
#include <string>
#include <vector>

namespace lccmix {

// Criterion names, all stored so that larger is better.
inline const std::vector<std::string> kCriterionNames = {"aic", "bic", "icl-map", "icl-tau", "lcc-icl"};

struct CriterionRow {
  int K = 0;
  int dimension = 0;  // D_K
  double log_lik_mle = 0.0;
  double entropy_mle = 0.0;
  double lcc_mlcce = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  double icl_map = 0.0;
  double icl_tau = 0.0;
  double lcc_icl = 0.0;

  double value(const std::string& criterion) const;  // throws ConfigError on unknown names
};

struct CriterionTable {
  long n = 0;
  std::vector<CriterionRow> rows;  // increasing K
  std::map<std::string, int> selected;

  const CriterionRow& row_for(int K) const;
};

// Penalties use (log n)/2 D_K. icl-tau and icl-map are computed at the MLE,
// lcc-icl at the MLccE.
CriterionTable compute_criteria(const std::vector<FitResult>& fits_mle, const std::vector<FitResult>& fits_mlcce,
                                long n);

// Smallest K attaining the maximum value of `criterion`.
int select_k(const CriterionTable& table, const std::string& criterion);

// pen(K) values for each sample size n.
using PenaltyGrid = std::map<long, std::vector<std::pair<int, double>>>;

// Finite-grid heuristic for the penalty conditions pen(K) > 0, pen(K) = o(n)
// and pen(K) - pen(K') -> infinity for K > K'. It cannot decide the
// asymptotic statements; it only checks their monotone finite-n shadows.
struct PenaltyReport {
  bool positive = false;
  bool vanishing_relative_to_n = false;  // pen(K)/n strictly decreasing along the n grid
  bool divergent_differences = false;    // pen(K)-pen(K') strictly increasing along the n grid
  bool passes() const { return positive && vanishing_relative_to_n && divergent_differences; }
  static constexpr const char* kind = "finite-grid heuristic";
};

PenaltyReport check_penalty_family(const PenaltyGrid& grid);

PenaltyGrid bic_penalty_grid(const std::vector<long>& n_values, const std::vector<int>& dims_by_k,
                             int k_min = 1);

// Fits both estimators for every K in [k_min, k_max] and tabulates criteria.
struct SelectionRun {
  std::vector<FitResult> mle;
  std::vector<FitResult> mlcce;
  CriterionTable table;
};

SelectionRun fit_and_select(const DataMatrix& data, CovarianceStructure covariance, Proportions proportions,
                            int k_min, int k_max, const FitConfig& config);

// Same, with explicit bounds shared by every K.
SelectionRun fit_and_select(const DataMatrix& data, const ModelFamily& family, int k_min, int k_max,
                            const FitConfig& config);

}  // namespace lccmix
