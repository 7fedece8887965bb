#include "lccmix/selection.hpp"

#include "lccmix/errors.hpp"

#include <cmath>
#include <set>

namespace lccmix {

double CriterionRow::value(const std::string& criterion) const {
  if (criterion == "aic") return aic;
  if (criterion == "bic") return bic;
  if (criterion == "icl-map") return icl_map;
  if (criterion == "icl-tau") return icl_tau;
  if (criterion == "lcc-icl") return lcc_icl;
  throw ConfigError("unknown criterion '" + criterion + "'");
}

const CriterionRow& CriterionTable::row_for(int K) const {
  for (const auto& r : rows)
    if (r.K == K) return r;
  throw ConfigError("no criterion row for K = " + std::to_string(K));
}

CriterionTable compute_criteria(const std::vector<FitResult>& fits_mle, const std::vector<FitResult>& fits_mlcce,
                                long n) {
  if (n < 2) throw ConfigError("criteria need n >= 2");
  if (fits_mle.size() != fits_mlcce.size() || fits_mle.empty())
    throw ConfigError("MLE and MLccE fits must cover the same K range");

  CriterionTable table;
  table.n = n;
  const double half_log_n = 0.5 * std::log(static_cast<double>(n));
  for (std::size_t i = 0; i < fits_mle.size(); ++i) {
    const FitResult& mle = fits_mle[i];
    const FitResult& mlcce = fits_mlcce[i];
    if (mle.spec.K != mlcce.spec.K) throw ConfigError("MLE and MLccE fits must cover the same K range");
    if (mle.estimator != Estimator::mle || mlcce.estimator != Estimator::mlcce)
      throw ConfigError("fit sequences carry the wrong estimator tags");
    if (i > 0 && mle.spec.K <= fits_mle[i - 1].spec.K) throw ConfigError("fits must be ordered by increasing K");

    CriterionRow row;
    row.K = mle.spec.K;
    row.dimension = mle.spec.dimension();
    const double pen = half_log_n * row.dimension;
    row.log_lik_mle = mle.contrast.log_lik;
    row.entropy_mle = mle.contrast.entropy;
    row.lcc_mlcce = mlcce.contrast.lcc;
    row.aic = row.log_lik_mle - row.dimension;
    row.bic = row.log_lik_mle - pen;
    row.icl_tau = row.log_lik_mle - row.entropy_mle - pen;
    row.icl_map = row.log_lik_mle + mle.map_log_tau - pen;
    row.lcc_icl = row.lcc_mlcce - pen;
    table.rows.push_back(row);
  }
  for (const auto& name : kCriterionNames) table.selected[name] = select_k(table, name);
  return table;
}

int select_k(const CriterionTable& table, const std::string& criterion) {
  if (table.rows.empty()) throw ConfigError("empty criterion table");
  const CriterionRow* best = &table.rows.front();
  for (const auto& row : table.rows)
    if (row.value(criterion) > best->value(criterion)) best = &row;
  return best->K;
}

PenaltyReport check_penalty_family(const PenaltyGrid& grid) {
  if (grid.size() < 2) throw ConfigError("penalty check needs at least two sample sizes");
  std::set<int> ks;
  for (const auto& [n, values] : grid)
    for (const auto& [K, v] : values) ks.insert(K);
  if (ks.size() < 2) throw ConfigError("penalty check needs at least two K values");

  auto lookup = [&](long n, int K) {
    for (const auto& [k, v] : grid.at(n))
      if (k == K) return v;
    throw ConfigError("penalty grid misses K = " + std::to_string(K) + " at n = " + std::to_string(n));
  };

  PenaltyReport report;
  report.positive = true;
  report.vanishing_relative_to_n = true;
  report.divergent_differences = true;
  for (const auto& [n, values] : grid)
    for (const auto& [K, v] : values)
      if (!(v > 0.0)) report.positive = false;

  for (auto it = grid.begin(), next = std::next(grid.begin()); next != grid.end(); ++it, ++next) {
    const long n0 = it->first, n1 = next->first;
    for (int K : ks) {
      if (!(lookup(n1, K) / static_cast<double>(n1) < lookup(n0, K) / static_cast<double>(n0)))
        report.vanishing_relative_to_n = false;
      for (int Kp : ks) {
        if (Kp >= K) continue;
        if (!(lookup(n1, K) - lookup(n1, Kp) > lookup(n0, K) - lookup(n0, Kp))) report.divergent_differences = false;
      }
    }
  }
  return report;
}

PenaltyGrid bic_penalty_grid(const std::vector<long>& n_values, const std::vector<int>& dims_by_k, int k_min) {
  PenaltyGrid grid;
  for (long n : n_values) {
    auto& row = grid[n];
    for (std::size_t i = 0; i < dims_by_k.size(); ++i)
      row.emplace_back(k_min + static_cast<int>(i), 0.5 * std::log(static_cast<double>(n)) * dims_by_k[i]);
  }
  return grid;
}

SelectionRun fit_and_select(const DataMatrix& data, const ModelFamily& family, int k_min, int k_max,
                            const FitConfig& config) {
  if (k_min < 1 || k_max < k_min) throw ConfigError("K range must satisfy 1 <= k_min <= k_max");
  const auto count = static_cast<std::size_t>(k_max - k_min + 1);
  SelectionRun run;
  run.mle.resize(count);
  run.mlcce.resize(count);
  // Restarts inside one K are parallel; K values run in order.
  for (std::size_t i = 0; i < count; ++i) {
    const ModelSpec spec = make_model_spec(family, k_min + static_cast<int>(i), static_cast<int>(data.cols()));
    FitPair pair = fit_both(data, spec, config);
    run.mle[i] = std::move(pair.mle);
    run.mlcce[i] = std::move(pair.mlcce);
  }
  run.table = compute_criteria(run.mle, run.mlcce, static_cast<long>(data.rows()));
  return run;
}

SelectionRun fit_and_select(const DataMatrix& data, CovarianceStructure covariance, Proportions proportions,
                            int k_min, int k_max, const FitConfig& config) {
  return fit_and_select(data, make_family(covariance, proportions, data), k_min, k_max, config);
}

}  // namespace lccmix
