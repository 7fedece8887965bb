#pragma once

#include "lccmix/contrast.hpp"
#include "lccmix/core_types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace lccmix {

enum class InitScheme { random_responsibilities, kmeans_pp };
enum class Estimator { mle, mlcce };

std::string to_string(Estimator e);
Estimator parse_estimator(const std::string& name);

struct FitConfig {
  int n_restarts = 10;
  int max_em_iters = 500;
  double em_tol = 1e-8;       // relative change of log L between EM iterations
  int max_grad_iters = 500;
  double grad_tol = 1e-6;     // sup-norm of the per-observation chart gradient
  std::uint64_t seed = 0;
  InitScheme init_scheme = InitScheme::kmeans_pp;
  int n_threads = 1;          // restarts run in parallel; results do not depend on it
  bool record_trace = false;  // keep the per-iteration EM log-likelihood

  void validate() const;  // throws ConfigError
};

struct EmTraceEntry {
  double log_lik = 0.0;
  bool clamped = false;  // a bound was active in the M-step that produced these params
};

struct FitResult {
  ModelSpec spec;
  MixtureParams params;
  ContrastValues contrast;
  double map_log_tau = 0.0;  // sum_i log tau_{i, zhat_i}; used by the MAP variant of ICL
  bool converged = false;
  int n_iters = 0;
  int restart_index = 0;
  int n_rescues = 0;
  Estimator estimator = Estimator::mle;
  std::vector<EmTraceEntry> trace;
};

// Maximum likelihood by EM, best of `n_restarts` by final log L.
FitResult fit_mle_em(const DataMatrix& data, const ModelSpec& spec, const FitConfig& config);

// Maximum conditional classification likelihood: each restart runs EM, then
// ascends Lcc from the EM solution. Best of restarts by final Lcc.
FitResult fit_mlcce(const DataMatrix& data, const ModelSpec& spec, const FitConfig& config);

struct FitPair {
  FitResult mle;
  FitResult mlcce;
};

// Both estimators from one set of EM restarts; identical to calling
// fit_mle_em and fit_mlcce separately with the same config.
FitPair fit_both(const DataMatrix& data, const ModelSpec& spec, const FitConfig& config);

namespace detail {

// Single EM run for restart index `restart` (seed derived from config.seed).
FitResult run_em(const DataMatrix& data, const ModelSpec& spec, const FitConfig& config, int restart);

// Lcc ascent from `start`; never returns a result with lower Lcc than `start`.
FitResult ascend_lcc(const DataMatrix& data, const ModelSpec& spec, const FitConfig& config,
                     const FitResult& start);

FitResult finalize(const DataMatrix& data, const ModelSpec& spec, MixtureParams params, Estimator estimator);

}  // namespace detail

}  // namespace lccmix
