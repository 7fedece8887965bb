#include "lccmix/estimation.hpp"

#include "lccmix/errors.hpp"
#include "lccmix/gaussian.hpp"
#include "lccmix/parallel.hpp"
#include "lccmix/reparam.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace lccmix {

std::string to_string(Estimator e) { return e == Estimator::mle ? "mle" : "mlcce"; }

Estimator parse_estimator(const std::string& name) {
  if (name == "mle") return Estimator::mle;
  if (name == "mlcce") return Estimator::mlcce;
  throw InputError("unknown estimator '" + name + "'");
}

void FitConfig::validate() const {
  if (n_restarts < 1 || max_em_iters < 1 || max_grad_iters < 1) throw ConfigError("iteration counts must be >= 1");
  if (!(em_tol > 0.0) || !(grad_tol > 0.0)) throw ConfigError("tolerances must be positive");
  if (n_threads < 1) throw ConfigError("thread count must be >= 1");
}

namespace {

// A component whose total responsibility falls below this fraction of n is
// considered collapsed.
constexpr double kCollapseFraction = 1e-8;
constexpr int kMaxRescues = 3;

constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 40;
constexpr std::size_t kHistory = 8;
// Stall test: total gain over the last kStallWindow steps at most
// em_tol * |f|, the relative-change rule EM uses, measured over a window.
constexpr int kStallWindow = 10;
constexpr int kPolishBudget = 4;

void check_inputs(const DataMatrix& data, const ModelSpec& spec) {
  if (data.cols() != spec.d)
    throw DimensionMismatch("data has " + std::to_string(data.cols()) + " columns, model expects " +
                            std::to_string(spec.d));
  if (data.rows() < spec.K)
    throw InputError("need at least K = " + std::to_string(spec.K) + " observations, got " +
                     std::to_string(data.rows()));
  require_finite(data);
  bool identical = true;
  for (Eigen::Index i = 1; i < data.rows() && identical; ++i) identical = data.row(i) == data.row(0);
  if (identical) throw DegenerateDataError("all observations are identical; scatter is degenerate");
  spec.family.validate(spec.K, spec.d);
}

struct MStep {
  MixtureParams params;
  bool clamped = false;
  bool rescued = false;
  bool exhausted = false;
};

Eigen::MatrixXd rescue_covariance(const DataMatrix& data, CovarianceStructure structure) {
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Eigen::VectorXd var = (data.rowwise() - mean).array().square().colwise().mean().transpose();
  if (structure == CovarianceStructure::spherical)
    return Eigen::MatrixXd::Identity(var.size(), var.size()) * var.mean();
  return var.asDiagonal();
}

MStep m_step(const DataMatrix& data, const Eigen::MatrixXd& tau, const ModelSpec& spec, Rng& rng, int& rescues) {
  const Eigen::Index n = data.rows();
  const int K = spec.K, d = spec.d;
  MStep out;
  MixtureParams& p = out.params;
  p.weights.resize(K);
  p.components.resize(static_cast<std::size_t>(K));

  std::vector<Eigen::MatrixXd> scatter(static_cast<std::size_t>(K));
  std::vector<bool> collapsed(static_cast<std::size_t>(K), false);
  Eigen::VectorXd nk = tau.colwise().sum().transpose();

  for (int k = 0; k < K; ++k) {
    auto& comp = p.components[static_cast<std::size_t>(k)];
    if (nk(k) < kCollapseFraction * static_cast<double>(n)) {
      collapsed[static_cast<std::size_t>(k)] = true;
      continue;
    }
    comp.mean = (data.transpose() * tau.col(k)) / nk(k);
    const Eigen::MatrixXd centered = data.rowwise() - comp.mean.transpose();
    scatter[static_cast<std::size_t>(k)] = centered.transpose() * tau.col(k).asDiagonal() * centered;
  }

  // Covariances from the weighted scatter matrices.
  if (spec.family.covariance == CovarianceStructure::diagonal_equal_volume) {
    // Sigma_k = lambda diag(a_k), prod_j a_kj = 1:
    //   a_k = diag(W_k) / g_k,  g_k = det(diag W_k)^(1/d),  lambda = sum_k g_k / n
    double lambda = 0.0, mass = 0.0;
    std::vector<double> g(static_cast<std::size_t>(K), 1.0);
    for (int k = 0; k < K; ++k) {
      if (collapsed[static_cast<std::size_t>(k)]) continue;
      const Eigen::VectorXd w = scatter[static_cast<std::size_t>(k)].diagonal().cwiseMax(1e-300);
      g[static_cast<std::size_t>(k)] = std::exp(w.array().log().mean());
      lambda += g[static_cast<std::size_t>(k)];
      mass += nk(k);
    }
    lambda /= mass;
    for (int k = 0; k < K; ++k) {
      if (collapsed[static_cast<std::size_t>(k)]) continue;
      const Eigen::VectorXd w = scatter[static_cast<std::size_t>(k)].diagonal().cwiseMax(1e-300);
      p.components[static_cast<std::size_t>(k)].covariance =
          (lambda * w / g[static_cast<std::size_t>(k)]).asDiagonal();
    }
  } else {
    for (int k = 0; k < K; ++k) {
      if (collapsed[static_cast<std::size_t>(k)]) continue;
      const Eigen::MatrixXd& w = scatter[static_cast<std::size_t>(k)];
      Eigen::MatrixXd& cov = p.components[static_cast<std::size_t>(k)].covariance;
      switch (spec.family.covariance) {
        case CovarianceStructure::full: cov = w / nk(k); break;
        case CovarianceStructure::diagonal: cov = (w.diagonal() / nk(k)).asDiagonal(); break;
        case CovarianceStructure::spherical:
          cov = Eigen::MatrixXd::Identity(d, d) * (w.trace() / (static_cast<double>(d) * nk(k)));
          break;
        case CovarianceStructure::diagonal_equal_volume: break;
      }
    }
  }

  for (int k = 0; k < K; ++k) {
    if (!collapsed[static_cast<std::size_t>(k)]) {
      p.weights(k) = nk(k) / static_cast<double>(n);
      continue;
    }
    // Re-seed the collapsed component at a random observation.
    out.rescued = true;
    if (++rescues > kMaxRescues) out.exhausted = true;
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    auto& comp = p.components[static_cast<std::size_t>(k)];
    comp.mean = data.row(pick(rng)).transpose();
    comp.covariance = rescue_covariance(data, spec.family.covariance);
    p.weights(k) = 1.0 / K;
  }
  p.weights /= p.weights.sum();

  detail::Projection proj = detail::project(p, spec.family);
  out.params = std::move(proj.params);
  out.clamped = proj.clamped;
  return out;
}

Eigen::MatrixXd initial_responsibilities(const DataMatrix& data, int K, InitScheme scheme, Rng& rng) {
  const Eigen::Index n = data.rows();
  Eigen::MatrixXd tau = Eigen::MatrixXd::Zero(n, K);
  if (scheme == InitScheme::random_responsibilities) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int k = 0; k < K; ++k) tau(i, k) = unif(rng) + 1e-12;
      tau.row(i) /= tau.row(i).sum();
    }
    return tau;
  }

  // k-means++ seeding followed by a nearest-center assignment.
  std::vector<Eigen::Index> centers;
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centers.push_back(pick(rng));
  Eigen::VectorXd dist2 = (data.rowwise() - data.row(centers.back())).rowwise().squaredNorm();
  while (static_cast<int>(centers.size()) < K) {
    const double total = dist2.sum();
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> unif(0.0, total);
      double target = unif(rng), acc = 0.0;
      chosen = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += dist2(i);
        if (acc >= target && dist2(i) > 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    centers.push_back(chosen);
    dist2 = dist2.cwiseMin((data.rowwise() - data.row(chosen)).rowwise().squaredNorm());
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k) {
      const double dk = (data.row(i) - data.row(centers[static_cast<std::size_t>(k)])).squaredNorm();
      if (dk < best_d) {
        best_d = dk;
        best = k;
      }
    }
    tau(i, best) = 1.0;
  }
  return tau;
}

template <typename Better>
FitResult pick_best(std::vector<FitResult>& runs, Better better) {
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (better(runs[r], runs[best])) best = r;
  return std::move(runs[best]);
}

// Ascent direction from the L-BFGS two-loop recursion on -Lcc.
Eigen::VectorXd lbfgs_direction(const Eigen::VectorXd& g, const std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& history) {
  Eigen::VectorXd q = g;
  std::vector<double> alpha(history.size());
  for (std::size_t m = history.size(); m-- > 0;) {
    const auto& [s, y] = history[m];
    alpha[m] = s.dot(q) / y.dot(s);
    q -= alpha[m] * y;
  }
  if (!history.empty()) {
    const auto& [s, y] = history.back();
    q *= s.dot(y) / y.dot(y);
  }
  for (std::size_t m = 0; m < history.size(); ++m) {
    const auto& [s, y] = history[m];
    const double beta = y.dot(q) / y.dot(s);
    q += (alpha[m] - beta) * s;
  }
  return q;
}

struct Ascent {
  MixtureParams params;
  bool converged = false;
  int iters = 0;
};

// Quasi-Newton ascent of the per-observation contrast in chart coordinates,
// with Armijo backtracking. Returns projected parameters.
Ascent chart_ascent(const DataMatrix& data, const ModelSpec& spec, const FitConfig& config,
                    const MixtureParams& start, ContrastKind kind, int max_iters) {
  const Chart chart(spec);
  const double scale = 1.0 / static_cast<double>(data.rows());
  auto evaluate = [&](const Eigen::VectorXd& u) {
    ValueAndGradient vg = contrast_value_and_gradient(chart, u, data, kind);
    vg.value *= scale;
    vg.gradient *= scale;
    return vg;
  };
  // Candidate coordinates after restoring the bounds the chart does not encode.
  auto feasible = [&](const Eigen::VectorXd& u) {
    detail::Projection proj = detail::project(chart.decode(u), spec.family);
    return proj.clamped ? chart.encode(proj.params) : u;
  };

  Eigen::VectorXd u = feasible(chart.encode(start));
  ValueAndGradient cur = evaluate(u);
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> history;
  std::deque<double> recent{cur.value};
  Ascent out;
  int iter = 0;
  for (; iter < max_iters; ++iter) {
    if (cur.gradient.lpNorm<Eigen::Infinity>() < config.grad_tol) {
      out.converged = true;
      break;
    }
    Eigen::VectorXd dir = lbfgs_direction(cur.gradient, history);
    if (!(cur.gradient.dot(dir) > 0.0)) {
      history.clear();
      dir = cur.gradient;
    }

    bool accepted = false;
    Eigen::VectorXd u_next;
    ValueAndGradient next;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      double t = 1.0;
      for (int bt = 0; bt < kMaxBacktracks; ++bt, t *= 0.5) {
        u_next = feasible(u + t * dir);
        next = evaluate(u_next);
        if (std::isfinite(next.value) && next.value >= cur.value + kArmijo * cur.gradient.dot(u_next - u)) {
          accepted = true;
          break;
        }
      }
      if (!accepted && !history.empty()) {
        history.clear();
        dir = cur.gradient;
      } else {
        break;
      }
    }
    if (!accepted) {
      // Failure is benign when the predicted gain is below working precision.
      out.converged = cur.gradient.dot(dir) < 1e-12 * (1.0 + std::abs(cur.value));
      break;
    }

    const Eigen::VectorXd s = u_next - u;
    const Eigen::VectorXd y = cur.gradient - next.gradient;
    if (s.dot(y) > 1e-10 * s.norm() * y.norm()) {
      history.emplace_back(s, y);
      if (history.size() > kHistory) history.pop_front();
    }
    const double gain = next.value - cur.value;
    u = std::move(u_next);
    cur = std::move(next);
    recent.push_back(cur.value);
    if (recent.size() > static_cast<std::size_t>(kStallWindow) + 1) recent.pop_front();
    const bool stalled = recent.size() == static_cast<std::size_t>(kStallWindow) + 1 &&
                         recent.back() - recent.front() <= config.em_tol * std::abs(cur.value);
    if (gain <= 1e-14 * (1.0 + std::abs(cur.value)) || stalled) {
      out.converged = true;
      ++iter;
      break;
    }
  }
  out.params = project_to_bounds(chart.decode(u), spec.family);
  out.iters = iter;
  return out;
}

}  // namespace

namespace detail {

FitResult finalize(const DataMatrix& data, const ModelSpec& spec, MixtureParams params, Estimator estimator) {
  FitResult out;
  out.spec = spec;
  const ResponsibilityMatrix r = responsibilities(params, data);
  out.contrast = contrast_of(r);
  out.map_log_tau = map_log_tau_sum(r);
  out.params = std::move(params);
  out.estimator = estimator;
  return out;
}

FitResult run_em(const DataMatrix& data, const ModelSpec& spec, const FitConfig& config, int restart) {
  Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(restart)));
  int rescues = 0;
  const Eigen::MatrixXd tau0 = initial_responsibilities(data, spec.K, config.init_scheme, rng);
  MStep step = m_step(data, tau0, spec, rng, rescues);
  MixtureParams params = std::move(step.params);
  bool clamped = step.clamped || step.rescued;
  bool converged = false;
  bool exhausted = step.exhausted;

  std::vector<EmTraceEntry> trace;
  double previous = -std::numeric_limits<double>::infinity();
  int iter = 0;
  for (; iter < config.max_em_iters && !exhausted; ++iter) {
    const ResponsibilityMatrix r = responsibilities(params, data);
    const double ll = r.log_mixture.sum();
    if (config.record_trace) trace.push_back({ll, clamped});
    if (iter > 0 && std::abs(ll - previous) <= config.em_tol * std::abs(previous)) {
      converged = true;
      break;
    }
    previous = ll;
    step = m_step(data, r.tau, spec, rng, rescues);
    exhausted = step.exhausted;
    params = std::move(step.params);
    clamped = step.clamped || step.rescued;
  }

  FitResult out = finalize(data, spec, std::move(params), Estimator::mle);
  // EM slows to a crawl near overfitted solutions; finish those with a
  // gradient polish of log L and accept it only if it does not lose ground.
  if (!converged && !exhausted && spec.K > 1) {
    // Components shrinking onto single observations approach a corner of the
    // bounds slowly in chart coordinates, hence the larger budget.
    const Ascent polish = chart_ascent(data, spec, config, out.params, ContrastKind::log_likelihood,
                                       kPolishBudget * config.max_grad_iters);
    FitResult polished = finalize(data, spec, polish.params, Estimator::mle);
    iter += polish.iters;
    if (polished.contrast.log_lik >= out.contrast.log_lik) {
      out = std::move(polished);
      converged = polish.converged;
    }
  }
  out.converged = converged && !exhausted;
  out.n_iters = iter;
  out.restart_index = restart;
  out.n_rescues = rescues;
  out.trace = std::move(trace);
  return out;
}

FitResult ascend_lcc(const DataMatrix& data, const ModelSpec& spec, const FitConfig& config,
                     const FitResult& start) {
  FitResult fallback = start;
  fallback.estimator = Estimator::mlcce;
  if (spec.K == 1) return fallback;  // Lcc = log L

  const Ascent a = chart_ascent(data, spec, config, start.params, ContrastKind::lcc, config.max_grad_iters);
  FitResult out = finalize(data, spec, a.params, Estimator::mlcce);
  out.restart_index = start.restart_index;
  out.n_rescues = start.n_rescues;
  out.n_iters = start.n_iters + a.iters;
  out.converged = a.converged;
  if (!(out.contrast.lcc >= start.contrast.lcc)) {
    fallback.n_iters = out.n_iters;
    fallback.converged = a.converged;
    return fallback;
  }
  return out;
}

}  // namespace detail

FitResult fit_mle_em(const DataMatrix& data, const ModelSpec& spec, const FitConfig& config) {
  config.validate();
  check_inputs(data, spec);
  std::vector<FitResult> runs(static_cast<std::size_t>(config.n_restarts));
  parallel_for(runs.size(), config.n_threads,
               [&](std::size_t r) { runs[r] = detail::run_em(data, spec, config, static_cast<int>(r)); });
  return pick_best(runs, [](const FitResult& a, const FitResult& b) { return a.contrast.log_lik > b.contrast.log_lik; });
}

FitResult fit_mlcce(const DataMatrix& data, const ModelSpec& spec, const FitConfig& config) {
  config.validate();
  check_inputs(data, spec);
  std::vector<FitResult> runs(static_cast<std::size_t>(config.n_restarts));
  parallel_for(runs.size(), config.n_threads, [&](std::size_t r) {
    const FitResult em = detail::run_em(data, spec, config, static_cast<int>(r));
    runs[r] = detail::ascend_lcc(data, spec, config, em);
  });
  return pick_best(runs, [](const FitResult& a, const FitResult& b) { return a.contrast.lcc > b.contrast.lcc; });
}

FitPair fit_both(const DataMatrix& data, const ModelSpec& spec, const FitConfig& config) {
  config.validate();
  check_inputs(data, spec);
  std::vector<FitResult> em(static_cast<std::size_t>(config.n_restarts));
  std::vector<FitResult> lcc(em.size());
  parallel_for(em.size(), config.n_threads, [&](std::size_t r) {
    em[r] = detail::run_em(data, spec, config, static_cast<int>(r));
    lcc[r] = detail::ascend_lcc(data, spec, config, em[r]);
  });
  FitPair out;
  out.mle = pick_best(em, [](const FitResult& a, const FitResult& b) { return a.contrast.log_lik > b.contrast.log_lik; });
  out.mlcce = pick_best(lcc, [](const FitResult& a, const FitResult& b) { return a.contrast.lcc > b.contrast.lcc; });
  return out;
}

}  // namespace lccmix
