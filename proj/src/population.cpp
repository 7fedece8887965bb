#include "lccmix/population.hpp"

#include "lccmix/errors.hpp"
#include "lccmix/parallel.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

namespace lccmix {

namespace {

const double kLogTwoPi = std::log(2.0 * std::numbers::pi);

// GSL aborts on errors by default; status codes are checked here instead.
void quiet_gsl() {
  static const bool once = [] {
    gsl_set_error_handler_off();
    return true;
  }();
  (void)once;
}

struct Scalar1d {
  std::vector<double> log_w, mean, var, log_norm;

  explicit Scalar1d(const MixtureParams& p) {
    if (p.dim() != 1) throw ConfigError("population loss is only defined for d = 1");
    for (int k = 0; k < p.num_components(); ++k) {
      const auto& c = p.components[static_cast<std::size_t>(k)];
      log_w.push_back(std::log(p.weights(k)));
      mean.push_back(c.mean(0));
      var.push_back(c.covariance(0, 0));
      log_norm.push_back(-0.5 * (kLogTwoPi + std::log(c.covariance(0, 0))));
    }
  }

  std::size_t size() const { return mean.size(); }

  // -log f(x) and, for ContrastKind::lcc, + h_K(tau(x)).
  double loss(double x, ContrastKind kind) const {
    double a[16];
    std::vector<double> big;
    double* joint = a;
    if (size() > 16) {
      big.resize(size());
      joint = big.data();
    }
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < size(); ++k) {
      const double r = x - mean[k];
      joint[k] = log_w[k] + log_norm[k] - 0.5 * r * r / var[k];
      m = std::max(m, joint[k]);
    }
    double s = 0.0;
    for (std::size_t k = 0; k < size(); ++k) s += std::exp(joint[k] - m);
    const double lse = m + std::log(s);
    double out = -lse;
    if (kind == ContrastKind::lcc && size() > 1) {
      for (std::size_t k = 0; k < size(); ++k) {
        const double lt = joint[k] - lse;
        if (lt > -690.0) out -= std::exp(lt) * lt;
      }
    }
    return out;
  }

  double log_pdf(double x) const { return -loss(x, ContrastKind::log_likelihood); }
};

double integrate(const DensitySpec& f0, const Scalar1d& model, const QuadratureRule& rule, ContrastKind kind) {
  double total = 0.0;
  if (rule.kind == QuadratureRule::Kind::trapezoid_truncated) {
    const Scalar1d truth(f0.params);
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
      const double x = rule.nodes[j];
      total += rule.weights[j] * std::exp(truth.log_pdf(x)) * model.loss(x, kind);
    }
    return total;
  }
  const double inv_sqrt_pi = 1.0 / std::sqrt(std::numbers::pi);
  for (int c = 0; c < f0.params.num_components(); ++c) {
    const auto& comp = f0.params.components[static_cast<std::size_t>(c)];
    const double m = comp.mean(0), scale = std::sqrt(2.0 * comp.covariance(0, 0));
    double part = 0.0;
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) part += rule.weights[j] * model.loss(m + scale * rule.nodes[j], kind);
    total += f0.params.weights(c) * inv_sqrt_pi * part;
  }
  return total;
}

std::vector<double> grid_values(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo) || !std::isfinite(lo) || !std::isfinite(hi))
    throw ConfigError("empty parameter grid");
  std::vector<double> v;
  const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9)) + 1;
  for (long i = 0; i < count; ++i) v.push_back(lo + static_cast<double>(i) * step);
  return v;
}

struct PolishContext {
  const DensitySpec* f0;
  PopulationModel model;
  const QuadratureRule* rule;
  ContrastKind kind;
};

double polish_objective(const gsl_vector* x, void* raw) {
  const auto* ctx = static_cast<const PolishContext*>(raw);
  const double mu = gsl_vector_get(x, 0);
  const double log_var = gsl_vector_get(x, 1);
  if (!std::isfinite(mu) || !std::isfinite(log_var) || std::abs(log_var) > 700.0) return GSL_POSINF;
  const MixtureParams p = population_params(ctx->model, mu, std::exp(log_var));
  return integrate(*ctx->f0, Scalar1d(p), *ctx->rule, ctx->kind);
}

}  // namespace

DensitySpec DensitySpec::standard_normal() { return mixture_1d({1.0}, {0.0}, {1.0}); }

DensitySpec DensitySpec::mixture_1d(const std::vector<double>& weights, const std::vector<double>& means,
                                    const std::vector<double>& variances) {
  if (weights.empty() || weights.size() != means.size() || weights.size() != variances.size())
    throw InputError("density components need matching weights, means and variances");
  DensitySpec f;
  f.params.weights = Eigen::Map<const Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
  for (std::size_t k = 0; k < weights.size(); ++k)
    f.params.components.push_back({Eigen::VectorXd::Constant(1, means[k]), Eigen::MatrixXd::Constant(1, 1, variances[k])});
  f.params.validate();
  return f;
}

double DensitySpec::log_pdf(double x) const { return Scalar1d(params).log_pdf(x); }

double DensitySpec::mean() const {
  double m = 0.0;
  for (int k = 0; k < params.num_components(); ++k) m += params.weights(k) * params.components[static_cast<std::size_t>(k)].mean(0);
  return m;
}

double DensitySpec::variance() const {
  const double m = mean();
  double v = 0.0;
  for (int k = 0; k < params.num_components(); ++k) {
    const auto& c = params.components[static_cast<std::size_t>(k)];
    v += params.weights(k) * (c.covariance(0, 0) + (c.mean(0) - m) * (c.mean(0) - m));
  }
  return v;
}

QuadratureRule QuadratureRule::trapezoid(double lo, double hi, int n_nodes) {
  if (n_nodes < 2 || !(hi > lo)) throw ConfigError("trapezoid rule needs hi > lo and at least two nodes");
  QuadratureRule rule;
  rule.kind = Kind::trapezoid_truncated;
  const double h = (hi - lo) / (n_nodes - 1);
  for (int j = 0; j < n_nodes; ++j) {
    rule.nodes.push_back(j == n_nodes - 1 ? hi : lo + j * h);
    rule.weights.push_back(j == 0 || j == n_nodes - 1 ? 0.5 * h : h);
  }
  return rule;
}

QuadratureRule QuadratureRule::gauss_hermite(int n_nodes) {
  if (n_nodes < 1) throw ConfigError("Gauss-Hermite rule needs at least one node");
  quiet_gsl();
  std::unique_ptr<gsl_integration_fixed_workspace, decltype(&gsl_integration_fixed_free)> ws(
      gsl_integration_fixed_alloc(gsl_integration_fixed_hermite, static_cast<std::size_t>(n_nodes), 0.0, 1.0, 0.0, 0.0),
      &gsl_integration_fixed_free);
  if (!ws) throw NumericError("could not build Gauss-Hermite rule");
  QuadratureRule rule;
  rule.kind = Kind::gauss_hermite_transformed;
  const double* x = gsl_integration_fixed_nodes(ws.get());
  const double* w = gsl_integration_fixed_weights(ws.get());
  for (int j = 0; j < n_nodes; ++j) {
    if (!(w[j] > 0.0)) continue;  // underflowed tail weight
    rule.nodes.push_back(x[j]);
    rule.weights.push_back(w[j]);
  }
  return rule;
}

QuadratureRule QuadratureRule::refined() const {
  if (kind == Kind::trapezoid_truncated)
    return trapezoid(nodes.front(), nodes.back(), 2 * static_cast<int>(nodes.size()) - 1);
  return gauss_hermite(2 * static_cast<int>(nodes.size()));
}

QuadratureRule default_rule(const DensitySpec& f0) {
  if (f0.params.dim() != 1) throw ConfigError("population loss is only defined for d = 1");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo, smallest = lo;
  for (const auto& c : f0.params.components) {
    const double s = std::sqrt(c.covariance(0, 0));
    lo = std::min(lo, c.mean(0) - 10.0 * s);
    hi = std::max(hi, c.mean(0) + 10.0 * s);
    smallest = std::min(smallest, s);
  }
  const int n = static_cast<int>(std::lround((hi - lo) / (0.1 * smallest))) + 1;
  return QuadratureRule::trapezoid(lo, hi, n);
}

double expected_contrast(const DensitySpec& f0, const MixtureParams& params, const QuadratureRule& rule,
                         ContrastKind kind) {
  if (f0.params.dim() != 1 || params.dim() != 1) throw ConfigError("population loss is only defined for d = 1");
  if (rule.nodes.empty() || rule.nodes.size() != rule.weights.size()) throw ConfigError("malformed quadrature rule");
  return integrate(f0, Scalar1d(params), rule, kind);
}

double expected_contrast_checked(const DensitySpec& f0, const MixtureParams& params, const QuadratureRule& rule,
                                 ContrastKind kind) {
  const double value = expected_contrast(f0, params, rule, kind);
  const double finer = expected_contrast(f0, params, rule.refined(), kind);
  if (!(std::abs(finer - value) < 1e-6))
    throw NumericError("quadrature rule too coarse: refinement moved the value by " + std::to_string(finer - value));
  return value;
}

std::vector<double> ParameterGrid::mu_values() const { return grid_values(mu_lo, mu_hi, mu_step); }
std::vector<double> ParameterGrid::var_values() const { return grid_values(var_lo, var_hi, var_step); }

ParameterGrid default_grid(const DensitySpec& f0) {
  const double v = f0.variance(), sd = std::sqrt(v);
  return ParameterGrid{0.0, 2.0 * sd, 0.01 * sd, 0.05 * v, 2.0 * v, 0.01 * v};
}

PopulationModel population_model_for(const ModelSpec& spec) {
  if (spec.d != 1) throw ConfigError("population loss is only defined for d = 1");
  if (spec.K == 1) return PopulationModel::single_gaussian;
  const bool shared_variance = spec.family.covariance == CovarianceStructure::diagonal_equal_volume;
  if (spec.K == 2 && spec.family.proportions == Proportions::equal && shared_variance)
    return PopulationModel::symmetric_pair;
  throw ConfigError("population loss supports K = 1 or the symmetric equal-weight, shared-variance pair (K = 2)");
}

MixtureParams population_params(PopulationModel model, double mu, double variance) {
  MixtureParams p;
  const Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(1, 1, variance);
  if (model == PopulationModel::single_gaussian) {
    p.weights = Eigen::VectorXd::Ones(1);
    p.components.push_back({Eigen::VectorXd::Constant(1, mu), cov});
  } else {
    p.weights = Eigen::VectorXd::Constant(2, 0.5);
    p.components.push_back({Eigen::VectorXd::Constant(1, -mu), cov});
    p.components.push_back({Eigen::VectorXd::Constant(1, mu), cov});
  }
  return p;
}

PopulationFit minimize_expected_contrast(const DensitySpec& f0, PopulationModel model, const ParameterGrid& grid,
                                         const PopulationOptions& options) {
  const QuadratureRule rule = default_rule(f0);
  std::vector<double> mus = grid.mu_values();
  const std::vector<double> vars = grid.var_values();
  if (model == PopulationModel::single_gaussian) {
    std::vector<double> mirrored;
    for (auto it = mus.rbegin(); it != mus.rend(); ++it)
      if (*it > 0.0) mirrored.push_back(-*it);
    mirrored.insert(mirrored.end(), mus.begin(), mus.end());
    mus = std::move(mirrored);
  }

  // Row-by-row evaluation; each cell writes its own slot.
  std::vector<double> values(mus.size() * vars.size());
  parallel_for(mus.size(), options.n_threads, [&](std::size_t a) {
    for (std::size_t b = 0; b < vars.size(); ++b)
      values[a * vars.size() + b] =
          integrate(f0, Scalar1d(population_params(model, mus[a], vars[b])), rule, options.kind);
  });
  // Lowest value, ties broken lexicographically on (mu, variance) via scan order.
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] < values[best]) best = i;

  PopulationFit fit;
  fit.model = model;
  fit.mu = mus[best / vars.size()];
  fit.variance = vars[best % vars.size()];
  fit.value = values[best];

  if (options.refine) {
    quiet_gsl();
    PolishContext ctx{&f0, model, &rule, options.kind};
    gsl_multimin_function fn{&polish_objective, 2, &ctx};
    std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> x(gsl_vector_alloc(2), &gsl_vector_free);
    std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> step(gsl_vector_alloc(2), &gsl_vector_free);
    gsl_vector_set(x.get(), 0, fit.mu);
    gsl_vector_set(x.get(), 1, std::log(fit.variance));
    gsl_vector_set(step.get(), 0, 4.0 * grid.mu_step);
    gsl_vector_set(step.get(), 1, 4.0 * grid.var_step / fit.variance);
    std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)> nm(
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 2), &gsl_multimin_fminimizer_free);
    gsl_multimin_fminimizer_set(nm.get(), &fn, x.get(), step.get());
    for (int iter = 0; iter < 2000; ++iter) {
      if (gsl_multimin_fminimizer_iterate(nm.get()) != GSL_SUCCESS) break;
      if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(nm.get()), 1e-10) == GSL_SUCCESS) break;
    }
    const double polished = gsl_multimin_fminimizer_minimum(nm.get());
    if (polished < fit.value) {
      fit.value = polished;
      fit.mu = gsl_vector_get(nm->x, 0);
      fit.variance = std::exp(gsl_vector_get(nm->x, 1));
    }
  }
  if (model == PopulationModel::symmetric_pair) fit.mu = std::abs(fit.mu);
  fit.params = population_params(model, fit.mu, fit.variance);
  return fit;
}

PopulationFit minimize_expected_contrast(const DensitySpec& f0, const ModelSpec& model, const ParameterGrid& grid,
                                         const PopulationOptions& options) {
  return minimize_expected_contrast(f0, population_model_for(model), grid, options);
}

PopulationK0 population_k0(const DensitySpec& f0, const std::vector<ModelSpec>& specs, const ParameterGrid& grid,
                           const PopulationOptions& options) {
  if (specs.empty()) throw ConfigError("population_k0 needs at least one model");
  PopulationK0 out;
  for (const auto& spec : specs) out.per_k.emplace_back(spec.K, minimize_expected_contrast(f0, spec, grid, options));
  std::sort(out.per_k.begin(), out.per_k.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::size_t best = 0;
  for (std::size_t i = 1; i < out.per_k.size(); ++i)
    if (out.per_k[i].second.value < out.per_k[best].second.value) best = i;
  out.k0 = out.per_k[best].first;
  return out;
}

std::vector<ModelSpec> population_specs(int k_min, int k_max) {
  if (k_min < 1 || k_max < k_min) throw ConfigError("K range must satisfy 1 <= k_min <= k_max");
  std::vector<ModelSpec> specs;
  for (int K = k_min; K <= k_max; ++K) {
    ModelFamily family{CovarianceStructure::diagonal_equal_volume, Proportions::equal, Bounds{}};
    family.bounds.mean_box = {{-1e6, 1e6}};
    family.bounds.var_floor = 1e-12;
    family.bounds.var_ceil = 1e12;
    ModelSpec spec = make_model_spec(family, K, 1);
    population_model_for(spec);
    specs.push_back(std::move(spec));
  }
  return specs;
}

}  // namespace lccmix
