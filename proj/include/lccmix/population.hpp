#pragma once

#include "lccmix/core_types.hpp"
#include "lccmix/reparam.hpp"

#include <vector>

namespace lccmix {

// A one-dimensional reference density f0: a Gaussian or a Gaussian mixture.
struct DensitySpec {
  MixtureParams params;

  enum class Variant { gaussian, gaussian_mixture };
  Variant variant() const { return params.num_components() == 1 ? Variant::gaussian : Variant::gaussian_mixture; }

  static DensitySpec standard_normal();
  static DensitySpec mixture_1d(const std::vector<double>& weights, const std::vector<double>& means,
                                const std::vector<double>& variances);
  double log_pdf(double x) const;
  double mean() const;
  double variance() const;
};

struct QuadratureRule {
  enum class Kind { gauss_hermite_transformed, trapezoid_truncated };
  Kind kind = Kind::trapezoid_truncated;
  std::vector<double> nodes;
  std::vector<double> weights;

  // Composite trapezoid on [lo, hi] with `n_nodes` equispaced nodes.
  static QuadratureRule trapezoid(double lo, double hi, int n_nodes);
  // Nodes and weights for weight function exp(-t^2); applied per component of
  // f0 after the change of variable x = m + sqrt(2 v) t.
  static QuadratureRule gauss_hermite(int n_nodes);
  // Twice the resolution.
  QuadratureRule refined() const;
};

// Trapezoid on [min(m - 10 s), max(m + 10 s)] with step 0.1 * min(s) over the
// components of f0; [-10, 10] with 201 nodes for N(0, 1).
QuadratureRule default_rule(const DensitySpec& f0);

// E_f0[-Lcc(theta; X)] (or E_f0[-log f(X; theta)] for ContrastKind::log_likelihood)
// for a single observation. Requires d = 1.
double expected_contrast(const DensitySpec& f0, const MixtureParams& params, const QuadratureRule& rule,
                         ContrastKind kind = ContrastKind::lcc);

// Same, and throws NumericError if refining the rule moves the value by 1e-6
// or more.
double expected_contrast_checked(const DensitySpec& f0, const MixtureParams& params, const QuadratureRule& rule,
                                 ContrastKind kind = ContrastKind::lcc);

// Rectangular grid over (mu, sigma^2).
struct ParameterGrid {
  double mu_lo = 0.0, mu_hi = 2.0, mu_step = 0.01;
  double var_lo = 0.05, var_hi = 2.0, var_step = 0.01;

  std::vector<double> mu_values() const;
  std::vector<double> var_values() const;
};

// mu in [0, 2 sd], sigma^2 in [0.05 V, 2 V], steps 0.01 sd and 0.01 V, where V
// is the variance of f0.
ParameterGrid default_grid(const DensitySpec& f0);

// Models the population loss is minimized over: a single Gaussian N(mu, s2),
// or the symmetric pair 1/2 N(-mu, s2) + 1/2 N(mu, s2).
enum class PopulationModel { single_gaussian, symmetric_pair };

// K = 1 maps to single_gaussian; K = 2 with equal proportions and a shared
// variance (diag-eqvol in one dimension) maps to symmetric_pair. Anything else
// is rejected with ConfigError.
PopulationModel population_model_for(const ModelSpec& spec);

MixtureParams population_params(PopulationModel model, double mu, double variance);

struct PopulationFit {
  PopulationModel model = PopulationModel::single_gaussian;
  double mu = 0.0;        // >= 0 for the symmetric pair
  double variance = 1.0;
  double value = 0.0;     // E_f0[-Lcc] per observation
  MixtureParams params;
};

struct PopulationOptions {
  bool refine = true;  // Nelder-Mead polish after the grid scan
  ContrastKind kind = ContrastKind::lcc;
  int n_threads = 1;
};

// Grid scan, then (if refine) a Nelder-Mead polish over (mu, log sigma^2).
// For the single Gaussian the mu range is mirrored about zero.
PopulationFit minimize_expected_contrast(const DensitySpec& f0, const ModelSpec& model, const ParameterGrid& grid,
                                         const PopulationOptions& options = {});
PopulationFit minimize_expected_contrast(const DensitySpec& f0, PopulationModel model, const ParameterGrid& grid,
                                         const PopulationOptions& options = {});

struct PopulationK0 {
  int k0 = 1;
  std::vector<std::pair<int, PopulationFit>> per_k;
};

// Smallest K minimizing the minimized population loss.
PopulationK0 population_k0(const DensitySpec& f0, const std::vector<ModelSpec>& specs, const ParameterGrid& grid,
                           const PopulationOptions& options = {});

// Model specs for K in [k_min, k_max] understood by population_k0.
std::vector<ModelSpec> population_specs(int k_min, int k_max);

}  // namespace lccmix
