#pragma once

#include "lccmix/contrast.hpp"
#include "lccmix/core_types.hpp"

namespace lccmix {

// Unconstrained coordinate chart over the bounded parameter space of a model.
//
// Layout, in order:
//   weights   K-1 logits (free proportions only); pi = floor + (1 - K floor) softmax
//   means     K*d box-mapped coordinates; mu = lo + (hi - lo) sigmoid(u)
//   variances per structure:
//     spherical   K coordinates, log v = log floor + (log ceil - log floor) sigmoid(s)
//     diagonal    K*d coordinates, same map per diagonal entry
//     eqvol       1 shared log-volume (same box map), then K*(d-1) log-shape
//                 coordinates, last shape fixed so the shapes multiply to one
//     full        K*d(d+1)/2 Cholesky coordinates per component, log on the
//                 diagonal; eigenvalue bounds are restored by projection
class Chart {
 public:
  explicit Chart(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  Eigen::Index size() const { return size_; }

  // Coordinates of `params`. Values on a bound map to large finite
  // coordinates (saturated logistic).
  Eigen::VectorXd encode(const MixtureParams& params) const;
  MixtureParams decode(const Eigen::VectorXd& coords) const;

  // True when every bounded quantity is strictly inside its interval, which is
  // where the chart has a well-defined inverse.
  bool strictly_inside(const MixtureParams& params) const;

  // Natural-parameter gradient pulled back to chart coordinates.
  struct NaturalGradient {
    Eigen::VectorXd weights;                 // d/d pi_k
    std::vector<Eigen::VectorXd> means;      // d/d mu_k
    std::vector<Eigen::MatrixXd> covariances;  // d/d Sigma_k (unsymmetrized form)
  };
  Eigen::VectorXd pullback(const Eigen::VectorXd& coords, const NaturalGradient& g) const;

 private:
  Eigen::Index weight_offset() const { return 0; }
  Eigen::Index mean_offset() const { return n_weights_; }
  Eigen::Index cov_offset() const { return n_weights_ + spec_.K * spec_.d; }

  ModelSpec spec_;
  Eigen::Index n_weights_ = 0;
  Eigen::Index size_ = 0;
};

enum class ContrastKind { log_likelihood, lcc };

struct ValueAndGradient {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

// Contrast value and its gradient with respect to chart coordinates, evaluated
// at decode(coords) without any projection.
ValueAndGradient contrast_value_and_gradient(const Chart& chart, const Eigen::VectorXd& coords,
                                             const DataMatrix& data, ContrastKind kind);

// Gradient of Lcc in chart coordinates at `params`. Throws InputError when a
// parameter sits on a bound.
Eigen::VectorXd lcc_gradient(const MixtureParams& params, const DataMatrix& data, const ModelSpec& spec);
Eigen::VectorXd loglik_gradient(const MixtureParams& params, const DataMatrix& data, const ModelSpec& spec);

}  // namespace lccmix
