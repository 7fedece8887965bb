#include "lccmix/contrast.hpp"

#include "lccmix/errors.hpp"
#include "lccmix/gaussian.hpp"

#include <cmath>

namespace lccmix {

namespace {

// Below this magnitude t log t is treated as zero.
constexpr double kTinyProbability = 1e-300;
const double kLogTiny = std::log(kTinyProbability);

void check_shapes(const MixtureParams& params, const DataMatrix& data) {
  if (params.num_components() < 1) throw InputError("mixture has no components");
  if (params.dim() != data.cols())
    throw DimensionMismatch("data has " + std::to_string(data.cols()) + " columns, model has dimension " +
                            std::to_string(params.dim()));
}

}  // namespace

double h(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("h is defined on [0, 1]");
  if (t <= kTinyProbability) return 0.0;
  return -t * std::log(t);
}

double h_K(std::span<const double> t) {
  double s = 0.0;
  for (double v : t) s += h(v);
  return s;
}

void require_finite(const DataMatrix& data) {
  for (Eigen::Index i = 0; i < data.rows(); ++i)
    for (Eigen::Index j = 0; j < data.cols(); ++j)
      if (!std::isfinite(data(i, j)))
        throw InputError("non-finite value at row " + std::to_string(i) + ", column " + std::to_string(j));
}

ResponsibilityMatrix responsibilities(const MixtureParams& params, const DataMatrix& data) {
  check_shapes(params, data);
  require_finite(data);
  const Eigen::Index n = data.rows();
  const int K = params.num_components();

  ResponsibilityMatrix r;
  r.log_joint.resize(n, K);
  for (int k = 0; k < K; ++k) {
    const auto& c = params.components[static_cast<std::size_t>(k)];
    const CholeskyFactor chol = CholeskyFactor::of(c.covariance);
    r.log_joint.col(k) = log_gaussian_densities(data, c.mean, chol).array() + std::log(params.weights(k));
  }
  r.log_mixture.resize(n);
  r.tau.resize(n, K);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = r.log_joint.row(i).maxCoeff();
    double s = 0.0;
    for (int k = 0; k < K; ++k) s += std::exp(r.log_joint(i, k) - m);
    r.log_mixture(i) = m + std::log(s);
    for (int k = 0; k < K; ++k) r.tau(i, k) = std::exp(r.log_joint(i, k) - r.log_mixture(i));
  }
  return r;
}

double row_entropy(const ResponsibilityMatrix& r, Eigen::Index i) {
  double e = 0.0;
  for (Eigen::Index k = 0; k < r.cols(); ++k) {
    const double lt = r.log_tau(i, k);
    if (lt > kLogTiny) e -= r.tau(i, k) * lt;
  }
  return e;
}

double entropy_of(const ResponsibilityMatrix& r) {
  if (r.cols() == 1) return 0.0;
  double e = 0.0;
  for (Eigen::Index i = 0; i < r.rows(); ++i) e += row_entropy(r, i);
  return e;
}

ContrastValues contrast_of(const ResponsibilityMatrix& r) {
  ContrastValues v;
  for (Eigen::Index i = 0; i < r.rows(); ++i) v.log_lik += r.log_mixture(i);
  v.entropy = entropy_of(r);
  v.lcc = v.log_lik - v.entropy;
  return v;
}

double log_likelihood(const MixtureParams& params, const DataMatrix& data) {
  return responsibilities(params, data).log_mixture.sum();
}

double entropy(const MixtureParams& params, const DataMatrix& data) {
  return entropy_of(responsibilities(params, data));
}

ContrastValues conditional_classification_loglik(const MixtureParams& params, const DataMatrix& data) {
  return contrast_of(responsibilities(params, data));
}

double classification_loglik(const MixtureParams& params, const DataMatrix& data, const LabelMatrix& labels) {
  check_shapes(params, data);
  if (labels.rows() != data.rows())
    throw DimensionMismatch("label matrix has " + std::to_string(labels.rows()) + " rows, data has " +
                            std::to_string(data.rows()));
  if (labels.cols() != params.num_components()) throw DimensionMismatch("label matrix width differs from K");
  const ResponsibilityMatrix r = responsibilities(params, data);
  double s = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) s += r.log_joint(i, labels.label(static_cast<int>(i)));
  return s;
}

std::vector<int> map_labels(const ResponsibilityMatrix& r) {
  std::vector<int> labels(static_cast<std::size_t>(r.rows()), 0);
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    // Compare the log-joint values: same argmax as tau, without the rounding
    // introduced by normalization.
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < r.cols(); ++k)
      if (r.log_joint(i, k) > r.log_joint(i, best)) best = k;
    labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return labels;
}

double map_log_tau_sum(const ResponsibilityMatrix& r) {
  const auto labels = map_labels(r);
  double s = 0.0;
  for (Eigen::Index i = 0; i < r.rows(); ++i) s += r.log_tau(i, labels[static_cast<std::size_t>(i)]);
  return s;
}

std::vector<int> map_classify(const MixtureParams& params, const DataMatrix& data) {
  return map_labels(responsibilities(params, data));
}

double weighted_contrast(double alpha, const MixtureParams& params, const DataMatrix& data) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  const ContrastValues v = conditional_classification_loglik(params, data);
  if (alpha == 1.0) return v.log_lik;
  return alpha * v.log_lik - (1.0 - alpha) * v.entropy;
}

}  // namespace lccmix
