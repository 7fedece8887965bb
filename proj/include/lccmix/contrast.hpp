#pragma once

#include "lccmix/core_types.hpp"

#include <span>
#include <vector>

namespace lccmix {

// Conditional probabilities tau_ik of the components given each observation.
struct ResponsibilityMatrix {
  Eigen::MatrixXd tau;              // n x K, rows sum to one
  Eigen::MatrixXd log_joint;        // n x K, log pi_k + log phi(x_i; omega_k)
  Eigen::VectorXd log_mixture;      // n, log f(x_i; theta) (row-wise log-sum-exp)

  Eigen::Index rows() const { return tau.rows(); }
  Eigen::Index cols() const { return tau.cols(); }
  double log_tau(Eigen::Index i, Eigen::Index k) const { return log_joint(i, k) - log_mixture(i); }
};

struct ContrastValues {
  double log_lik = 0.0;  // log L
  double entropy = 0.0;  // Ent >= 0
  double lcc = 0.0;      // log L - Ent
};

// h(t) = -t log t with h(0) = 0.
double h(double t);
// h_K(t) = sum_k h(t_k).
double h_K(std::span<const double> t);

ResponsibilityMatrix responsibilities(const MixtureParams& params, const DataMatrix& data);

double log_likelihood(const MixtureParams& params, const DataMatrix& data);
double entropy(const MixtureParams& params, const DataMatrix& data);
ContrastValues conditional_classification_loglik(const MixtureParams& params, const DataMatrix& data);
double classification_loglik(const MixtureParams& params, const DataMatrix& data, const LabelMatrix& labels);

// Ties go to the smallest component index.
std::vector<int> map_classify(const MixtureParams& params, const DataMatrix& data);

// alpha * log L - (1 - alpha) * Ent; alpha = 1/2 gives Lcc / 2.
double weighted_contrast(double alpha, const MixtureParams& params, const DataMatrix& data);

// Building blocks shared with the estimators.
double entropy_of(const ResponsibilityMatrix& r);
double row_entropy(const ResponsibilityMatrix& r, Eigen::Index i);
ContrastValues contrast_of(const ResponsibilityMatrix& r);
std::vector<int> map_labels(const ResponsibilityMatrix& r);
// sum_i log tau_{i, zhat_i} at the MAP labels.
double map_log_tau_sum(const ResponsibilityMatrix& r);

// Throws InputError on NaN/inf entries.
void require_finite(const DataMatrix& data);

}  // namespace lccmix
