#pragma once

#include "lccmix/core_types.hpp"

#include <cstdint>
#include <random>

namespace lccmix {

using Rng = std::mt19937_64;

// Stateless key derivation for independent RNG streams (splitmix64 mixing).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key1, std::uint64_t key2);

struct CholeskyFactor {
  Eigen::MatrixXd lower;  // L with Sigma = L L^T
  double log_det = 0.0;   // log det(Sigma)

  // Throws NumericError if `covariance` is not positive definite.
  static CholeskyFactor of(const Eigen::MatrixXd& covariance);

  int dim() const { return static_cast<int>(lower.rows()); }
  Eigen::MatrixXd reconstruct() const { return lower * lower.transpose(); }
};

double log_gaussian_density(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::VectorXd& mean,
                            const CholeskyFactor& chol);

// log phi(x_i; mean, Sigma) for every row of `data`.
Eigen::VectorXd log_gaussian_densities(const DataMatrix& data, const Eigen::VectorXd& mean,
                                       const CholeskyFactor& chol);

Eigen::VectorXd sample_gaussian(const Eigen::VectorXd& mean, const CholeskyFactor& chol, Rng& rng);

}  // namespace lccmix
