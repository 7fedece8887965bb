#include "lccmix/gaussian.hpp"

#include "lccmix/errors.hpp"

#include <cmath>
#include <numbers>

namespace lccmix {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

const double kLogTwoPi = std::log(2.0 * std::numbers::pi);

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key) {
  return splitmix64(splitmix64(seed) ^ (key * 0xd1b54a32d192ed03ULL + 0x8bb84b93962eacc9ULL));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key1, std::uint64_t key2) {
  return derive_seed(derive_seed(seed, key1), key2);
}

CholeskyFactor CholeskyFactor::of(const Eigen::MatrixXd& covariance) {
  if (covariance.rows() != covariance.cols() || covariance.rows() == 0)
    throw DimensionMismatch("covariance must be a nonempty square matrix");
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) throw NumericError("covariance is not positive definite");
  CholeskyFactor f;
  f.lower = llt.matrixL();
  f.log_det = 2.0 * f.lower.diagonal().array().log().sum();
  if (!std::isfinite(f.log_det)) throw NumericError("covariance determinant is not finite");
  return f;
}

double log_gaussian_density(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::VectorXd& mean,
                            const CholeskyFactor& chol) {
  const auto d = mean.size();
  if (x.size() != d || chol.lower.rows() != d) throw DimensionMismatch("density arguments disagree in dimension");
  const Eigen::VectorXd z = chol.lower.triangularView<Eigen::Lower>().solve(x - mean);
  return -0.5 * static_cast<double>(d) * kLogTwoPi - 0.5 * chol.log_det - 0.5 * z.squaredNorm();
}

Eigen::VectorXd log_gaussian_densities(const DataMatrix& data, const Eigen::VectorXd& mean,
                                       const CholeskyFactor& chol) {
  const auto d = mean.size();
  if (data.cols() != d || chol.lower.rows() != d) throw DimensionMismatch("density arguments disagree in dimension");
  // Whitened residuals, one observation per column.
  Eigen::MatrixXd centered = (data.rowwise() - mean.transpose()).transpose();
  chol.lower.triangularView<Eigen::Lower>().solveInPlace(centered);
  const double c = -0.5 * static_cast<double>(d) * kLogTwoPi - 0.5 * chol.log_det;
  return (c - 0.5 * centered.colwise().squaredNorm().array()).matrix().transpose();
}

Eigen::VectorXd sample_gaussian(const Eigen::VectorXd& mean, const CholeskyFactor& chol, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = normal(rng);
  return mean + chol.lower * z;
}

}  // namespace lccmix
