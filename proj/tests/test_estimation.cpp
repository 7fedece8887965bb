#include "doctest.h"

#include "lccmix/errors.hpp"
#include "lccmix/estimation.hpp"
#include "lccmix/simulation.hpp"
#include "support.hpp"

#include <algorithm>

using namespace lccmix;
using namespace lccmix::testing;

namespace {

DataMatrix separated_1d(long n, std::uint64_t seed) {
  Rng rng(seed);
  return sample_mixture(mixture_1d({0.5, 0.5}, {-5, 5}, {1, 1}), n, rng);
}

std::vector<std::size_t> order_by_first_mean(const MixtureParams& p) {
  std::vector<std::size_t> idx(p.components.size());
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return p.components[a].mean(0) < p.components[b].mean(0); });
  return idx;
}

bool inside_bounds(const FitResult& fit) {
  const MixtureParams again = project_to_bounds(fit.params, fit.spec.family);
  for (std::size_t k = 0; k < again.components.size(); ++k) {
    if ((again.components[k].covariance - fit.params.components[k].covariance).cwiseAbs().maxCoeff() >
        1e-12 * (1.0 + fit.params.components[k].covariance.cwiseAbs().maxCoeff()))
      return false;
    if (again.components[k].mean != fit.params.components[k].mean) return false;
  }
  return (again.weights - fit.params.weights).cwiseAbs().maxCoeff() <= 1e-15;
}

}  // namespace

TEST_SUITE("estimation") {
  TEST_CASE("K = 1 EM is the moment estimate") {
    Rng rng(1);
    const DataMatrix x = gaussian_data(200, 3, rng);
    const ModelSpec spec = make_model_spec(make_family(CovarianceStructure::full, Proportions::free, x), 1, 3);
    const FitResult fit = fit_mle_em(x, spec, FitConfig{});
    const Eigen::VectorXd mean = x.colwise().mean().transpose();
    const DataMatrix centered = x.rowwise() - mean.transpose();
    const Eigen::MatrixXd cov = centered.transpose() * centered / 200.0;
    CHECK((fit.params.components[0].mean - mean).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((fit.params.components[0].covariance - cov).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(fit.converged);
    CHECK(fit.estimator == Estimator::mle);
  }

  TEST_CASE("well-separated recovery") {
    const DataMatrix x = separated_1d(2000, 2);
    const ModelSpec spec = make_model_spec(make_family(CovarianceStructure::diagonal, Proportions::free, x), 2, 1);
    const FitResult fit = fit_mle_em(x, spec, FitConfig{});
    const auto idx = order_by_first_mean(fit.params);
    CHECK(std::abs(fit.params.components[idx[0]].mean(0) + 5.0) < 0.2);
    CHECK(std::abs(fit.params.components[idx[1]].mean(0) - 5.0) < 0.2);
    CHECK(std::abs(fit.params.weights(static_cast<Eigen::Index>(idx[0])) - 0.5) < 0.05);
    CHECK(fit.converged);
  }

  TEST_CASE("EM log-likelihood is nondecreasing on unclamped steps") {
    Rng rng(3);
    int checked = 0;
    for (int trial = 0; trial < 50; ++trial) {
      const int K = 2 + trial % 3, d = 1 + trial % 2;
      const auto s = kAllStructures[static_cast<std::size_t>(trial) % 4];
      const DataMatrix x = sample_mixture(random_params(K, d, rng, s), 150, rng);
      const ModelSpec spec = make_model_spec(make_family(s, Proportions::free, x), K, d);
      FitConfig config;
      config.record_trace = true;
      config.seed = static_cast<std::uint64_t>(trial);
      config.init_scheme = trial % 2 ? InitScheme::kmeans_pp : InitScheme::random_responsibilities;
      const FitResult fit = detail::run_em(x, spec, config, 0);
      for (std::size_t t = 1; t < fit.trace.size(); ++t) {
        if (fit.trace[t].clamped) continue;
        ++checked;
        CHECK(fit.trace[t].log_lik >= fit.trace[t - 1].log_lik - 1e-10);
      }
    }
    CHECK(checked > 1000);
  }

  TEST_CASE("MLccE equals MLE for K = 1") {
    Rng rng(4);
    const DataMatrix x = gaussian_data(100, 2, rng);
    const ModelSpec spec = make_model_spec(make_family(CovarianceStructure::full, Proportions::free, x), 1, 2);
    const FitResult a = fit_mle_em(x, spec, FitConfig{});
    const FitResult b = fit_mlcce(x, spec, FitConfig{});
    CHECK(b.estimator == Estimator::mlcce);
    CHECK(a.params.components[0].mean == b.params.components[0].mean);
    CHECK(a.params.components[0].covariance == b.params.components[0].covariance);
    CHECK(a.contrast.lcc == b.contrast.lcc);
  }

  TEST_CASE("MLccE is close to the MLE when entropy is negligible") {
    const DataMatrix x = separated_1d(1000, 5);
    const ModelSpec spec = make_model_spec(make_family(CovarianceStructure::diagonal, Proportions::free, x), 2, 1);
    const FitPair pair = fit_both(x, spec, FitConfig{});
    const auto a = order_by_first_mean(pair.mle.params), b = order_by_first_mean(pair.mlcce.params);
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(std::abs(pair.mle.params.weights(static_cast<Eigen::Index>(a[k])) -
                     pair.mlcce.params.weights(static_cast<Eigen::Index>(b[k]))) < 1e-3);
      CHECK(std::abs(pair.mle.params.components[a[k]].mean(0) - pair.mlcce.params.components[b[k]].mean(0)) < 1e-3);
      CHECK(std::abs(pair.mle.params.components[a[k]].covariance(0, 0) -
                     pair.mlcce.params.components[b[k]].covariance(0, 0)) < 1e-3);
    }
  }

  TEST_CASE("MLccE on standard normal data finds the symmetric pair") {
    Rng rng(6);
    const DataMatrix x = sample_mixture(mixture_1d({1.0}, {0.0}, {1.0}), 5000, rng);
    const ModelSpec spec =
        make_model_spec(make_family(CovarianceStructure::diagonal_equal_volume, Proportions::equal, x), 2, 1);
    const FitResult fit = fit_mlcce(x, spec, FitConfig{});
    for (const auto& c : fit.params.components) {
      CHECK(std::abs(std::abs(c.mean(0)) - 0.83) < 0.1);
      CHECK(std::abs(c.covariance(0, 0) - 0.31) < 0.1);
    }
    CHECK(fit.params.components[0].mean(0) * fit.params.components[1].mean(0) < 0.0);
  }

  TEST_CASE("MLccE never loses Lcc against its EM start") {
    Rng rng(7);
    for (int trial = 0; trial < 15; ++trial) {
      const int K = 2 + trial % 2, d = 1 + trial % 2;
      const auto s = kAllStructures[static_cast<std::size_t>(trial) % 4];
      const DataMatrix x = sample_mixture(random_params(K, d, rng, s), 120, rng);
      const ModelSpec spec = make_model_spec(make_family(s, Proportions::free, x), K, d);
      FitConfig config;
      config.seed = static_cast<std::uint64_t>(trial);
      const FitResult em = detail::run_em(x, spec, config, 0);
      const FitResult lcc = detail::ascend_lcc(x, spec, config, em);
      CHECK(lcc.contrast.lcc >= em.contrast.lcc - 1e-9);
      CHECK(inside_bounds(lcc));
      const ContrastValues again = conditional_classification_loglik(lcc.params, x);
      CHECK(std::abs(again.lcc - lcc.contrast.lcc) < 1e-9);
    }
  }

  TEST_CASE("results do not depend on the thread count") {
    Rng rng(8);
    const DataMatrix x = sample_mixture(random_params(3, 2, rng), 300, rng);
    const ModelSpec spec = make_model_spec(make_family(CovarianceStructure::full, Proportions::free, x), 3, 2);
    FitConfig one;
    one.seed = 77;
    FitConfig many = one;
    many.n_threads = 4;
    const FitPair a = fit_both(x, spec, one), b = fit_both(x, spec, many);
    CHECK(a.mle.restart_index == b.mle.restart_index);
    CHECK(a.mlcce.restart_index == b.mlcce.restart_index);
    CHECK(a.mle.contrast.log_lik == b.mle.contrast.log_lik);
    CHECK(a.mlcce.contrast.lcc == b.mlcce.contrast.lcc);
    for (std::size_t k = 0; k < 3; ++k) CHECK(a.mlcce.params.components[k].covariance == b.mlcce.params.components[k].covariance);
  }

  TEST_CASE("fit_both agrees with the separate estimators") {
    Rng rng(9);
    const DataMatrix x = sample_mixture(random_params(2, 2, rng), 150, rng);
    const ModelSpec spec = make_model_spec(make_family(CovarianceStructure::diagonal, Proportions::free, x), 2, 2);
    FitConfig config;
    config.n_restarts = 4;
    const FitPair pair = fit_both(x, spec, config);
    CHECK(pair.mle.contrast.log_lik == fit_mle_em(x, spec, config).contrast.log_lik);
    CHECK(pair.mlcce.contrast.lcc == fit_mlcce(x, spec, config).contrast.lcc);
  }

  TEST_CASE("input errors") {
    Rng rng(10);
    const DataMatrix x = gaussian_data(3, 2, rng);
    const ModelSpec spec = make_model_spec(make_family(CovarianceStructure::full, Proportions::free, x), 4, 2);
    CHECK_THROWS_AS(fit_mle_em(x, spec, FitConfig{}), InputError);

    const DataMatrix same = DataMatrix::Ones(10, 2);
    ModelSpec s2 = make_model_spec(wide_family(CovarianceStructure::full, Proportions::free, 2), 2, 2);
    CHECK_THROWS_AS(fit_mle_em(same, s2, FitConfig{}), DegenerateDataError);

    FitConfig bad;
    bad.n_restarts = 0;
    CHECK_THROWS_AS(fit_mle_em(gaussian_data(10, 2, rng), s2, bad), ConfigError);
    CHECK_THROWS_AS(fit_mle_em(gaussian_data(10, 3, rng), s2, FitConfig{}), DimensionMismatch);
  }
}
