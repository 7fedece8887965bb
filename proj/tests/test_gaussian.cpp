#include "doctest.h"

#include "lccmix/errors.hpp"
#include "lccmix/gaussian.hpp"
#include "support.hpp"

#include <gsl/gsl_integration.h>

using namespace lccmix;
using namespace lccmix::testing;

namespace {

CholeskyFactor chol_of(std::initializer_list<double> diag) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(diag.size()));
  Eigen::Index j = 0;
  for (double x : diag) v(j++) = x;
  return CholeskyFactor::of(v.asDiagonal());
}

struct DensityArgs {
  Eigen::VectorXd mean;
  CholeskyFactor chol;
};

double density_at(double x, void* raw) {
  const auto* a = static_cast<const DensityArgs*>(raw);
  Eigen::VectorXd v(1);
  v(0) = x;
  return std::exp(log_gaussian_density(v, a->mean, a->chol));
}

}  // namespace

TEST_SUITE("gaussian-numerics") {
  TEST_CASE("standard normal density at the mode and one unit away") {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
    const CholeskyFactor id = chol_of({1.0});
    CHECK(log_gaussian_density(zero, zero, id) == doctest::Approx(-0.9189385332046727).epsilon(1e-15));
    CHECK(log_gaussian_density(Eigen::VectorXd::Ones(1), zero, id) ==
          doctest::Approx(-1.4189385332046727).epsilon(1e-15));
  }

  TEST_CASE("2-d diagonal density equals a product of 1-d densities") {
    const Eigen::VectorXd x = Eigen::VectorXd::Ones(2);
    const double oracle = 2.0 * std::log(normal_pdf(1.0, 0.0, 2.0));
    CHECK(log_gaussian_density(x, Eigen::VectorXd::Zero(2), chol_of({2.0, 2.0})) ==
          doctest::Approx(oracle).epsilon(1e-14));
  }

  TEST_CASE("full covariance density against the explicit formula") {
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::MatrixXd s = random_spd(3, rng);
      const Eigen::VectorXd m = Eigen::VectorXd::Random(3), x = Eigen::VectorXd::Random(3) * 2.0;
      const double oracle = -1.5 * std::log(2.0 * std::numbers::pi) - 0.5 * std::log(s.determinant()) -
                            0.5 * (x - m).dot(s.inverse() * (x - m));
      CHECK(log_gaussian_density(x, m, CholeskyFactor::of(s)) == doctest::Approx(oracle).epsilon(1e-12));
    }
  }

  TEST_CASE("batched densities equal the single-point path") {
    Rng rng(4);
    const DataMatrix x = gaussian_data(25, 3, rng);
    const Eigen::MatrixXd s = random_spd(3, rng);
    const Eigen::VectorXd m = Eigen::VectorXd::Random(3);
    const CholeskyFactor c = CholeskyFactor::of(s);
    const Eigen::VectorXd batch = log_gaussian_densities(x, m, c);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      CHECK(batch(i) == doctest::Approx(log_gaussian_density(x.row(i).transpose(), m, c)).epsilon(1e-13));
  }

  TEST_CASE("Cholesky reconstruction") {
    Rng rng(5);
    for (int d = 1; d <= 5; ++d) {
      const Eigen::MatrixXd s = random_spd(d, rng);
      const CholeskyFactor c = CholeskyFactor::of(s);
      CHECK((c.reconstruct() - s).norm() / s.norm() < 1e-10);
      CHECK(c.log_det == doctest::Approx(std::log(s.determinant())).epsilon(1e-12));
    }
    CHECK_THROWS_AS(CholeskyFactor::of(-Eigen::MatrixXd::Identity(2, 2)), NumericError);
  }

  TEST_CASE("dimension mismatch is rejected") {
    CHECK_THROWS_AS(log_gaussian_density(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(1), chol_of({1.0})),
                    DimensionMismatch);
  }

  TEST_CASE("density integrates to one") {
    Rng rng(6);
    std::uniform_real_distribution<double> mu(-3.0, 3.0), var(0.1, 10.0);
    gsl_integration_workspace* ws = gsl_integration_workspace_alloc(1000);
    for (int trial = 0; trial < 20; ++trial) {
      DensityArgs args{Eigen::VectorXd::Constant(1, mu(rng)), chol_of({var(rng)})};
      gsl_function f{&density_at, &args};
      double result = 0.0, err = 0.0;
      gsl_integration_qagi(&f, 1e-12, 1e-10, 1000, ws, &result, &err);
      CHECK(result == doctest::Approx(1.0).epsilon(1e-6));
    }
    gsl_integration_workspace_free(ws);
  }

  TEST_CASE("coordinate permutation invariance") {
    Rng rng(7);
    const Eigen::MatrixXd s = random_spd(4, rng);
    const Eigen::VectorXd m = Eigen::VectorXd::Random(4), x = Eigen::VectorXd::Random(4);
    Eigen::PermutationMatrix<4> perm;
    perm.indices() << 2, 0, 3, 1;
    const double a = log_gaussian_density(x, m, CholeskyFactor::of(s));
    const Eigen::MatrixXd sp = perm * s * perm.transpose();
    const double b = log_gaussian_density(perm * x, perm * m, CholeskyFactor::of(sp));
    CHECK(a == doctest::Approx(b).epsilon(1e-13));
  }

  TEST_CASE("sampling moments") {
    Rng rng(8);
    const Eigen::VectorXd m = (Eigen::VectorXd(2) << 1.0, -2.0).finished();
    const CholeskyFactor id = chol_of({1.0, 1.0});
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(2);
    const int n = 100000;
    for (int i = 0; i < n; ++i) sum += sample_gaussian(m, id, rng);
    CHECK((sum / n - m).cwiseAbs().maxCoeff() < 0.02);

    const CholeskyFactor four = chol_of({4.0});
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = sample_gaussian(Eigen::VectorXd::Zero(1), four, rng)(0);
      s1 += v;
      s2 += v * v;
    }
    const double var = s2 / n - (s1 / n) * (s1 / n);
    CHECK(std::abs(var - 4.0) < 0.1);
  }

  TEST_CASE("sampling is deterministic per seed") {
    const CholeskyFactor c = chol_of({1.0, 3.0});
    Rng a(99), b(99);
    for (int i = 0; i < 100; ++i) CHECK(sample_gaussian(Eigen::VectorXd::Zero(2), c, a) == sample_gaussian(Eigen::VectorXd::Zero(2), c, b));
  }

  TEST_CASE("derived seeds are distinct and stable") {
    CHECK(derive_seed(1, 2) == derive_seed(1, 2));
    CHECK(derive_seed(1, 2) != derive_seed(1, 3));
    CHECK(derive_seed(1, 2) != derive_seed(2, 2));
    CHECK(derive_seed(5, 1, 2) != derive_seed(5, 2, 1));
  }
}
