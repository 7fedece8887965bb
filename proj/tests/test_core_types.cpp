#include "doctest.h"

#include "lccmix/core_types.hpp"
#include "lccmix/errors.hpp"
#include "support.hpp"

using namespace lccmix;
using namespace lccmix::testing;

namespace {

ModelFamily family_of(CovarianceStructure s, Proportions p) {
  ModelFamily f;
  f.covariance = s;
  f.proportions = p;
  return f;
}

bool same(const MixtureParams& a, const MixtureParams& b) {
  if (a.num_components() != b.num_components() || a.weights != b.weights) return false;
  for (std::size_t k = 0; k < a.components.size(); ++k)
    if (a.components[k].mean != b.components[k].mean || a.components[k].covariance != b.components[k].covariance)
      return false;
  return true;
}

bool within_bounds(const MixtureParams& p, const ModelFamily& f) {
  const double slack = 1e-12;
  for (int k = 0; k < p.num_components(); ++k) {
    if (p.weights(k) < f.bounds.prop_floor - slack) return false;
    const auto& c = p.components[static_cast<std::size_t>(k)];
    for (Eigen::Index j = 0; j < c.mean.size(); ++j) {
      const auto& iv = f.bounds.mean_box[static_cast<std::size_t>(j)];
      if (c.mean(j) < iv.lo || c.mean(j) > iv.hi) return false;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c.covariance);
    if (eig.eigenvalues().minCoeff() < f.bounds.var_floor * (1 - 1e-10)) return false;
    if (eig.eigenvalues().maxCoeff() > f.bounds.var_ceil * (1 + 1e-10)) return false;
  }
  return std::abs(p.weights.sum() - 1.0) < 1e-12;
}

}  // namespace

TEST_SUITE("core-types") {
  TEST_CASE("free parameter counts") {
    CHECK(count_free_parameters(family_of(CovarianceStructure::diagonal, Proportions::equal), 2, 2) == 8);
    CHECK(count_free_parameters(family_of(CovarianceStructure::diagonal_equal_volume, Proportions::equal), 2, 2) == 7);
    CHECK(count_free_parameters(family_of(CovarianceStructure::full, Proportions::free), 1, 3) == 9);
    CHECK(count_free_parameters(family_of(CovarianceStructure::spherical, Proportions::free), 3, 2) == 2 + 6 + 3);
    CHECK(count_free_parameters(family_of(CovarianceStructure::full, Proportions::free), 2, 2) == 1 + 4 + 6);
  }

  TEST_CASE("parameter count is nondecreasing in K") {
    for (auto s : kAllStructures)
      for (auto p : {Proportions::free, Proportions::equal})
        for (int d = 1; d <= 4; ++d)
          for (int K = 1; K < 8; ++K)
            CHECK(count_free_parameters(family_of(s, p), K + 1, d) >= count_free_parameters(family_of(s, p), K, d));
  }

  TEST_CASE("model spec dimension follows the family") {
    const ModelSpec spec = make_model_spec(wide_family(CovarianceStructure::diagonal, Proportions::equal, 2), 2, 2);
    CHECK(spec.dimension() == 8);
  }

  TEST_CASE("family validation") {
    ModelFamily f = wide_family(CovarianceStructure::full, Proportions::free, 2);
    CHECK_NOTHROW(f.validate(3, 2));
    CHECK_THROWS_AS(f.validate(3, 3), ConfigError);
    f.bounds.prop_floor = 0.6;
    CHECK_THROWS_AS(f.validate(2, 2), ConfigError);
    f.bounds.prop_floor = 1e-3;
    f.bounds.var_ceil = 1e-4;
    CHECK_THROWS_AS(f.validate(2, 2), ConfigError);
  }

  TEST_CASE("floored renormalization of weights") {
    Eigen::VectorXd w(2);
    w << 0.999, 0.001;
    const Eigen::VectorXd out = detail::floor_weights(w, 0.05);
    // Clip the small weight to the floor, rescale the rest to fill 1 - 0.05.
    CHECK(out(0) == doctest::Approx(0.95).epsilon(1e-15));
    CHECK(out(1) == doctest::Approx(0.05).epsilon(1e-15));

    Eigen::VectorXd w3(3);
    w3 << 0.9, 0.09, 0.01;
    const Eigen::VectorXd o3 = detail::floor_weights(w3, 0.1);
    CHECK(o3.sum() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(o3(2) == doctest::Approx(0.1));
    CHECK(o3(1) == doctest::Approx(0.1));
    CHECK(o3(0) == doctest::Approx(0.8));
  }

  TEST_CASE("projection clamps a tiny variance") {
    ModelFamily f = wide_family(CovarianceStructure::full, Proportions::free, 1);
    f.bounds.var_floor = 1e-4;
    const MixtureParams p = mixture_1d({1.0}, {0.0}, {1e-9});
    const MixtureParams q = project_to_bounds(p, f);
    CHECK(q.components[0].covariance(0, 0) == doctest::Approx(1e-4).epsilon(1e-12));
  }

  TEST_CASE("projection is the identity on feasible parameters") {
    Rng rng(11);
    for (auto s : kAllStructures)
      for (auto props : {Proportions::free, Proportions::equal}) {
        const ModelFamily f = wide_family(s, props, 3);
        const MixtureParams p = random_params(3, 3, rng, s, props);
        CHECK(same(project_to_bounds(p, f), p));
      }
  }

  TEST_CASE("projection is idempotent and lands inside the bounds") {
    Rng rng(12);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
      const auto s = kAllStructures[static_cast<std::size_t>(trial) % kAllStructures.size()];
      const auto props = trial % 2 ? Proportions::free : Proportions::equal;
      ModelFamily f = wide_family(s, props, 2);
      f.bounds.prop_floor = 0.1;
      f.bounds.var_floor = 0.5;
      f.bounds.var_ceil = 2.0;
      f.bounds.mean_box = {{-1.0, 1.0}, {-2.0, 0.5}};
      MixtureParams p = random_params(3, 2, rng, CovarianceStructure::full);
      p.weights << 0.9, 0.099, 0.001;
      for (auto& c : p.components) {
        c.mean *= 3.0;
        c.covariance *= std::exp(3.0 * u(rng));
      }
      const MixtureParams once = project_to_bounds(p, f);
      const MixtureParams twice = project_to_bounds(once, f);
      CHECK(within_bounds(once, f));
      CHECK_NOTHROW(once.validate());
      for (int k = 0; k < 3; ++k) {
        CHECK((twice.components[static_cast<std::size_t>(k)].covariance -
               once.components[static_cast<std::size_t>(k)].covariance)
                  .cwiseAbs()
                  .maxCoeff() <= 1e-12);
        CHECK(twice.components[static_cast<std::size_t>(k)].mean == once.components[static_cast<std::size_t>(k)].mean);
        CHECK(std::abs(twice.weights(k) - once.weights(k)) <= 1e-15);
      }
    }
  }

  TEST_CASE("projection enforces structure") {
    Rng rng(13);
    const MixtureParams p = random_params(2, 3, rng, CovarianceStructure::full);
    const MixtureParams diag = project_to_bounds(p, wide_family(CovarianceStructure::diagonal, Proportions::free, 3));
    const MixtureParams sph = project_to_bounds(p, wide_family(CovarianceStructure::spherical, Proportions::free, 3));
    const MixtureParams eqv =
        project_to_bounds(p, wide_family(CovarianceStructure::diagonal_equal_volume, Proportions::equal, 3));
    for (int k = 0; k < 2; ++k) {
      const auto& cd = diag.components[static_cast<std::size_t>(k)].covariance;
      CHECK((cd - Eigen::MatrixXd(cd.diagonal().asDiagonal())).norm() == 0.0);
      const auto& cs = sph.components[static_cast<std::size_t>(k)].covariance;
      CHECK(cs(0, 0) == doctest::Approx(p.components[static_cast<std::size_t>(k)].covariance.diagonal().mean()));
      CHECK(cs(1, 1) == cs(0, 0));
      CHECK(eqv.weights(k) == doctest::Approx(0.5));
    }
    CHECK(eqv.components[0].covariance.determinant() ==
          doctest::Approx(eqv.components[1].covariance.determinant()).epsilon(1e-9));
  }

  TEST_CASE("projection rejects dimension mismatch") {
    Rng rng(14);
    const MixtureParams p = random_params(2, 3, rng);
    CHECK_THROWS_AS(project_to_bounds(p, wide_family(CovarianceStructure::full, Proportions::free, 2)), InputError);
  }

  TEST_CASE("mixture parameter invariants") {
    MixtureParams p = mixture_1d({0.4, 0.6}, {0, 1}, {1, 1});
    CHECK_NOTHROW(p.validate());
    p.weights << 0.5, 0.6;
    CHECK_THROWS_AS(p.validate(), InputError);
    p = mixture_1d({0.4, 0.6}, {0, 1}, {1, -1});
    CHECK_THROWS_AS(p.validate(), InputError);
  }

  TEST_CASE("label matrix rows hold exactly one entry") {
    Eigen::MatrixXd z(3, 2);
    z << 1, 0, 0, 1, 1, 0;
    const LabelMatrix l = LabelMatrix::from_indicator(z);
    CHECK(l.labels() == std::vector<int>{0, 1, 0});
    z(2, 1) = 1;
    CHECK_THROWS_AS(LabelMatrix::from_indicator(z), InputError);
    CHECK_THROWS_AS(LabelMatrix({0, 2}, 2), InputError);
  }

  TEST_CASE("default bounds scale with the data") {
    DataMatrix x(4, 2);
    x << 0, 0, 1, 10, 2, 20, 3, 30;
    const Bounds b = default_bounds(x);
    CHECK(b.prop_floor == 1e-3);
    CHECK(b.var_floor == doctest::Approx(1e-4 * 1.25));
    CHECK(b.var_ceil == doctest::Approx(1e4 * 125.0));
    CHECK(b.mean_box[1].lo == doctest::Approx(-3.0 * std::sqrt(125.0)));
    DataMatrix flat = DataMatrix::Ones(5, 1);
    CHECK_THROWS_AS(default_bounds(flat), DegenerateDataError);
  }

  TEST_CASE("name round trips") {
    for (auto s : kAllStructures) CHECK(parse_covariance_structure(to_string(s)) == s);
    CHECK(parse_proportions("equal") == Proportions::equal);
    CHECK_THROWS_AS(parse_covariance_structure("banana"), ConfigError);
  }
}
