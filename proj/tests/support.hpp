#pragma once

#include "lccmix/core_types.hpp"
#include "lccmix/gaussian.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace lccmix::testing {

inline const std::vector<CovarianceStructure> kAllStructures = {
    CovarianceStructure::spherical, CovarianceStructure::diagonal, CovarianceStructure::diagonal_equal_volume,
    CovarianceStructure::full};

inline DataMatrix gaussian_data(Eigen::Index n, int d, Rng& rng, double spread = 3.0) {
  std::normal_distribution<double> z(0.0, spread);
  DataMatrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = z(rng);
  return x;
}

inline Eigen::MatrixXd random_spd(int d, Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = z(rng);
  return a * a.transpose() / d + 0.3 * Eigen::MatrixXd::Identity(d, d);
}

// Parameters with the structure of `s` and moderate values; not projected.
inline MixtureParams random_params(int K, int d, Rng& rng, CovarianceStructure s = CovarianceStructure::full,
                                   Proportions props = Proportions::free) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  std::normal_distribution<double> z(0.0, 2.0);
  MixtureParams p;
  p.weights.resize(K);
  for (int k = 0; k < K; ++k) p.weights(k) = props == Proportions::equal ? 1.0 : u(rng);
  p.weights /= p.weights.sum();
  double volume = 0.0;
  for (int k = 0; k < K; ++k) {
    GaussianComponent c;
    c.mean.resize(d);
    for (int j = 0; j < d; ++j) c.mean(j) = z(rng);
    switch (s) {
      case CovarianceStructure::full: c.covariance = random_spd(d, rng); break;
      case CovarianceStructure::spherical: c.covariance = Eigen::MatrixXd::Identity(d, d) * (0.3 + u(rng)); break;
      case CovarianceStructure::diagonal:
      case CovarianceStructure::diagonal_equal_volume: {
        Eigen::VectorXd v(d);
        for (int j = 0; j < d; ++j) v(j) = 0.3 + u(rng);
        if (s == CovarianceStructure::diagonal_equal_volume) {
          const double g = std::exp(v.array().log().mean());
          if (k == 0) volume = 0.5 + u(rng);
          v *= volume / g;
        }
        c.covariance = v.asDiagonal();
        break;
      }
    }
    p.components.push_back(std::move(c));
  }
  return p;
}

inline ModelFamily wide_family(CovarianceStructure s, Proportions props, int d) {
  ModelFamily f;
  f.covariance = s;
  f.proportions = props;
  f.bounds.prop_floor = 1e-3;
  f.bounds.var_floor = 1e-3;
  f.bounds.var_ceil = 1e3;
  f.bounds.mean_box.assign(static_cast<std::size_t>(d), Interval{-50.0, 50.0});
  return f;
}

// Direct evaluation of the 1-d normal density, no shared code with the library.
inline double normal_pdf(double x, double mean, double var) {
  return std::exp(-0.5 * (x - mean) * (x - mean) / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

inline MixtureParams mixture_1d(std::vector<double> w, std::vector<double> m, std::vector<double> v) {
  MixtureParams p;
  p.weights = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  for (std::size_t k = 0; k < w.size(); ++k)
    p.components.push_back({Eigen::VectorXd::Constant(1, m[k]), Eigen::MatrixXd::Constant(1, 1, v[k])});
  return p;
}

inline DataMatrix column(std::vector<double> xs) {
  DataMatrix x(static_cast<Eigen::Index>(xs.size()), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = xs[i];
  return x;
}

inline std::string data_path(const std::string& name) { return std::string(LCCMIX_TEST_DATA_DIR) + "/" + name; }

}  // namespace lccmix::testing
