#include "lccmix/reparam.hpp"

#include "lccmix/errors.hpp"
#include "lccmix/gaussian.hpp"

#include <algorithm>
#include <cmath>

namespace lccmix {

namespace {

constexpr double kSaturation = 36.0;

double sigmoid(double u) { return u >= 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u)); }

double logit_clamped(double p) {
  if (p <= 0.0) return -kSaturation;
  if (p >= 1.0) return kSaturation;
  return std::clamp(std::log(p) - std::log1p(-p), -kSaturation, kSaturation);
}

// Position of x in [lo, hi] as a logistic coordinate.
double box_encode(double x, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  return logit_clamped((x - lo) / (hi - lo));
}

double box_decode(double u, double lo, double hi) { return lo + (hi - lo) * sigmoid(u); }

// d box_decode / du
double box_slope(double u, double lo, double hi) {
  const double s = sigmoid(u);
  return (hi - lo) * s * (1.0 - s);
}

bool strictly_between(double x, double lo, double hi) { return x > lo && x < hi; }

Eigen::Index cholesky_size(int d) { return static_cast<Eigen::Index>(d) * (d + 1) / 2; }

}  // namespace

Chart::Chart(ModelSpec spec) : spec_(std::move(spec)) {
  const int K = spec_.K, d = spec_.d;
  n_weights_ = spec_.family.proportions == Proportions::free ? K - 1 : 0;
  Eigen::Index n_cov = 0;
  switch (spec_.family.covariance) {
    case CovarianceStructure::spherical: n_cov = K; break;
    case CovarianceStructure::diagonal: n_cov = static_cast<Eigen::Index>(K) * d; break;
    case CovarianceStructure::diagonal_equal_volume: n_cov = 1 + static_cast<Eigen::Index>(K) * (d - 1); break;
    case CovarianceStructure::full: n_cov = K * cholesky_size(d); break;
  }
  size_ = n_weights_ + static_cast<Eigen::Index>(K) * d + n_cov;
}

Eigen::VectorXd Chart::encode(const MixtureParams& params) const {
  const int K = spec_.K, d = spec_.d;
  if (params.num_components() != K || params.dim() != d)
    throw DimensionMismatch("parameters do not match the chart's model");
  const Bounds& b = spec_.family.bounds;
  const double llo = std::log(b.var_floor), lhi = std::log(b.var_ceil);
  Eigen::VectorXd u(size_);

  if (n_weights_ > 0 && 1.0 - K * b.prop_floor <= 0.0) {
    u.segment(weight_offset(), n_weights_).setZero();
  } else if (n_weights_ > 0) {
    const double f = b.prop_floor, c = 1.0 - K * f;
    auto share = [&](int k) { return std::max((params.weights(k) - f) / c, 1e-300); };
    const double last = std::log(share(K - 1));
    for (int k = 0; k < K - 1; ++k)
      u(weight_offset() + k) = std::clamp(std::log(share(k)) - last, -2.0 * kSaturation, 2.0 * kSaturation);
  }

  for (int k = 0; k < K; ++k)
    for (int j = 0; j < d; ++j) {
      const auto& iv = b.mean_box[static_cast<std::size_t>(j)];
      u(mean_offset() + k * d + j) = box_encode(params.components[static_cast<std::size_t>(k)].mean(j), iv.lo, iv.hi);
    }

  Eigen::Index at = cov_offset();
  switch (spec_.family.covariance) {
    case CovarianceStructure::spherical:
      for (const auto& c : params.components) u(at++) = box_encode(std::log(c.covariance.diagonal().mean()), llo, lhi);
      break;
    case CovarianceStructure::diagonal:
      for (const auto& c : params.components)
        for (int j = 0; j < d; ++j) u(at++) = box_encode(std::log(c.covariance(j, j)), llo, lhi);
      break;
    case CovarianceStructure::diagonal_equal_volume: {
      double log_volume = 0.0;
      for (const auto& c : params.components) log_volume += c.covariance.diagonal().array().log().mean();
      log_volume /= K;
      u(at++) = box_encode(log_volume, llo, lhi);
      for (const auto& c : params.components) {
        const Eigen::VectorXd logs = c.covariance.diagonal().array().log().matrix();
        const double own = logs.mean();
        for (int j = 0; j < d - 1; ++j) u(at++) = logs(j) - own;
      }
      break;
    }
    case CovarianceStructure::full:
      for (const auto& c : params.components) {
        const Eigen::MatrixXd L = CholeskyFactor::of(c.covariance).lower;
        for (int r = 0; r < d; ++r)
          for (int q = 0; q <= r; ++q) u(at++) = r == q ? std::log(L(r, r)) : L(r, q);
      }
      break;
  }
  return u;
}

MixtureParams Chart::decode(const Eigen::VectorXd& u) const {
  const int K = spec_.K, d = spec_.d;
  if (u.size() != size_) throw DimensionMismatch("coordinate vector has the wrong length");
  const Bounds& b = spec_.family.bounds;
  const double llo = std::log(b.var_floor), lhi = std::log(b.var_ceil);

  MixtureParams p;
  if (n_weights_ > 0) {
    Eigen::VectorXd eta(K);
    eta.head(K - 1) = u.segment(weight_offset(), K - 1);
    eta(K - 1) = 0.0;
    const double m = eta.maxCoeff();
    const Eigen::VectorXd e = (eta.array() - m).exp().matrix();
    const double f = b.prop_floor, c = 1.0 - K * f;
    p.weights = (f + c * (e / e.sum()).array()).matrix();
  } else {
    p.weights = Eigen::VectorXd::Constant(K, 1.0 / K);
  }

  p.components.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    auto& comp = p.components[static_cast<std::size_t>(k)];
    comp.mean.resize(d);
    for (int j = 0; j < d; ++j) {
      const auto& iv = b.mean_box[static_cast<std::size_t>(j)];
      comp.mean(j) = box_decode(u(mean_offset() + k * d + j), iv.lo, iv.hi);
    }
  }

  Eigen::Index at = cov_offset();
  switch (spec_.family.covariance) {
    case CovarianceStructure::spherical:
      for (auto& c : p.components)
        c.covariance = Eigen::MatrixXd::Identity(d, d) * std::exp(box_decode(u(at++), llo, lhi));
      break;
    case CovarianceStructure::diagonal:
      for (auto& c : p.components) {
        Eigen::VectorXd v(d);
        for (int j = 0; j < d; ++j) v(j) = std::exp(box_decode(u(at++), llo, lhi));
        c.covariance = v.asDiagonal();
      }
      break;
    case CovarianceStructure::diagonal_equal_volume: {
      const double log_volume = box_decode(u(at++), llo, lhi);
      for (auto& c : p.components) {
        Eigen::VectorXd logs(d);
        double sum = 0.0;
        for (int j = 0; j < d - 1; ++j) {
          logs(j) = u(at++);
          sum += logs(j);
        }
        logs(d - 1) = -sum;
        c.covariance = (log_volume + logs.array()).exp().matrix().asDiagonal();
      }
      break;
    }
    case CovarianceStructure::full:
      for (auto& c : p.components) {
        Eigen::MatrixXd L = Eigen::MatrixXd::Zero(d, d);
        for (int r = 0; r < d; ++r)
          for (int q = 0; q <= r; ++q) L(r, q) = r == q ? std::exp(u(at++)) : u(at++);
        c.covariance = L * L.transpose();
        c.covariance = 0.5 * (c.covariance + c.covariance.transpose());
      }
      break;
  }
  return p;
}

bool Chart::strictly_inside(const MixtureParams& params) const {
  const Bounds& b = spec_.family.bounds;
  if (n_weights_ > 0 && !(params.weights.array() > b.prop_floor).all()) return false;
  for (const auto& c : params.components) {
    for (Eigen::Index j = 0; j < c.mean.size(); ++j) {
      const auto& iv = b.mean_box[static_cast<std::size_t>(j)];
      if (!strictly_between(c.mean(j), iv.lo, iv.hi)) return false;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c.covariance, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues().minCoeff() > b.var_floor && eig.eigenvalues().maxCoeff() < b.var_ceil)) return false;
  }
  return true;
}

Eigen::VectorXd Chart::pullback(const Eigen::VectorXd& u, const NaturalGradient& g) const {
  const int K = spec_.K, d = spec_.d;
  const Bounds& b = spec_.family.bounds;
  const double llo = std::log(b.var_floor), lhi = std::log(b.var_ceil);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(size_);

  if (n_weights_ > 0) {
    Eigen::VectorXd eta(K);
    eta.head(K - 1) = u.segment(weight_offset(), K - 1);
    eta(K - 1) = 0.0;
    const Eigen::VectorXd e = (eta.array() - eta.maxCoeff()).exp().matrix();
    const Eigen::VectorXd s = e / e.sum();
    const double c = 1.0 - K * b.prop_floor;
    const double mean_g = s.dot(g.weights);
    for (int j = 0; j < K - 1; ++j) out(weight_offset() + j) = c * s(j) * (g.weights(j) - mean_g);
  }

  for (int k = 0; k < K; ++k)
    for (int j = 0; j < d; ++j) {
      const auto& iv = b.mean_box[static_cast<std::size_t>(j)];
      const Eigen::Index at = mean_offset() + k * d + j;
      out(at) = g.means[static_cast<std::size_t>(k)](j) * box_slope(u(at), iv.lo, iv.hi);
    }

  Eigen::Index at = cov_offset();
  switch (spec_.family.covariance) {
    case CovarianceStructure::spherical:
      for (int k = 0; k < K; ++k, ++at) {
        const double v = std::exp(box_decode(u(at), llo, lhi));
        out(at) = g.covariances[static_cast<std::size_t>(k)].trace() * v * box_slope(u(at), llo, lhi);
      }
      break;
    case CovarianceStructure::diagonal:
      for (int k = 0; k < K; ++k)
        for (int j = 0; j < d; ++j, ++at) {
          const double v = std::exp(box_decode(u(at), llo, lhi));
          out(at) = g.covariances[static_cast<std::size_t>(k)](j, j) * v * box_slope(u(at), llo, lhi);
        }
      break;
    case CovarianceStructure::diagonal_equal_volume: {
      const Eigen::Index volume_at = at++;
      const double log_volume = box_decode(u(volume_at), llo, lhi);
      double d_log_volume = 0.0;
      for (int k = 0; k < K; ++k) {
        Eigen::VectorXd logs(d);
        double sum = 0.0;
        for (int j = 0; j < d - 1; ++j) {
          logs(j) = u(at + j);
          sum += logs(j);
        }
        logs(d - 1) = -sum;
        // derivative with respect to log v_kj
        Eigen::VectorXd gl(d);
        for (int j = 0; j < d; ++j)
          gl(j) = g.covariances[static_cast<std::size_t>(k)](j, j) * std::exp(log_volume + logs(j));
        d_log_volume += gl.sum();
        for (int j = 0; j < d - 1; ++j) out(at++) = gl(j) - gl(d - 1);
      }
      out(volume_at) = d_log_volume * box_slope(u(volume_at), llo, lhi);
      break;
    }
    case CovarianceStructure::full:
      for (int k = 0; k < K; ++k) {
        Eigen::MatrixXd L = Eigen::MatrixXd::Zero(d, d);
        Eigen::Index read = at;
        for (int r = 0; r < d; ++r)
          for (int q = 0; q <= r; ++q, ++read) L(r, q) = r == q ? std::exp(u(read)) : u(read);
        const Eigen::MatrixXd& G = g.covariances[static_cast<std::size_t>(k)];
        const Eigen::MatrixXd dL = (G + G.transpose()) * L;
        for (int r = 0; r < d; ++r)
          for (int q = 0; q <= r; ++q, ++at) out(at) = r == q ? dL(r, r) * L(r, r) : dL(r, q);
      }
      break;
  }
  return out;
}

ValueAndGradient contrast_value_and_gradient(const Chart& chart, const Eigen::VectorXd& coords,
                                             const DataMatrix& data, ContrastKind kind) {
  const MixtureParams params = chart.decode(coords);
  const ResponsibilityMatrix r = responsibilities(params, data);
  const Eigen::Index n = data.rows();
  const int K = params.num_components();
  const int d = params.dim();

  // d(contrast)/d(log pi_k + log phi_ik) for each observation.
  Eigen::MatrixXd w(n, K);
  ValueAndGradient out;
  double log_lik = 0.0, ent = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    log_lik += r.log_mixture(i);
    if (kind == ContrastKind::log_likelihood) {
      w.row(i) = r.tau.row(i);
      continue;
    }
    const double e = K == 1 ? 0.0 : row_entropy(r, i);
    ent += e;
    for (int k = 0; k < K; ++k) {
      const double t = r.tau(i, k);
      w(i, k) = t == 0.0 ? 0.0 : t * (1.0 + r.log_tau(i, k) + e);
    }
  }
  out.value = log_lik - ent;

  Chart::NaturalGradient g;
  g.weights.resize(K);
  for (int k = 0; k < K; ++k) {
    const auto& comp = params.components[static_cast<std::size_t>(k)];
    const double wk = w.col(k).sum();
    g.weights(k) = wk / params.weights(k);

    const CholeskyFactor chol = CholeskyFactor::of(comp.covariance);
    const auto llt = chol.lower.triangularView<Eigen::Lower>();
    // z_i = Sigma^{-1} (x_i - mu), one observation per column
    Eigen::MatrixXd z = (data.rowwise() - comp.mean.transpose()).transpose();
    llt.solveInPlace(z);
    llt.transpose().solveInPlace(z);
    Eigen::MatrixXd precision = Eigen::MatrixXd::Identity(d, d);
    llt.solveInPlace(precision);
    llt.transpose().solveInPlace(precision);

    g.means.push_back(z * w.col(k));
    const Eigen::MatrixXd weighted = z * w.col(k).asDiagonal();
    g.covariances.push_back(0.5 * (weighted * z.transpose() - wk * precision));
  }
  out.gradient = chart.pullback(coords, g);
  return out;
}

namespace {

Eigen::VectorXd gradient_at(const MixtureParams& params, const DataMatrix& data, const ModelSpec& spec,
                            ContrastKind kind) {
  const Chart chart(spec);
  if (!chart.strictly_inside(params))
    throw InputError("parameters lie on the boundary of the bounded space; chart gradient undefined");
  return contrast_value_and_gradient(chart, chart.encode(params), data, kind).gradient;
}

}  // namespace

Eigen::VectorXd lcc_gradient(const MixtureParams& params, const DataMatrix& data, const ModelSpec& spec) {
  return gradient_at(params, data, spec, ContrastKind::lcc);
}

Eigen::VectorXd loglik_gradient(const MixtureParams& params, const DataMatrix& data, const ModelSpec& spec) {
  return gradient_at(params, data, spec, ContrastKind::log_likelihood);
}

}  // namespace lccmix
