#include "lccmix/core_types.hpp"

#include "lccmix/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lccmix {

namespace {

constexpr double kFeasibleSlack = 1e-12;

bool within(double v, double lo, double hi) {
  return v >= lo * (1.0 - kFeasibleSlack) && v <= hi * (1.0 + kFeasibleSlack);
}

bool is_diagonal(const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      if (r != c && m(r, c) != 0.0) return false;
  return true;
}

}  // namespace

std::string to_string(CovarianceStructure s) {
  switch (s) {
    case CovarianceStructure::spherical: return "spherical";
    case CovarianceStructure::diagonal: return "diag";
    case CovarianceStructure::diagonal_equal_volume: return "diag-eqvol";
    case CovarianceStructure::full: return "full";
  }
  return "unknown";
}

std::string to_string(Proportions p) { return p == Proportions::free ? "free" : "equal"; }

CovarianceStructure parse_covariance_structure(const std::string& name) {
  if (name == "spherical") return CovarianceStructure::spherical;
  if (name == "diag" || name == "diagonal") return CovarianceStructure::diagonal;
  if (name == "diag-eqvol") return CovarianceStructure::diagonal_equal_volume;
  if (name == "full") return CovarianceStructure::full;
  throw ConfigError("unknown covariance model '" + name + "'");
}

Proportions parse_proportions(const std::string& name) {
  if (name == "free") return Proportions::free;
  if (name == "equal") return Proportions::equal;
  throw ConfigError("unknown proportions '" + name + "'");
}

void ModelFamily::validate(int K, int d) const {
  if (K < 1 || d < 1) throw ConfigError("K and d must be positive");
  if (!(bounds.prop_floor > 0.0) || bounds.prop_floor * K > 1.0)
    throw ConfigError("prop_floor must lie in (0, 1/K]");
  if (!(bounds.var_floor > 0.0) || !(bounds.var_ceil >= bounds.var_floor))
    throw ConfigError("variance bounds must satisfy 0 < var_floor <= var_ceil");
  if (static_cast<int>(bounds.mean_box.size()) != d)
    throw ConfigError("mean box has " + std::to_string(bounds.mean_box.size()) +
                      " intervals, expected " + std::to_string(d));
  for (const auto& iv : bounds.mean_box)
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || iv.lo > iv.hi)
      throw ConfigError("mean box intervals must be bounded and nonempty");
}

void MixtureParams::validate() const {
  const int K = num_components();
  if (K == 0) throw InputError("mixture has no components");
  if (weights.size() != K) throw DimensionMismatch("weights and components disagree in count");
  if ((weights.array() < 0.0).any()) throw InputError("negative mixture weight");
  if (std::abs(weights.sum() - 1.0) > 1e-12) throw InputError("weights do not sum to one");
  const auto d = components.front().mean.size();
  for (const auto& c : components) {
    if (c.mean.size() != d || c.covariance.rows() != d || c.covariance.cols() != d)
      throw DimensionMismatch("components have inconsistent dimensions");
    if ((c.covariance - c.covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw InputError("covariance is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c.covariance, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues().minCoeff() > 0.0)) throw InputError("covariance is not positive definite");
  }
}

int count_free_parameters(const ModelFamily& family, int K, int d) {
  const int props = family.proportions == Proportions::free ? K - 1 : 0;
  const int means = K * d;
  int cov = 0;
  switch (family.covariance) {
    case CovarianceStructure::spherical: cov = K; break;
    case CovarianceStructure::diagonal: cov = K * d; break;
    case CovarianceStructure::diagonal_equal_volume: cov = K * (d - 1) + 1; break;
    case CovarianceStructure::full: cov = K * d * (d + 1) / 2; break;
  }
  return props + means + cov;
}

ModelSpec make_model_spec(ModelFamily family, int K, int d) {
  family.validate(K, d);
  return ModelSpec{std::move(family), K, d};
}

LabelMatrix::LabelMatrix(std::vector<int> labels, int K) : labels_(std::move(labels)), K_(K) {
  if (K < 1) throw InputError("label matrix needs K >= 1");
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] < 0 || labels_[i] >= K)
      throw InputError("label out of range in row " + std::to_string(i));
}

LabelMatrix LabelMatrix::from_indicator(const Eigen::MatrixXd& z) {
  std::vector<int> labels(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    int hot = -1;
    for (Eigen::Index k = 0; k < z.cols(); ++k) {
      if (z(i, k) == 1.0) {
        if (hot >= 0) throw InputError("label row " + std::to_string(i) + " has several ones");
        hot = static_cast<int>(k);
      } else if (z(i, k) != 0.0) {
        throw InputError("label row " + std::to_string(i) + " is not binary");
      }
    }
    if (hot < 0) throw InputError("label row " + std::to_string(i) + " has no one");
    labels[static_cast<std::size_t>(i)] = hot;
  }
  return LabelMatrix(std::move(labels), static_cast<int>(z.cols()));
}

Bounds default_bounds(const DataMatrix& data) {
  if (data.rows() < 1 || data.cols() < 1) throw InputError("empty data matrix");
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Eigen::RowVectorXd var = (data.rowwise() - mean).array().square().colwise().mean();
  if ((var.array() <= 0.0).all()) throw DegenerateDataError("all observations are identical");
  for (Eigen::Index j = 0; j < var.size(); ++j)
    if (!(var(j) > 0.0)) throw DegenerateDataError("coordinate " + std::to_string(j) + " is constant");

  Bounds b;
  b.prop_floor = 1e-3;
  b.var_floor = 1e-4 * var.minCoeff();
  b.var_ceil = 1e4 * var.maxCoeff();
  const Eigen::RowVectorXd lo = data.colwise().minCoeff();
  const Eigen::RowVectorXd hi = data.colwise().maxCoeff();
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    const double sd = std::sqrt(var(j));
    b.mean_box.push_back({lo(j) - 3.0 * sd, hi(j) + 3.0 * sd});
  }
  return b;
}

ModelFamily make_family(CovarianceStructure covariance, Proportions proportions, const DataMatrix& data) {
  return ModelFamily{covariance, proportions, default_bounds(data)};
}

namespace detail {

Eigen::VectorXd floor_weights(const Eigen::VectorXd& weights, double floor) {
  const Eigen::Index K = weights.size();
  const double total = weights.sum();
  if ((weights.array() >= floor).all() && std::abs(total - 1.0) <= 1e-12) return weights;

  Eigen::VectorXd w = total > 0.0 ? Eigen::VectorXd(weights / total)
                                  : Eigen::VectorXd::Constant(K, 1.0 / static_cast<double>(K));
  std::vector<bool> floored(static_cast<std::size_t>(K), false);
  double scale = 1.0;
  for (bool changed = true; changed;) {
    changed = false;
    double free_mass = 0.0;
    Eigen::Index n_floored = 0;
    for (Eigen::Index k = 0; k < K; ++k) {
      if (floored[static_cast<std::size_t>(k)]) ++n_floored;
      else free_mass += w(k);
    }
    if (n_floored == K) break;
    if (free_mass <= 0.0) {
      // everything left is zero: spread the remainder evenly
      const double rest = (1.0 - floor * static_cast<double>(n_floored)) /
                          static_cast<double>(K - n_floored);
      for (Eigen::Index k = 0; k < K; ++k)
        if (!floored[static_cast<std::size_t>(k)]) w(k) = rest;
      free_mass = rest * static_cast<double>(K - n_floored);
    }
    scale = (1.0 - floor * static_cast<double>(n_floored)) / free_mass;
    for (Eigen::Index k = 0; k < K; ++k) {
      if (!floored[static_cast<std::size_t>(k)] && scale * w(k) < floor) {
        floored[static_cast<std::size_t>(k)] = true;
        changed = true;
      }
    }
  }
  Eigen::VectorXd out(K);
  for (Eigen::Index k = 0; k < K; ++k) out(k) = floored[static_cast<std::size_t>(k)] ? floor : scale * w(k);
  return out;
}

namespace {

// Returns true if a clamp was applied.
bool project_full(Eigen::MatrixXd& cov, double lo, double hi) {
  cov = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  if (within(ev.minCoeff(), lo, hi) && within(ev.maxCoeff(), lo, hi)) return false;
  const Eigen::VectorXd clamped = ev.cwiseMax(lo).cwiseMin(hi);
  cov = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
  cov = 0.5 * (cov + cov.transpose());
  return true;
}

bool project_diagonal(Eigen::MatrixXd& cov, double lo, double hi) {
  bool clamped = false;
  Eigen::VectorXd diag = cov.diagonal();
  for (Eigen::Index j = 0; j < diag.size(); ++j) {
    if (!within(diag(j), lo, hi)) {
      diag(j) = std::clamp(diag(j), lo, hi);
      clamped = true;
    }
  }
  if (!is_diagonal(cov) || clamped) cov = diag.asDiagonal();
  return clamped;
}

bool project_spherical(Eigen::MatrixXd& cov, double lo, double hi) {
  const Eigen::Index d = cov.rows();
  const Eigen::VectorXd diag = cov.diagonal();
  const bool already = is_diagonal(cov) && (diag.array() == diag(0)).all();
  double v = diag.mean();
  if (already && within(v, lo, hi)) return false;
  const bool clamped = !within(v, lo, hi);
  v = std::clamp(v, lo, hi);
  cov = Eigen::MatrixXd::Identity(d, d) * v;
  return clamped;
}

// Equal volume in log space: log diag_kj = v + c_k * s_kj with sum_j s_kj = 0.
bool project_equal_volume(std::vector<GaussianComponent>& comps, double lo, double hi) {
  const auto K = comps.size();
  const Eigen::Index d = comps.front().covariance.rows();
  const double llo = std::log(lo), lhi = std::log(hi);

  std::vector<Eigen::VectorXd> logs(K);
  bool feasible = true;
  for (std::size_t k = 0; k < K; ++k) {
    const Eigen::MatrixXd& cov = comps[k].covariance;
    Eigen::VectorXd diag = cov.diagonal().cwiseMax(std::numeric_limits<double>::min());
    if (!is_diagonal(cov)) feasible = false;
    for (Eigen::Index j = 0; j < d; ++j)
      if (!within(diag(j), lo, hi)) feasible = false;
    logs[k] = diag.array().log().matrix();
  }
  double vol = 0.0;
  for (const auto& l : logs) vol += l.mean();
  vol /= static_cast<double>(K);
  for (const auto& l : logs)
    if (std::abs(l.mean() - logs.front().mean()) > 1e-10) feasible = false;
  if (feasible) return false;

  bool clamped = false;
  if (vol < llo || vol > lhi) {
    clamped = true;
    vol = std::clamp(vol, llo, lhi);
  }
  for (std::size_t k = 0; k < K; ++k) {
    const Eigen::VectorXd shape = logs[k].array() - logs[k].mean();
    double c = 1.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      if (shape(j) > 0.0) c = std::min(c, (lhi - vol) / shape(j));
      else if (shape(j) < 0.0) c = std::min(c, (llo - vol) / shape(j));
    }
    c = std::max(c, 0.0);
    if (c < 1.0) clamped = true;
    const Eigen::VectorXd diag = (vol + c * shape.array()).exp().matrix();
    comps[k].covariance = diag.asDiagonal();
  }
  return clamped;
}

}  // namespace

Projection project(const MixtureParams& params, const ModelFamily& family) {
  const int K = params.num_components();
  const int d = params.dim();
  if (K < 1 || params.weights.size() != K) throw DimensionMismatch("weights and components disagree in count");
  if (static_cast<int>(family.bounds.mean_box.size()) != d)
    throw DimensionMismatch("parameter dimension " + std::to_string(d) + " does not match family dimension " +
                            std::to_string(family.bounds.mean_box.size()));
  for (const auto& c : params.components)
    if (c.mean.size() != d || c.covariance.rows() != d || c.covariance.cols() != d)
      throw DimensionMismatch("components have inconsistent dimensions");

  Projection out{params, false};
  MixtureParams& p = out.params;
  const Bounds& b = family.bounds;

  if (family.proportions == Proportions::equal) {
    p.weights = Eigen::VectorXd::Constant(K, 1.0 / K);
  } else {
    if ((p.weights.array() < b.prop_floor).any()) out.clamped = true;
    p.weights = floor_weights(p.weights, b.prop_floor);
  }

  for (auto& c : p.components) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const auto& iv = b.mean_box[static_cast<std::size_t>(j)];
      if (c.mean(j) < iv.lo || c.mean(j) > iv.hi) {
        c.mean(j) = std::clamp(c.mean(j), iv.lo, iv.hi);
        out.clamped = true;
      }
    }
  }

  switch (family.covariance) {
    case CovarianceStructure::full:
      for (auto& c : p.components) out.clamped |= project_full(c.covariance, b.var_floor, b.var_ceil);
      break;
    case CovarianceStructure::diagonal:
      for (auto& c : p.components) out.clamped |= project_diagonal(c.covariance, b.var_floor, b.var_ceil);
      break;
    case CovarianceStructure::spherical:
      for (auto& c : p.components) out.clamped |= project_spherical(c.covariance, b.var_floor, b.var_ceil);
      break;
    case CovarianceStructure::diagonal_equal_volume:
      out.clamped |= project_equal_volume(p.components, b.var_floor, b.var_ceil);
      break;
  }
  return out;
}

}  // namespace detail

MixtureParams project_to_bounds(const MixtureParams& params, const ModelFamily& family) {
  return detail::project(params, family).params;
}

}  // namespace lccmix
