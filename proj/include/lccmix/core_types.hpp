#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lccmix {

// Observations are stored one per row so a single observation is contiguous.
using DataMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class CovarianceStructure {
  spherical,
  diagonal,
  diagonal_equal_volume,  // diagonal, all components share det(Sigma_k)
  full,
};

enum class Proportions { free, equal };

std::string to_string(CovarianceStructure s);
std::string to_string(Proportions p);
CovarianceStructure parse_covariance_structure(const std::string& name);
Proportions parse_proportions(const std::string& name);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Compactness bounds of the parameter space.
struct Bounds {
  double prop_floor = 1e-3;
  double var_floor = 1e-4;
  double var_ceil = 1e4;
  std::vector<Interval> mean_box;  // one interval per coordinate
};

struct ModelFamily {
  CovarianceStructure covariance = CovarianceStructure::full;
  Proportions proportions = Proportions::free;
  Bounds bounds;

  // Throws ConfigError when the bounds are inconsistent for K components in
  // dimension d.
  void validate(int K, int d) const;
};

struct GaussianComponent {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

struct MixtureParams {
  Eigen::VectorXd weights;
  std::vector<GaussianComponent> components;

  int num_components() const { return static_cast<int>(components.size()); }
  int dim() const { return components.empty() ? 0 : static_cast<int>(components.front().mean.size()); }

  // Throws InputError if the weights are not a probability vector, if a
  // covariance is not symmetric positive definite, or if dimensions disagree.
  void validate() const;
};

int count_free_parameters(const ModelFamily& family, int K, int d);

struct ModelSpec {
  ModelFamily family;
  int K = 1;
  int d = 1;

  int dimension() const { return count_free_parameters(family, K, d); }
};

ModelSpec make_model_spec(ModelFamily family, int K, int d);

// Hard assignment of n observations to K classes: an n x K 0/1 matrix with
// exactly one 1 per row, stored as the column index of that 1.
class LabelMatrix {
 public:
  LabelMatrix(std::vector<int> labels, int K);
  static LabelMatrix from_indicator(const Eigen::MatrixXd& z);

  int rows() const { return static_cast<int>(labels_.size()); }
  int cols() const { return K_; }
  int label(int i) const { return labels_[static_cast<std::size_t>(i)]; }
  double operator()(int i, int k) const { return label(i) == k ? 1.0 : 0.0; }
  const std::vector<int>& labels() const { return labels_; }

 private:
  std::vector<int> labels_;
  int K_;
};

// Data-scaled default bounds: var_floor = 1e-4 * min coordinate variance,
// var_ceil = 1e4 * max coordinate variance, mean box = data range inflated by
// three standard deviations per coordinate, prop_floor = 1e-3.
// Throws DegenerateDataError when some coordinate has zero spread.
Bounds default_bounds(const DataMatrix& data);

ModelFamily make_family(CovarianceStructure covariance, Proportions proportions, const DataMatrix& data);

// Projection onto the bounded parameter space of `family`. Identity on
// feasible parameters and idempotent.
MixtureParams project_to_bounds(const MixtureParams& params, const ModelFamily& family);

namespace detail {

struct Projection {
  MixtureParams params;
  bool clamped = false;  // true when some bound (not only structure) was active
};

Projection project(const MixtureParams& params, const ModelFamily& family);

// Floored renormalization: w_k' = max(floor, c * w_k) with c chosen so the
// result sums to one.
Eigen::VectorXd floor_weights(const Eigen::VectorXd& weights, double floor);

}  // namespace detail

}  // namespace lccmix
