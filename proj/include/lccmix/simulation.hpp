#pragma once

#include "lccmix/estimation.hpp"
#include "lccmix/gaussian.hpp"
#include "lccmix/population.hpp"
#include "lccmix/selection.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace lccmix {

// n i.i.d. draws: component index from the weights, then a Gaussian draw.
DataMatrix sample_mixture(const MixtureParams& params, long n, Rng& rng);

// Monte-Carlo selection study. Bounds are derived from each simulated sample.
struct Scenario {
  MixtureParams truth;
  CovarianceStructure covariance = CovarianceStructure::diagonal;
  Proportions proportions = Proportions::free;
  int k_min = 1;
  int k_max = 3;
  std::vector<long> n_values;
  int n_replicates = 10;
  std::vector<std::string> criteria = kCriterionNames;
  std::uint64_t seed = 0;
  FitConfig fit;       // fit.seed is ignored; replicate seeds are derived from `seed`
  int n_threads = 1;   // replicates run in parallel
};

struct ReplicateOutcome {
  bool failed = false;
  std::string failure;
  std::map<std::string, int> selected;  // criterion -> K hat
};

struct FrequencyTable {
  std::vector<std::string> criteria;
  std::vector<long> n_values;
  int k_min = 1, k_max = 1;
  // outcomes[n index][replicate]
  std::vector<std::vector<ReplicateOutcome>> outcomes;

  int replicates(long n) const;  // successful replicates at n
  int failures(long n) const;
  double frequency(const std::string& criterion, long n, int K) const;
  // Fraction of successful replicates where the two criteria pick the same K.
  double agreement(const std::string& a, const std::string& b, long n) const;
  double failure_rate() const;

  std::string to_csv() const;       // criterion,n,K,frequency,replicates
  std::string to_markdown() const;
};

// Replicate r at sample-size index j uses seed derive_seed(seed, j, r), so
// adding replicates leaves earlier ones unchanged.
FrequencyTable run_scenario(const Scenario& s);

// Throws NumericError when more than 5% of replicates failed.
void require_healthy(const FrequencyTable& table);

}  // namespace lccmix
