#include "lccmix/simulation.hpp"

#include "lccmix/errors.hpp"
#include "lccmix/parallel.hpp"

#include <cstdio>
#include <sstream>

namespace lccmix {

DataMatrix sample_mixture(const MixtureParams& params, long n, Rng& rng) {
  if (n < 1) throw ConfigError("sample size must be >= 1");
  params.validate();
  const int K = params.num_components();
  std::vector<CholeskyFactor> factors;
  for (const auto& c : params.components) factors.push_back(CholeskyFactor::of(c.covariance));
  std::discrete_distribution<int> pick(params.weights.data(), params.weights.data() + K);

  DataMatrix out(n, params.dim());
  for (long i = 0; i < n; ++i) {
    const int k = K == 1 ? 0 : pick(rng);
    out.row(i) = sample_gaussian(params.components[static_cast<std::size_t>(k)].mean,
                                 factors[static_cast<std::size_t>(k)], rng)
                     .transpose();
  }
  return out;
}

int FrequencyTable::replicates(long n) const {
  for (std::size_t j = 0; j < n_values.size(); ++j) {
    if (n_values[j] != n) continue;
    int ok = 0;
    for (const auto& o : outcomes[j]) ok += o.failed ? 0 : 1;
    return ok;
  }
  throw ConfigError("sample size " + std::to_string(n) + " not in the table");
}

int FrequencyTable::failures(long n) const {
  for (std::size_t j = 0; j < n_values.size(); ++j)
    if (n_values[j] == n) return static_cast<int>(outcomes[j].size()) - replicates(n);
  throw ConfigError("sample size " + std::to_string(n) + " not in the table");
}

double FrequencyTable::frequency(const std::string& criterion, long n, int K) const {
  for (std::size_t j = 0; j < n_values.size(); ++j) {
    if (n_values[j] != n) continue;
    int hits = 0, total = 0;
    for (const auto& o : outcomes[j]) {
      if (o.failed) continue;
      ++total;
      const auto it = o.selected.find(criterion);
      if (it == o.selected.end()) throw ConfigError("criterion '" + criterion + "' not tabulated");
      hits += it->second == K ? 1 : 0;
    }
    return total == 0 ? 0.0 : static_cast<double>(hits) / total;
  }
  throw ConfigError("sample size " + std::to_string(n) + " not in the table");
}

double FrequencyTable::agreement(const std::string& a, const std::string& b, long n) const {
  for (std::size_t j = 0; j < n_values.size(); ++j) {
    if (n_values[j] != n) continue;
    int same = 0, total = 0;
    for (const auto& o : outcomes[j]) {
      if (o.failed) continue;
      ++total;
      same += o.selected.at(a) == o.selected.at(b) ? 1 : 0;
    }
    return total == 0 ? 0.0 : static_cast<double>(same) / total;
  }
  throw ConfigError("sample size " + std::to_string(n) + " not in the table");
}

double FrequencyTable::failure_rate() const {
  int failed = 0, total = 0;
  for (const auto& per_n : outcomes)
    for (const auto& o : per_n) {
      ++total;
      failed += o.failed ? 1 : 0;
    }
  return total == 0 ? 0.0 : static_cast<double>(failed) / total;
}

std::string FrequencyTable::to_csv() const {
  std::ostringstream out;
  out << "criterion,n,K,frequency,replicates\n";
  char buf[64];
  for (const auto& c : criteria)
    for (long n : n_values)
      for (int K = k_min; K <= k_max; ++K) {
        std::snprintf(buf, sizeof buf, "%.17g", frequency(c, n, K));
        out << c << ',' << n << ',' << K << ',' << buf << ',' << replicates(n) << '\n';
      }
  return out.str();
}

std::string FrequencyTable::to_markdown() const {
  std::ostringstream out;
  out << "# Selection frequencies\n\n";
  out << "Finite-n selection frequencies; a surrogate for asymptotic consistency, not a proof of it.\n\n";
  for (long n : n_values) {
    out << "## n = " << n << " (" << replicates(n) << " replicates, " << failures(n) << " failed)\n\n";
    out << "| criterion |";
    for (int K = k_min; K <= k_max; ++K) out << " K=" << K << " |";
    out << "\n|---|";
    for (int K = k_min; K <= k_max; ++K) out << "---|";
    out << '\n';
    char buf[32];
    for (const auto& c : criteria) {
      out << "| " << c << " |";
      for (int K = k_min; K <= k_max; ++K) {
        std::snprintf(buf, sizeof buf, " %.3f |", frequency(c, n, K));
        out << buf;
      }
      out << '\n';
    }
    bool has_icl = false, has_lcc = false;
    for (const auto& c : criteria) {
      has_icl |= c == "icl-tau";
      has_lcc |= c == "lcc-icl";
    }
    if (has_icl && has_lcc) {
      std::snprintf(buf, sizeof buf, "%.3f", agreement("icl-tau", "lcc-icl", n));
      out << "\nicl-tau / lcc-icl agreement: " << buf << '\n';
    }
    out << '\n';
  }
  return out.str();
}

FrequencyTable run_scenario(const Scenario& s) {
  if (s.n_replicates < 1) throw ConfigError("scenario needs at least one replicate");
  if (s.k_min < 1 || s.k_max < s.k_min) throw ConfigError("scenario K range is empty");
  if (s.n_values.empty()) throw ConfigError("scenario needs at least one sample size");
  for (const auto& c : s.criteria) CriterionRow{}.value(c);
  s.truth.validate();

  FrequencyTable table;
  table.criteria = s.criteria;
  table.n_values = s.n_values;
  table.k_min = s.k_min;
  table.k_max = s.k_max;
  table.outcomes.assign(s.n_values.size(), std::vector<ReplicateOutcome>(static_cast<std::size_t>(s.n_replicates)));

  const std::size_t jobs = s.n_values.size() * static_cast<std::size_t>(s.n_replicates);
  parallel_for(jobs, s.n_threads, [&](std::size_t job) {
    const std::size_t j = job / static_cast<std::size_t>(s.n_replicates);
    const std::size_t r = job % static_cast<std::size_t>(s.n_replicates);
    ReplicateOutcome& outcome = table.outcomes[j][r];
    const std::uint64_t seed = derive_seed(s.seed, j, r);
    try {
      Rng rng(derive_seed(seed, 0));
      const DataMatrix data = sample_mixture(s.truth, s.n_values[j], rng);
      FitConfig fit = s.fit;
      fit.seed = derive_seed(seed, 1);
      fit.n_threads = 1;
      const SelectionRun run = fit_and_select(data, s.covariance, s.proportions, s.k_min, s.k_max, fit);
      for (std::size_t i = 0; i < run.mle.size(); ++i) {
        if (!run.mle[i].converged || !run.mlcce[i].converged) {
          outcome.failed = true;
          outcome.failure = "optimizer did not converge at K = " + std::to_string(run.mle[i].spec.K);
          return;
        }
      }
      for (const auto& c : s.criteria) outcome.selected[c] = select_k(run.table, c);
    } catch (const Error& e) {
      outcome.failed = true;
      outcome.failure = e.what();
    }
  });
  return table;
}

void require_healthy(const FrequencyTable& table) {
  if (table.failure_rate() > 0.05)
    throw NumericError("more than 5% of replicates failed (" + std::to_string(table.failure_rate()) + ")");
}

}  // namespace lccmix
