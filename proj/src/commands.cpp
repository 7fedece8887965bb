#include "lccmix/commands.hpp"

#include "lccmix/contrast.hpp"
#include "lccmix/errors.hpp"
#include "lccmix/io.hpp"
#include "lccmix/population.hpp"
#include "lccmix/selection.hpp"
#include "lccmix/simulation.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

namespace lccmix {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double parse_real(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("cannot parse " + what + " '" + s + "'");
  }
}

int env_int(const char* name, int fallback) {
  const char* raw = std::getenv(name);
  if (!raw || !*raw) return fallback;
  try {
    std::size_t used = 0;
    const int v = std::stoi(raw, &used);
    if (used != std::string(raw).size() || v < 1) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(std::string(name) + " must be a positive integer, got '" + raw + "'");
  }
}

std::string env_string(const char* name, const std::string& fallback) {
  const char* raw = std::getenv(name);
  return raw && *raw ? std::string(raw) : fallback;
}

struct DataFlags {
  std::string path;
  std::string delimiter = ",";
  bool no_header = false;
  std::vector<std::string> columns;

  void add(CLI::App* cmd) {
    cmd->add_option("--data", path, "input CSV file")->required();
    cmd->add_option("--delimiter", delimiter, "field delimiter")->capture_default_str();
    cmd->add_flag("--no-header", no_header, "the first line holds data, not column names");
    cmd->add_option("--columns", columns, "columns to use, by name or 0-based index")->delimiter(',');
  }

  Dataset load() const {
    if (delimiter.size() != 1) throw ConfigError("--delimiter must be a single character");
    return read_csv(path, CsvOptions{delimiter[0], !no_header, columns});
  }
};

std::vector<std::string> criteria_from(const std::string& flag) {
  if (flag == "all") return kCriterionNames;
  std::vector<std::string> out;
  for (const auto& name : split(flag, ',')) {
    CriterionRow{}.value(name);
    out.push_back(name);
  }
  if (out.empty()) throw ConfigError("--criterion is empty");
  return out;
}

// Writes every file or none: on failure the files already written are removed.
void write_all(const fs::path& dir, const std::vector<std::pair<std::string, std::string>>& files) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory '" + dir.string() + "': " + ec.message());
  std::vector<fs::path> written;
  try {
    for (const auto& [name, content] : files) {
      const fs::path p = dir / name;
      std::ofstream out(p, std::ios::binary);
      if (!out) throw InputError("cannot write '" + p.string() + "'");
      written.push_back(p);
      out << content;
      out.close();
      if (!out) throw InputError("write to '" + p.string() + "' failed");
    }
  } catch (...) {
    for (const auto& p : written) fs::remove(p, ec);
    throw;
  }
}

std::string criteria_csv(const CriterionTable& t) {
  std::ostringstream out;
  out << "K,dimension,log_lik_mle,entropy_mle,lcc_mlcce,aic,bic,icl_map,icl_tau,lcc_icl\n";
  for (const auto& r : t.rows)
    out << r.K << ',' << r.dimension << ',' << format_double(r.log_lik_mle) << ',' << format_double(r.entropy_mle)
        << ',' << format_double(r.lcc_mlcce) << ',' << format_double(r.aic) << ',' << format_double(r.bic) << ','
        << format_double(r.icl_map) << ',' << format_double(r.icl_tau) << ',' << format_double(r.lcc_icl) << '\n';
  return out.str();
}

std::string criteria_markdown(const CriterionTable& t, const std::vector<std::string>& criteria) {
  std::ostringstream out;
  char buf[64];
  out << "# Model selection (n = " << t.n << ")\n\n";
  out << "| K | D_K | log L (MLE) | Ent (MLE) | Lcc (MLccE) | aic | bic | icl-map | icl-tau | lcc-icl |\n";
  out << "|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : t.rows) {
    out << "| " << r.K << " | " << r.dimension;
    for (double v : {r.log_lik_mle, r.entropy_mle, r.lcc_mlcce, r.aic, r.bic, r.icl_map, r.icl_tau, r.lcc_icl}) {
      std::snprintf(buf, sizeof buf, " | %.4f", v);
      out << buf;
    }
    out << " |\n";
  }
  out << "\nAll criteria are larger-is-better.\n\n";
  for (const auto& c : criteria) out << "- " << c << ": K = " << t.selected.at(c) << '\n';
  return out.str();
}

// ---------------------------------------------------------------- fit

struct FitFlags {
  DataFlags data;
  int k_min = 1, k_max = 3;
  std::string model = "full";
  std::string proportions = "free";
  std::string criterion = "all";
  int restarts = 10;
  std::uint64_t seed = 0;
  int max_iter = 500;
  double tol = 1e-8;
  std::optional<double> var_floor;
  double prop_floor = 1e-3;
  std::string output_dir;
  int threads = 0;
};

int cmd_fit(const FitFlags& f, std::ostream& out) {
  const std::vector<std::string> criteria = criteria_from(f.criterion);
  const Dataset ds = f.data.load();
  ModelFamily family = make_family(parse_covariance_structure(f.model), parse_proportions(f.proportions), ds.values);
  family.bounds.prop_floor = f.prop_floor;
  if (f.var_floor) family.bounds.var_floor = *f.var_floor;

  FitConfig config;
  config.n_restarts = f.restarts;
  config.max_em_iters = f.max_iter;
  config.max_grad_iters = f.max_iter;
  config.em_tol = f.tol;
  config.seed = f.seed;
  config.n_threads = f.threads > 0 ? f.threads : env_int("LCCMIX_THREADS", 1);
  config.validate();
  for (int K = f.k_min; K <= f.k_max && K >= 1; ++K) family.validate(K, static_cast<int>(ds.values.cols()));

  const SelectionRun run = fit_and_select(ds.values, family, f.k_min, f.k_max, config);

  std::vector<std::pair<std::string, std::string>> files;
  const std::string stamp = utc_timestamp();
  for (std::size_t i = 0; i < run.mle.size(); ++i) {
    const CriterionRow& row = run.table.rows[i];
    for (const FitResult* fit : {&run.mle[i], &run.mlcce[i]}) {
      ModelArtifact a = make_artifact(*fit, &row, f.seed);
      a.timestamp = stamp;
      files.emplace_back("model_K" + std::to_string(row.K) + "_" + to_string(fit->estimator) + ".json", serialize(a));
    }
  }
  files.emplace_back("criteria.csv", criteria_csv(run.table));
  files.emplace_back("criteria.md", criteria_markdown(run.table, criteria));
  write_all(f.output_dir.empty() ? env_string("LCCMIX_OUTPUT_DIR", ".") : f.output_dir, files);

  for (const auto& c : criteria) out << "selected K (" << c << "): " << run.table.selected.at(c) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- classify

struct ClassifyFlags {
  DataFlags data;
  std::string artifact;
  std::string output;
};

int cmd_classify(const ClassifyFlags& f, std::ostream& out) {
  const ModelArtifact a = load_artifact(f.artifact);
  const Dataset ds = f.data.load();
  if (ds.values.cols() != a.params.dim())
    throw DimensionMismatch("model has dimension " + std::to_string(a.params.dim()) + " but the data has " +
                            std::to_string(ds.values.cols()) + " columns");
  const ResponsibilityMatrix r = responsibilities(a.params, ds.values);
  const std::vector<int> labels = map_labels(r);
  const int K = a.params.num_components();

  std::ostringstream text;
  text << "row,label";
  for (int k = 1; k <= K; ++k) text << ",tau_" << k;
  text << ",h_K\n";
  for (Eigen::Index i = 0; i < ds.values.rows(); ++i) {
    text << i << ',' << labels[static_cast<std::size_t>(i)];
    for (int k = 0; k < K; ++k) text << ',' << format_double(r.tau(i, k));
    text << ',' << format_double(row_entropy(r, i)) << '\n';
  }
  if (f.output.empty()) {
    out << text.str();
  } else {
    const fs::path p(f.output);
    write_all(p.has_parent_path() ? p.parent_path() : fs::path("."), {{p.filename().string(), text.str()}});
  }
  return kExitOk;
}

// ---------------------------------------------------------------- population

struct PopulationFlags {
  std::string truth = "1,0,1";
  std::vector<int> k_range = {1, 2};
  bool no_refine = false;
  int threads = 0;
};

DensitySpec density_from(const std::string& text) {
  const MixtureParams p = parse_mixture(text);
  if (p.dim() != 1) throw InputError("the population loss is only available for one-dimensional truths");
  DensitySpec f0;
  f0.params = p;
  return f0;
}

int cmd_population(const PopulationFlags& f, std::ostream& out) {
  if (f.k_range.size() != 2) throw ConfigError("--k-range takes two integers");
  const DensitySpec f0 = density_from(f.truth);
  PopulationOptions options;
  options.refine = !f.no_refine;
  options.n_threads = f.threads > 0 ? f.threads : env_int("LCCMIX_THREADS", 1);
  const PopulationK0 k0 = population_k0(f0, population_specs(f.k_range[0], f.k_range[1]), default_grid(f0), options);

  char buf[160];
  for (const auto& [K, fit] : k0.per_k) {
    if (fit.model == PopulationModel::symmetric_pair)
      std::snprintf(buf, sizeof buf, "K=%d  model=0.5 N(-mu,s2)+0.5 N(mu,s2)  mu=%.6f  s2=%.6f  E[-Lcc]=%.8f\n", K,
                    fit.mu, fit.variance, fit.value);
    else
      std::snprintf(buf, sizeof buf, "K=%d  model=N(mu,s2)  mu=%.6f  s2=%.6f  E[-Lcc]=%.8f\n", K, fit.mu,
                    fit.variance, fit.value);
    out << buf;
  }
  out << "K0 = " << k0.k0 << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateFlags {
  std::string truth;
  std::string model = "diag";
  std::string proportions = "free";
  int k_min = 1, k_max = 3;
  std::vector<long> n_values = {200, 2000};
  int replicates = 50;
  std::string criterion = "all";
  std::uint64_t seed = 0;
  int restarts = 10;
  int max_iter = 500;
  double tol = 1e-8;
  std::string output_dir;
  int threads = 0;
};

int cmd_simulate(const SimulateFlags& f, std::ostream& out) {
  Scenario s;
  s.truth = parse_mixture(f.truth);
  s.covariance = parse_covariance_structure(f.model);
  s.proportions = parse_proportions(f.proportions);
  s.k_min = f.k_min;
  s.k_max = f.k_max;
  s.n_values = f.n_values;
  s.n_replicates = f.replicates;
  s.criteria = criteria_from(f.criterion);
  s.seed = f.seed;
  s.fit.n_restarts = f.restarts;
  s.fit.max_em_iters = f.max_iter;
  s.fit.max_grad_iters = f.max_iter;
  s.fit.em_tol = f.tol;
  s.fit.validate();
  s.n_threads = f.threads > 0 ? f.threads : env_int("LCCMIX_THREADS", 1);

  const FrequencyTable table = run_scenario(s);
  write_all(f.output_dir.empty() ? env_string("LCCMIX_OUTPUT_DIR", ".") : f.output_dir,
            {{"frequencies.csv", table.to_csv()}, {"frequencies.md", table.to_markdown()}});
  out << table.to_markdown();
  require_healthy(table);
  return kExitOk;
}

// ---------------------------------------------------------------- sample

struct SampleFlags {
  std::string mixture;
  long n = 400;
  std::uint64_t seed = 0;
  std::string output;
};

int cmd_sample(const SampleFlags& f, std::ostream& out) {
  const MixtureParams p = parse_mixture(f.mixture);
  Rng rng(f.seed);
  const DataMatrix x = sample_mixture(p, f.n, rng);
  std::vector<std::string> names;
  for (int j = 0; j < p.dim(); ++j) names.push_back("x" + std::to_string(j + 1));
  if (f.output.empty()) {
    out << "x1";
    for (int j = 1; j < p.dim(); ++j) out << ",x" << j + 1;
    out << '\n';
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) out << (j ? "," : "") << format_double(x(i, j));
      out << '\n';
    }
  } else {
    write_csv(f.output, x, names);
  }
  return kExitOk;
}

}  // namespace

MixtureParams parse_mixture(const std::string& text) {
  MixtureParams p;
  std::vector<double> weights;
  for (const auto& part : split(text, ';')) {
    const auto fields = split(part, ',');
    if (fields.size() != 3) throw ConfigError("mixture component '" + part + "' must be 'w,mean,variance'");
    weights.push_back(parse_real(fields[0], "weight"));
    const auto means = split(fields[1], ':');
    const auto vars = split(fields[2], ':');
    if (means.size() != vars.size()) throw ConfigError("mixture component '" + part + "' has mismatched mean and variance lengths");
    GaussianComponent c;
    c.mean.resize(static_cast<Eigen::Index>(means.size()));
    c.covariance = Eigen::MatrixXd::Zero(c.mean.size(), c.mean.size());
    for (std::size_t j = 0; j < means.size(); ++j) {
      c.mean(static_cast<Eigen::Index>(j)) = parse_real(means[j], "mean");
      c.covariance(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = parse_real(vars[j], "variance");
    }
    p.components.push_back(std::move(c));
  }
  if (p.components.empty()) throw ConfigError("empty mixture string");
  p.weights = Eigen::Map<const Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
  try {
    p.validate();
  } catch (const InputError& e) {
    throw ConfigError(std::string("invalid mixture: ") + e.what());
  }
  return p;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gaussian mixture clustering with conditional classification likelihood criteria", "lccmix"};
  app.require_subcommand(1);

  FitFlags fit;
  CLI::App* fit_cmd = app.add_subcommand("fit", "fit MLE and MLccE for a range of K and select K");
  fit.data.add(fit_cmd);
  fit_cmd->add_option("--k-min", fit.k_min)->capture_default_str();
  fit_cmd->add_option("--k-max", fit.k_max)->capture_default_str();
  fit_cmd->add_option("--model", fit.model)->check(CLI::IsMember({"spherical", "diag", "diag-eqvol", "full"}))->capture_default_str();
  fit_cmd->add_option("--proportions", fit.proportions)->check(CLI::IsMember({"free", "equal"}))->capture_default_str();
  fit_cmd->add_option("--criterion", fit.criterion, "criterion name, comma list, or 'all'")->capture_default_str();
  fit_cmd->add_option("--restarts", fit.restarts)->capture_default_str();
  fit_cmd->add_option("--seed", fit.seed)->capture_default_str();
  fit_cmd->add_option("--max-iter", fit.max_iter)->capture_default_str();
  fit_cmd->add_option("--tol", fit.tol)->capture_default_str();
  fit_cmd->add_option("--var-floor", fit.var_floor, "absolute lower bound on variances");
  fit_cmd->add_option("--prop-floor", fit.prop_floor)->capture_default_str();
  fit_cmd->add_option("--output-dir", fit.output_dir, "defaults to $LCCMIX_OUTPUT_DIR or .");
  fit_cmd->add_option("--threads", fit.threads, "defaults to $LCCMIX_THREADS or 1");

  ClassifyFlags classify;
  CLI::App* classify_cmd = app.add_subcommand("classify", "MAP labels, responsibilities and entropy per row");
  classify.data.add(classify_cmd);
  classify_cmd->add_option("--model", classify.artifact, "model artifact (JSON)")->required();
  classify_cmd->add_option("--output", classify.output, "output CSV (default: stdout)");

  PopulationFlags population;
  CLI::App* population_cmd = app.add_subcommand("population", "minimize the expected -Lcc under a known 1-d truth");
  population_cmd->add_option("--truth-mixture", population.truth, "w,m,v;...")->capture_default_str();
  population_cmd->add_option("--k-range", population.k_range)->expected(2)->capture_default_str();
  population_cmd->add_flag("--no-refine", population.no_refine, "grid scan only");
  population_cmd->add_option("--threads", population.threads);

  SimulateFlags simulate;
  CLI::App* simulate_cmd = app.add_subcommand("simulate", "selection frequencies over simulated replicates");
  simulate_cmd->add_option("--truth-mixture", simulate.truth, "w,m1:m2,v1:v2;...")->required();
  simulate_cmd->add_option("--model", simulate.model)->check(CLI::IsMember({"spherical", "diag", "diag-eqvol", "full"}))->capture_default_str();
  simulate_cmd->add_option("--proportions", simulate.proportions)->check(CLI::IsMember({"free", "equal"}))->capture_default_str();
  simulate_cmd->add_option("--k-min", simulate.k_min)->capture_default_str();
  simulate_cmd->add_option("--k-max", simulate.k_max)->capture_default_str();
  simulate_cmd->add_option("--n", simulate.n_values)->delimiter(',')->capture_default_str();
  simulate_cmd->add_option("--replicates", simulate.replicates)->capture_default_str();
  simulate_cmd->add_option("--criterion", simulate.criterion)->capture_default_str();
  simulate_cmd->add_option("--seed", simulate.seed)->capture_default_str();
  simulate_cmd->add_option("--restarts", simulate.restarts)->capture_default_str();
  simulate_cmd->add_option("--max-iter", simulate.max_iter)->capture_default_str();
  simulate_cmd->add_option("--tol", simulate.tol)->capture_default_str();
  simulate_cmd->add_option("--output-dir", simulate.output_dir);
  simulate_cmd->add_option("--threads", simulate.threads);

  SampleFlags sample;
  CLI::App* sample_cmd = app.add_subcommand("sample", "draw a CSV sample from a Gaussian mixture");
  sample_cmd->add_option("--mixture", sample.mixture, "w,m1:m2,v1:v2;...")->required();
  sample_cmd->add_option("--n", sample.n)->capture_default_str();
  sample_cmd->add_option("--seed", sample.seed)->capture_default_str();
  sample_cmd->add_option("--output", sample.output, "output CSV (default: stdout)");

  std::vector<std::string> argv_storage{"lccmix"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(fit, out);
    if (classify_cmd->parsed()) return cmd_classify(classify, out);
    if (population_cmd->parsed()) return cmd_population(population, out);
    if (simulate_cmd->parsed()) return cmd_simulate(simulate, out);
    if (sample_cmd->parsed()) return cmd_sample(sample, out);
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    err << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  }
  return kExitConfig;
}

}  // namespace lccmix
