#include "lccmix/io.hpp"

#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>

namespace lccmix {

using nlohmann::json;

std::string to_string(CsvErrorCode code) {
  switch (code) {
    case CsvErrorCode::io: return "io";
    case CsvErrorCode::empty_file: return "empty_file";
    case CsvErrorCode::ragged: return "ragged";
    case CsvErrorCode::non_numeric: return "non_numeric";
    case CsvErrorCode::non_finite: return "non_finite";
    case CsvErrorCode::missing_column: return "missing_column";
  }
  return "unknown";
}

namespace {

struct Record {
  std::vector<std::string> fields;
  long line = 0;  // 1-based line where the record starts
};

// RFC-4180 records: quoted fields may hold delimiters, doubled quotes and
// line breaks. Blank lines are skipped.
std::vector<Record> split_records(const std::string& text, char delim) {
  std::vector<Record> records;
  Record current;
  std::string field;
  bool in_quotes = false, field_started = false, row_has_content = false;
  long line = 1;
  current.line = 1;

  auto end_field = [&] {
    current.fields.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    if (row_has_content || !current.fields.empty()) {
      end_field();
      records.push_back(std::move(current));
    }
    current = Record{};
    field.clear();
    field_started = row_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = field_started = row_has_content = true;
    } else if (c == delim) {
      row_has_content = true;
      end_field();
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      continue;
    } else if (c == '\n') {
      end_record();
      ++line;
      current.line = line;
    } else {
      field.push_back(c);
      field_started = true;
      if (c != ' ' && c != '\t') row_has_content = true;
    }
  }
  if (in_quotes) throw CsvError(CsvErrorCode::ragged, "unterminated quoted field starting near line " + std::to_string(current.line));
  end_record();
  return records;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& raw, double& out) {
  std::string s = trim(raw);
  if (!s.empty() && s.front() == '+') s.erase(0, 1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

Dataset parse_csv(const std::string& text, const CsvOptions& options, const std::string& source) {
  std::vector<Record> records = split_records(text, options.delimiter);
  if (records.empty()) throw CsvError(CsvErrorCode::empty_file, source + ": file is empty");

  const std::size_t width = records.front().fields.size();
  for (const auto& r : records)
    if (r.fields.size() != width)
      throw CsvError(CsvErrorCode::ragged, source + ": line " + std::to_string(r.line) + " has " +
                                               std::to_string(r.fields.size()) + " fields, expected " +
                                               std::to_string(width));

  std::vector<std::string> names;
  std::size_t first_data = 0;
  if (options.has_header) {
    for (const auto& f : records.front().fields) names.push_back(trim(f));
    first_data = 1;
  } else {
    for (std::size_t j = 0; j < width; ++j) names.push_back("x" + std::to_string(j + 1));
  }
  if (records.size() <= first_data) throw CsvError(CsvErrorCode::empty_file, source + ": no data rows");

  std::vector<std::size_t> selected;
  if (options.columns.empty()) {
    for (std::size_t j = 0; j < width; ++j) selected.push_back(j);
  } else {
    for (const auto& want : options.columns) {
      std::size_t found = width;
      for (std::size_t j = 0; j < width && options.has_header; ++j)
        if (names[j] == want) found = j;
      if (found == width) {
        double idx = 0;
        if (parse_number(want, idx) && idx >= 0 && idx < static_cast<double>(width) && idx == std::floor(idx))
          found = static_cast<std::size_t>(idx);
      }
      if (found == width) throw CsvError(CsvErrorCode::missing_column, source + ": no column '" + want + "'");
      selected.push_back(found);
    }
  }

  Dataset ds;
  ds.source_path = source;
  for (std::size_t j : selected) ds.column_names.push_back(names[j]);
  const auto n = static_cast<Eigen::Index>(records.size() - first_data);
  ds.values.resize(n, static_cast<Eigen::Index>(selected.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Record& r = records[first_data + static_cast<std::size_t>(i)];
    for (std::size_t c = 0; c < selected.size(); ++c) {
      double v = 0.0;
      const std::string& cell = r.fields[selected[c]];
      if (!parse_number(cell, v))
        throw CsvError(CsvErrorCode::non_numeric, source + ": non-numeric value '" + trim(cell) + "' at row " +
                                                      std::to_string(i + 1) + ", column " + ds.column_names[c] +
                                                      " (line " + std::to_string(r.line) + ")");
      if (!std::isfinite(v))
        throw CsvError(CsvErrorCode::non_finite, source + ": non-finite value at row " + std::to_string(i + 1) +
                                                     ", column " + ds.column_names[c] + " (line " +
                                                     std::to_string(r.line) + ")");
      ds.values(i, static_cast<Eigen::Index>(c)) = v;
    }
  }
  return ds;
}

Dataset read_csv(const std::string& path, const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError(CsvErrorCode::io, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), options, path);
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_csv(const std::string& path, const DataMatrix& values, const std::vector<std::string>& column_names,
               char delimiter) {
  if (!column_names.empty() && static_cast<Eigen::Index>(column_names.size()) != values.cols())
    throw DimensionMismatch("column name count does not match the matrix width");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CsvError(CsvErrorCode::io, "cannot write '" + path + "'");
  auto quoted = [&](const std::string& s) {
    if (s.find_first_of(std::string("\"\n\r") + delimiter) == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q.push_back('"');
      q.push_back(c);
    }
    return q + "\"";
  };
  if (!column_names.empty()) {
    for (std::size_t j = 0; j < column_names.size(); ++j) out << (j ? std::string(1, delimiter) : "") << quoted(column_names[j]);
    out << '\n';
  }
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) out << (j ? std::string(1, delimiter) : "") << format_double(values(i, j));
    out << '\n';
  }
  if (!out) throw CsvError(CsvErrorCode::io, "write to '" + path + "' failed");
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ModelArtifact make_artifact(const FitResult& fit, const CriterionRow* row, std::uint64_t seed) {
  ModelArtifact a;
  a.spec = fit.spec;
  a.params = fit.params;
  a.contrast = fit.contrast;
  a.estimator = fit.estimator;
  if (row) a.criteria = *row;
  a.seed = seed;
  a.timestamp = utc_timestamp();
  return a;
}

// nlohmann emits the shortest representation that parses back to the same
// double, so numeric fields round-trip exactly.
namespace {

json vec_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json mat_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(r);
  }
  return rows;
}

Eigen::VectorXd json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd json_mat(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = r ? static_cast<Eigen::Index>(rows.front().size()) : 0;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != c)
      throw InputError("artifact matrix is ragged");
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  }
  return m;
}

json row_json(const CriterionRow& r) {
  return {{"K", r.K},           {"dimension", r.dimension}, {"log_lik_mle", r.log_lik_mle},
          {"entropy_mle", r.entropy_mle}, {"lcc_mlcce", r.lcc_mlcce}, {"aic", r.aic},
          {"bic", r.bic},       {"icl_map", r.icl_map},     {"icl_tau", r.icl_tau},
          {"lcc_icl", r.lcc_icl}};
}

CriterionRow json_row(const json& j) {
  CriterionRow r;
  r.K = j.at("K").get<int>();
  r.dimension = j.at("dimension").get<int>();
  r.log_lik_mle = j.at("log_lik_mle").get<double>();
  r.entropy_mle = j.at("entropy_mle").get<double>();
  r.lcc_mlcce = j.at("lcc_mlcce").get<double>();
  r.aic = j.at("aic").get<double>();
  r.bic = j.at("bic").get<double>();
  r.icl_map = j.at("icl_map").get<double>();
  r.icl_tau = j.at("icl_tau").get<double>();
  r.lcc_icl = j.at("lcc_icl").get<double>();
  return r;
}

}  // namespace

std::string serialize(const ModelArtifact& a) {
  json box = json::array();
  for (const auto& iv : a.spec.family.bounds.mean_box) box.push_back({iv.lo, iv.hi});
  json components = json::array();
  for (const auto& c : a.params.components) components.push_back({{"mean", vec_json(c.mean)}, {"covariance", mat_json(c.covariance)}});

  json doc = {
      {"schema_version", a.schema_version},
      {"tool_version", a.tool_version},
      {"estimator", to_string(a.estimator)},
      {"seed", a.seed},
      {"timestamp", a.timestamp},
      {"spec",
       {{"K", a.spec.K},
        {"d", a.spec.d},
        {"covariance", to_string(a.spec.family.covariance)},
        {"proportions", to_string(a.spec.family.proportions)},
        {"dimension", a.spec.dimension()},
        {"bounds",
         {{"prop_floor", a.spec.family.bounds.prop_floor},
          {"var_floor", a.spec.family.bounds.var_floor},
          {"var_ceil", a.spec.family.bounds.var_ceil},
          {"mean_box", box}}}}},
      {"params", {{"weights", vec_json(a.params.weights)}, {"components", components}}},
      {"contrast", {{"log_lik", a.contrast.log_lik}, {"entropy", a.contrast.entropy}, {"lcc", a.contrast.lcc}}},
      {"criteria", a.criteria ? row_json(*a.criteria) : json(nullptr)},
  };
  return doc.dump(2) + "\n";
}

ModelArtifact deserialize(const std::string& text) {
  try {
    const json doc = json::parse(text);
    ModelArtifact a;
    a.schema_version = doc.at("schema_version").get<int>();
    if (a.schema_version != kArtifactSchemaVersion)
      throw InputError("unsupported artifact schema version " + std::to_string(a.schema_version));
    a.tool_version = doc.at("tool_version").get<std::string>();
    a.estimator = parse_estimator(doc.at("estimator").get<std::string>());
    a.seed = doc.at("seed").get<std::uint64_t>();
    a.timestamp = doc.at("timestamp").get<std::string>();

    const json& s = doc.at("spec");
    ModelFamily fam;
    fam.covariance = parse_covariance_structure(s.at("covariance").get<std::string>());
    fam.proportions = parse_proportions(s.at("proportions").get<std::string>());
    const json& b = s.at("bounds");
    fam.bounds.prop_floor = b.at("prop_floor").get<double>();
    fam.bounds.var_floor = b.at("var_floor").get<double>();
    fam.bounds.var_ceil = b.at("var_ceil").get<double>();
    for (const auto& iv : b.at("mean_box")) fam.bounds.mean_box.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
    a.spec = make_model_spec(fam, s.at("K").get<int>(), s.at("d").get<int>());

    const json& p = doc.at("params");
    a.params.weights = json_vec(p.at("weights"));
    for (const auto& c : p.at("components"))
      a.params.components.push_back({json_vec(c.at("mean")), json_mat(c.at("covariance"))});
    a.params.validate();
    if (a.params.num_components() != a.spec.K || a.params.dim() != a.spec.d)
      throw InputError("artifact parameters do not match its model spec");

    const json& c = doc.at("contrast");
    a.contrast.log_lik = c.at("log_lik").get<double>();
    a.contrast.entropy = c.at("entropy").get<double>();
    a.contrast.lcc = c.at("lcc").get<double>();
    if (!doc.at("criteria").is_null()) a.criteria = json_row(doc.at("criteria"));
    return a;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed model artifact: ") + e.what());
  } catch (const ConfigError& e) {
    throw InputError(std::string("malformed model artifact: ") + e.what());
  }
}

void save_artifact(const std::string& path, const ModelArtifact& artifact) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << serialize(artifact);
  if (!out) throw InputError("write to '" + path + "' failed");
}

ModelArtifact load_artifact(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

}  // namespace lccmix
