#pragma once

#include "lccmix/core_types.hpp"
#include "lccmix/errors.hpp"
#include "lccmix/estimation.hpp"
#include "lccmix/selection.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lccmix {

enum class CsvErrorCode { io, empty_file, ragged, non_numeric, non_finite, missing_column };

std::string to_string(CsvErrorCode code);

class CsvError : public InputError {
 public:
  CsvError(CsvErrorCode code, const std::string& message) : InputError(message), code_(code) {}
  CsvErrorCode code() const { return code_; }

 private:
  CsvErrorCode code_;
};

struct Dataset {
  DataMatrix values;
  std::vector<std::string> column_names;
  std::string source_path;
};

struct CsvOptions {
  char delimiter = ',';
  bool has_header = true;
  std::vector<std::string> columns;  // empty: all columns; names need a header, else 0-based indices
};

Dataset read_csv(const std::string& path, const CsvOptions& options = {});
Dataset parse_csv(const std::string& text, const CsvOptions& options = {}, const std::string& source = "<string>");

// Shortest decimal form that reads back to the same double.
std::string format_double(double v);

void write_csv(const std::string& path, const DataMatrix& values, const std::vector<std::string>& column_names,
               char delimiter = ',');

inline constexpr int kArtifactSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

struct ModelArtifact {
  int schema_version = kArtifactSchemaVersion;
  std::string tool_version = kToolVersion;
  ModelSpec spec;
  MixtureParams params;
  ContrastValues contrast;
  Estimator estimator = Estimator::mle;
  std::optional<CriterionRow> criteria;
  std::uint64_t seed = 0;
  std::string timestamp;  // ISO-8601 UTC
};

ModelArtifact make_artifact(const FitResult& fit, const CriterionRow* row, std::uint64_t seed);

std::string serialize(const ModelArtifact& artifact);
ModelArtifact deserialize(const std::string& text);  // throws InputError on malformed documents

void save_artifact(const std::string& path, const ModelArtifact& artifact);
ModelArtifact load_artifact(const std::string& path);

std::string utc_timestamp();

}  // namespace lccmix
