#pragma once

// Episode CSV and JSON (de)serialisation for parameters, reports and configs.

#include "phantomhaz/cohort.hpp"
#include "phantomhaz/features.hpp"
#include "phantomhaz/inference.hpp"
#include "phantomhaz/metrics.hpp"
#include "phantomhaz/model.hpp"

#include <json.hpp>

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace phantomhaz {

/// Malformed input data; `row` is 1-based over data rows (0 = header / whole file).
class DataError : public std::runtime_error {
 public:
  DataError(std::size_t row, const std::string& what)
      : std::runtime_error(row ? "row " + std::to_string(row) + ": " + what : what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

/// Invalid configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal text that reads back to the same double.
std::string format_number(double v);

/// Splits one CSV line on commas. Quoted fields are not supported.
std::vector<std::string> split_csv_line(const std::string& line);

/// Header: id, axis:<name>..., x:<feature>..., interventions, count:<category>..., T, event, exposure.
/// Interventions are "time@code" joined by '|'; code is a category name or an
/// integer HCPCS code mapped through the E/M table.
void write_episodes_csv(std::ostream& out, const ModelStructure& structure, std::span<const EpisodeRecord> episodes);
std::vector<EpisodeRecord> read_episodes_csv(std::istream& in, const ModelStructure& structure);

/// Raw numeric table: a header row and numeric columns, keyed by header name.
struct NumericTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};
NumericTable read_table_csv(std::istream& in);

nlohmann::json to_json(const ModelStructure& s);
ModelStructure structure_from_json(const nlohmann::json& j);

/// Parameters with a manifest (axes, intervals, features, categories,
/// training counts) and one entry per stored term slice keyed by level names
/// with "*" on unused axes.
nlohmann::json to_json(const ModelParams& p);
ModelParams params_from_json(const nlohmann::json& j);

nlohmann::json to_json(const FitConfig& c);
FitConfig fit_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const FitState& s);
FitState fit_state_from_json(const nlohmann::json& j);

/// Report with run timing kept under "metadata".
nlohmann::json to_json(const FitReport& r);

nlohmann::json to_json(const QuantizerSpec& q);
QuantizerSpec quantizer_from_json(const nlohmann::json& j);

nlohmann::json to_json(const MetricReport& m);

AdminDensity admin_from_json(const nlohmann::json& j);

/// Preset ("example1" / "recovery") plus overrides from the "simulate" section.
SimConfig sim_config_from_json(const nlohmann::json& j, std::uint64_t seed);

nlohmann::json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace phantomhaz
