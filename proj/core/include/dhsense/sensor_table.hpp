#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dhsense {

enum class SensorKind { mass_flow, pressure, temperature, ambient, demand };

/// Header prefix: mdot, p, t, amb, demand.
std::string kind_prefix(SensorKind kind);
std::optional<SensorKind> kind_from_prefix(const std::string& prefix);
std::string default_unit(SensorKind kind);

struct ColumnInfo {
  SensorKind kind = SensorKind::mass_flow;
  std::string component;  // pipe / junction / consumer id
  std::string unit;

  /// `<kind>_<component>[<unit>]`
  std::string header() const;
  /// `<kind>_<component>`
  std::string key() const;

  bool operator==(const ColumnInfo&) const = default;
};

/// Hour-indexed measurement table, column-major storage.
class SensorTable {
 public:
  SensorTable() = default;
  explicit SensorTable(std::vector<std::int64_t> time) : time_(std::move(time)) {}

  std::size_t rows() const { return time_.size(); }
  std::size_t cols() const { return columns_.size(); }
  const std::vector<std::int64_t>& time() const { return time_; }
  const std::vector<ColumnInfo>& columns() const { return columns_; }

  /// Throws SchemaError on a duplicate key or a length mismatch.
  void add_column(ColumnInfo info, std::vector<double> values);

  const std::vector<double>& column(std::size_t i) const { return data_.at(i); }
  std::vector<double>& column(std::size_t i) { return data_.at(i); }
  std::optional<std::size_t> find(SensorKind kind, const std::string& component) const;
  /// Throws SchemaError if absent.
  std::size_t index_of(SensorKind kind, const std::string& component) const;
  std::vector<std::size_t> columns_of(SensorKind kind) const;

  /// First `n` rows.
  SensorTable head(std::size_t n) const;

  bool operator==(const SensorTable&) const = default;

 private:
  std::vector<std::int64_t> time_;
  std::vector<ColumnInfo> columns_;
  std::vector<std::vector<double>> data_;
};

/// CSV, header `time,<kind>_<id>[unit],...`, LF line endings, shortest
/// round-trip decimal representation of every double.
std::string table_to_string(const SensorTable& table);
SensorTable table_from_string(const std::string& text);
void export_table(const SensorTable& table, const std::filesystem::path& path);
SensorTable import_table(const std::filesystem::path& path);

/// Required sensor columns for `import_table` validation.
struct ColumnRequirement {
  SensorKind kind;
  std::string component;
};
SensorTable import_table(const std::filesystem::path& path, const std::vector<ColumnRequirement>& required);

/// Shortest decimal that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace dhsense
