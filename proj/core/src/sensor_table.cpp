#include "dhsense/sensor_table.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "dhsense/error.hpp"

namespace dhsense {

std::string kind_prefix(SensorKind kind) {
  switch (kind) {
    case SensorKind::mass_flow: return "mdot";
    case SensorKind::pressure: return "p";
    case SensorKind::temperature: return "t";
    case SensorKind::ambient: return "amb";
    case SensorKind::demand: return "demand";
  }
  return "?";
}

std::optional<SensorKind> kind_from_prefix(const std::string& prefix) {
  for (auto k : {SensorKind::mass_flow, SensorKind::pressure, SensorKind::temperature, SensorKind::ambient,
                 SensorKind::demand}) {
    if (kind_prefix(k) == prefix) return k;
  }
  return std::nullopt;
}

std::string default_unit(SensorKind kind) {
  switch (kind) {
    case SensorKind::mass_flow: return "kg/s";
    case SensorKind::pressure: return "Pa";
    case SensorKind::temperature:
    case SensorKind::ambient: return "degC";
    case SensorKind::demand: return "kW";
  }
  return "";
}

std::string ColumnInfo::key() const { return kind_prefix(kind) + "_" + component; }
std::string ColumnInfo::header() const { return key() + "[" + unit + "]"; }

void SensorTable::add_column(ColumnInfo info, std::vector<double> values) {
  if (values.size() != rows()) {
    throw SchemaError("column " + info.key() + " has " + std::to_string(values.size()) + " rows, table has " +
                      std::to_string(rows()));
  }
  if (find(info.kind, info.component)) throw SchemaError("duplicate column " + info.key());
  columns_.push_back(std::move(info));
  data_.push_back(std::move(values));
}

std::optional<std::size_t> SensorTable::find(SensorKind kind, const std::string& component) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].kind == kind && columns_[i].component == component) return i;
  }
  return std::nullopt;
}

std::size_t SensorTable::index_of(SensorKind kind, const std::string& component) const {
  if (auto i = find(kind, component)) return *i;
  throw SchemaError("missing column " + kind_prefix(kind) + "_" + component);
}

std::vector<std::size_t> SensorTable::columns_of(SensorKind kind) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].kind == kind) out.push_back(i);
  }
  return out;
}

SensorTable SensorTable::head(std::size_t n) const {
  n = std::min(n, rows());
  SensorTable out(std::vector<std::int64_t>(time_.begin(), time_.begin() + static_cast<std::ptrdiff_t>(n)));
  for (std::size_t c = 0; c < cols(); ++c) {
    out.add_column(columns_[c], std::vector<double>(data_[c].begin(), data_[c].begin() + static_cast<std::ptrdiff_t>(n)));
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string table_to_string(const SensorTable& table) {
  std::string out = "time";
  for (const auto& c : table.columns()) out += "," + c.header();
  out += "\n";
  for (std::size_t r = 0; r < table.rows(); ++r) {
    out += std::to_string(table.time()[r]);
    for (std::size_t c = 0; c < table.cols(); ++c) {
      out += ",";
      out += format_double(table.column(c)[r]);
    }
    out += "\n";
  }
  return out;
}

namespace {

ColumnInfo parse_header_field(const std::string& field, std::size_t column) {
  const auto open = field.find('[');
  if (open == std::string::npos || field.back() != ']') {
    throw ParseError("header field '" + field + "' lacks a [unit] suffix", 1, column);
  }
  const std::string key = field.substr(0, open);
  const std::string unit = field.substr(open + 1, field.size() - open - 2);
  const auto underscore = key.find('_');
  if (underscore == std::string::npos || underscore + 1 >= key.size()) {
    throw ParseError("header field '" + field + "' is not <kind>_<id>[unit]", 1, column);
  }
  const auto kind = kind_from_prefix(key.substr(0, underscore));
  if (!kind) throw SchemaError("unknown column kind '" + key.substr(0, underscore) + "' in header field " + field);
  return {*kind, key.substr(underscore + 1), unit};
}

}  // namespace

SensorTable table_from_string(const std::string& text) {
  std::vector<std::string> lines;
  {
    std::size_t start = 0;
    while (start < text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      lines.push_back(text.substr(start, end - start));
      start = end + 1;
    }
  }
  if (lines.empty()) throw ParseError("empty dataset file", 1, 1);

  std::vector<ColumnInfo> infos;
  {
    const auto& header = lines[0];
    std::size_t pos = 0;
    std::size_t field_no = 0;
    while (pos <= header.size()) {
      auto end = header.find(',', pos);
      if (end == std::string::npos) end = header.size();
      const std::string field = header.substr(pos, end - pos);
      if (field_no == 0) {
        if (field != "time") throw ParseError("first header field must be 'time'", 1, pos + 1);
      } else {
        infos.push_back(parse_header_field(field, pos + 1));
      }
      ++field_no;
      pos = end + 1;
    }
  }

  std::vector<std::int64_t> time;
  std::vector<std::vector<double>> values(infos.size());
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto& line = lines[li];
    if (line.empty()) continue;
    const std::size_t line_no = li + 1;
    std::size_t pos = 0;
    for (std::size_t f = 0; f <= infos.size(); ++f) {
      auto end = line.find(',', pos);
      const bool last = f == infos.size();
      if (last != (end == std::string::npos)) {
        throw ParseError("expected " + std::to_string(infos.size() + 1) + " fields", line_no, pos + 1);
      }
      if (end == std::string::npos) end = line.size();
      const char* first = line.data() + pos;
      const char* stop = line.data() + end;
      if (f == 0) {
        std::int64_t t = 0;
        auto res = std::from_chars(first, stop, t);
        if (res.ec != std::errc() || res.ptr != stop) throw ParseError("malformed time value", line_no, pos + 1);
        time.push_back(t);
      } else {
        double v = 0;
        auto res = std::from_chars(first, stop, v);
        if (res.ec != std::errc() || res.ptr != stop) throw ParseError("malformed number", line_no, pos + 1);
        values[f - 1].push_back(v);
      }
      pos = end + 1;
    }
  }

  SensorTable table(std::move(time));
  for (std::size_t c = 0; c < infos.size(); ++c) table.add_column(std::move(infos[c]), std::move(values[c]));
  return table;
}

void export_table(const SensorTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write dataset file " + path.string());
  out << table_to_string(table);
}

SensorTable import_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open dataset file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return table_from_string(ss.str());
}

SensorTable import_table(const std::filesystem::path& path, const std::vector<ColumnRequirement>& required) {
  auto table = import_table(path);
  for (const auto& r : required) table.index_of(r.kind, r.component);
  return table;
}

}  // namespace dhsense
