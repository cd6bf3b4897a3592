#include "dhsense/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "dhsense/error.hpp"
#include "dhsense/sensor_table.hpp"
#include "json.hpp"

namespace dhsense {

using nlohmann::json;

namespace {
constexpr const char* format_tag = "dhsense-report/1";

std::string display_name(Architecture a) {
  switch (a) {
    case Architecture::mlp: return "MLP";
    case Architecture::cnn: return "CNN";
    case Architecture::chebynet: return "ChebyNet";
    case Architecture::gatv2: return "GATv2";
    case Architecture::transformer: return "Graph Transformer";
    case Architecture::fgo: return "FGO";
  }
  return "?";
}

Spread spread(const std::vector<double>& xs) {
  Spread s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(v / static_cast<double>(xs.size()));
  return s;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("failed writing " + path.string());
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

json spread_json(const Spread& s) { return {{"mean", s.mean}, {"std", s.std}}; }
Spread spread_from(const json& j) { return {j.at("mean").get<double>(), j.at("std").get<double>()}; }

}  // namespace

std::string scenario_name(Scenario s) { return s == Scenario::ideal ? "ideal" : "noisy"; }

Scenario parse_scenario(const std::string& name) {
  if (name == "ideal") return Scenario::ideal;
  if (name == "noisy") return Scenario::noisy;
  throw ConfigError("unknown scenario '" + name + "' (expected ideal or noisy)");
}

std::string variant_name(Variant v) { return v == Variant::data_driven ? "data-driven" : "physics-enhanced"; }

Variant parse_variant(const std::string& name) {
  if (name == "data-driven") return Variant::data_driven;
  if (name == "physics-enhanced") return Variant::physics_enhanced;
  throw ConfigError("unknown variant '" + name + "' (expected data-driven or physics-enhanced)");
}

std::string variant_label(Variant v) { return v == Variant::data_driven ? "Data-Driven" : "Physics-Enhanced"; }

const AggregateRow* MetricsReport::aggregate(Architecture a, Variant v) const {
  for (const auto& r : aggregates) {
    if (r.architecture == a && r.variant == v) return &r;
  }
  return nullptr;
}

const DeltaRow* MetricsReport::delta(Architecture a) const {
  for (const auto& d : deltas) {
    if (d.architecture == a) return &d;
  }
  return nullptr;
}

void summarize(MetricsReport& report) {
  std::map<std::pair<int, int>, std::vector<const CellResult*>> groups;
  for (const auto& c : report.cells) {
    groups[{static_cast<int>(c.architecture), static_cast<int>(c.variant)}].push_back(&c);
  }
  report.aggregates.clear();
  report.deltas.clear();
  for (const auto& [key, cells] : groups) {
    AggregateRow row;
    row.architecture = static_cast<Architecture>(key.first);
    row.variant = static_cast<Variant>(key.second);
    row.runs = cells.size();
    std::vector<double> r, m, a;
    for (const auto* c : cells) {
      r.push_back(c->test.rmse);
      m.push_back(c->test.mae);
      a.push_back(c->test.accuracy);
    }
    row.rmse = spread(r);
    row.mae = spread(m);
    row.accuracy = spread(a);
    const std::size_t sensors = cells.front()->per_sensor_mae.size();
    row.per_sensor_mae.assign(sensors, 0.0);
    for (const auto* c : cells) {
      for (std::size_t s = 0; s < sensors && s < c->per_sensor_mae.size(); ++s) row.per_sensor_mae[s] += c->per_sensor_mae[s];
    }
    for (auto& x : row.per_sensor_mae) x /= static_cast<double>(cells.size());
    report.aggregates.push_back(std::move(row));
  }
  for (auto arch : all_architectures()) {
    const auto* base = report.aggregate(arch, Variant::data_driven);
    const auto* enh = report.aggregate(arch, Variant::physics_enhanced);
    if (!base || !enh) continue;
    DeltaRow d;
    d.architecture = arch;
    d.rmse = (enh->rmse.mean - base->rmse.mean) / base->rmse.mean;
    d.mae = (enh->mae.mean - base->mae.mean) / base->mae.mean;
    d.accuracy = (enh->accuracy.mean - base->accuracy.mean) / base->accuracy.mean;
    report.deltas.push_back(d);
  }
}

std::string report_to_json(const MetricsReport& r) {
  json j;
  j["format"] = format_tag;
  j["scenario"] = scenario_name(r.scenario);
  j["sigma"] = r.sigma;
  j["rows"] = r.rows;
  j["windows"] = {{"train", r.train_windows}, {"val", r.val_windows}, {"test", r.test_windows}};
  j["target_names"] = r.target_names;
  j["config"] = r.config_json.empty() ? json::object() : json::parse(r.config_json);
  j["cells"] = json::array();
  for (const auto& c : r.cells) {
    j["cells"].push_back({{"architecture", architecture_name(c.architecture)},
                          {"variant", variant_name(c.variant)},
                          {"seed", c.seed},
                          {"rmse", c.test.rmse},
                          {"mae", c.test.mae},
                          {"accuracy", c.test.accuracy},
                          {"per_sensor_mae", c.per_sensor_mae},
                          {"nodes", c.nodes},
                          {"parameters", c.parameters},
                          {"epochs_run", c.epochs_run},
                          {"best_epoch", c.best_epoch},
                          {"best_val_loss", c.best_val_loss}});
  }
  j["aggregates"] = json::array();
  for (const auto& a : r.aggregates) {
    j["aggregates"].push_back({{"architecture", architecture_name(a.architecture)},
                               {"variant", variant_name(a.variant)},
                               {"runs", a.runs},
                               {"rmse", spread_json(a.rmse)},
                               {"mae", spread_json(a.mae)},
                               {"accuracy", spread_json(a.accuracy)},
                               {"per_sensor_mae", a.per_sensor_mae}});
  }
  j["deltas"] = json::array();
  for (const auto& d : r.deltas) {
    j["deltas"].push_back({{"architecture", architecture_name(d.architecture)},
                           {"rmse", d.rmse},
                           {"mae", d.mae},
                           {"accuracy", d.accuracy}});
  }
  return j.dump(2) + "\n";
}

MetricsReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed report: ") + e.what(), 1, e.byte);
  }
  if (!j.is_object() || j.value("format", "") != format_tag) {
    throw SchemaError(std::string("report is not tagged ") + format_tag);
  }
  MetricsReport r;
  try {
    r.scenario = parse_scenario(j.at("scenario").get<std::string>());
    r.sigma = j.at("sigma").get<double>();
    r.rows = j.at("rows").get<std::size_t>();
    r.train_windows = j.at("windows").at("train").get<std::size_t>();
    r.val_windows = j.at("windows").at("val").get<std::size_t>();
    r.test_windows = j.at("windows").at("test").get<std::size_t>();
    r.target_names = j.at("target_names").get<std::vector<std::string>>();
    r.config_json = j.at("config").dump();
    for (const auto& c : j.at("cells")) {
      CellResult cell;
      cell.architecture = parse_architecture(c.at("architecture").get<std::string>());
      cell.variant = parse_variant(c.at("variant").get<std::string>());
      cell.seed = c.at("seed").get<std::uint64_t>();
      cell.test = {c.at("rmse").get<double>(), c.at("mae").get<double>(), c.at("accuracy").get<double>()};
      cell.per_sensor_mae = c.at("per_sensor_mae").get<std::vector<double>>();
      cell.nodes = c.at("nodes").get<std::size_t>();
      cell.parameters = c.at("parameters").get<std::size_t>();
      cell.epochs_run = c.at("epochs_run").get<std::size_t>();
      cell.best_epoch = c.at("best_epoch").get<std::size_t>();
      cell.best_val_loss = c.at("best_val_loss").get<double>();
      r.cells.push_back(std::move(cell));
    }
    for (const auto& a : j.at("aggregates")) {
      AggregateRow row;
      row.architecture = parse_architecture(a.at("architecture").get<std::string>());
      row.variant = parse_variant(a.at("variant").get<std::string>());
      row.runs = a.at("runs").get<std::size_t>();
      row.rmse = spread_from(a.at("rmse"));
      row.mae = spread_from(a.at("mae"));
      row.accuracy = spread_from(a.at("accuracy"));
      row.per_sensor_mae = a.at("per_sensor_mae").get<std::vector<double>>();
      r.aggregates.push_back(std::move(row));
    }
    for (const auto& d : j.at("deltas")) {
      DeltaRow row;
      row.architecture = parse_architecture(d.at("architecture").get<std::string>());
      row.rmse = d.at("rmse").get<double>();
      row.mae = d.at("mae").get<double>();
      row.accuracy = d.at("accuracy").get<double>();
      r.deltas.push_back(row);
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed report field: ") + e.what());
  }
  return r;
}

MetricsReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open report " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return report_from_json(ss.str());
}

std::string render_table(const MetricsReport& r) {
  std::ostringstream out;
  out << "scenario: " << scenario_name(r.scenario);
  if (r.scenario == Scenario::noisy) out << " (sigma " << format_double(r.sigma) << " kg/s on mass flows)";
  out << ", rows " << r.rows << ", windows " << r.train_windows << "/" << r.val_windows << "/" << r.test_windows
      << "\n\n";
  const std::size_t w0 = 20, w = 20;
  out << pad("Model", w0) << pad("RMSE (x1e-3)", w) << pad("MAE (x1e-3)", w) << "Accuracy (x1e-2)\n";
  auto cell = [](const Spread& s, double k) { return fixed(s.mean * k, 2) + " +- " + fixed(s.std * k, 2); };
  auto pct = [](double x) { return fixed(100.0 * x, 2) + "%"; };
  for (auto arch : all_architectures()) {
    bool any = false;
    for (auto v : {Variant::data_driven, Variant::physics_enhanced}) {
      const auto* a = r.aggregate(arch, v);
      if (!a) continue;
      if (!any) {
        out << std::string(78, '-') << "\n" << display_name(arch) << "\n";
        any = true;
      }
      out << pad("  " + variant_label(v), w0) << pad(cell(a->rmse, 1e3), w) << pad(cell(a->mae, 1e3), w)
          << cell(a->accuracy, 1e2) << "\n";
    }
    if (const auto* d = r.delta(arch)) {
      out << pad("  rel. Delta", w0) << pad(pct(d->rmse), w) << pad(pct(d->mae), w) << pct(d->accuracy) << "\n";
    }
  }
  return out.str();
}

std::string render_sensor_mae(const MetricsReport& r) {
  std::string out = "architecture,variant,sensor,mae_mean\n";
  for (const auto& a : r.aggregates) {
    for (std::size_t s = 0; s < a.per_sensor_mae.size(); ++s) {
      const std::string name = s < r.target_names.size() ? r.target_names[s] : std::to_string(s);
      out += architecture_name(a.architecture) + "," + variant_name(a.variant) + "," + name + "," +
             format_double(a.per_sensor_mae[s]) + "\n";
    }
  }
  return out;
}

void emit_report(const MetricsReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
  write_file(dir / "report.json", report_to_json(report));
  write_file(dir / "table.txt", render_table(report));
  write_file(dir / "sensor_mae.csv", render_sensor_mae(report));
}

}  // namespace dhsense
