#include "dhsense/augment.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "dhsense/error.hpp"
#include "json.hpp"

namespace dhsense {

using nlohmann::json;

std::string FlowExpression::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (i == 0) {
      if (terms[i].sign < 0) out += "-";
    } else {
      out += terms[i].sign < 0 ? " - " : " + ";
    }
    out += terms[i].sensor;
  }
  return out;
}

FlowExpression FlowExpression::parse(const std::string& text) {
  FlowExpression e;
  int sign = 1;
  std::size_t i = 0;
  bool expect_term = true;
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '+' || c == '-') {
      if (expect_term) {
        if (c == '-') sign = -sign;
      } else {
        expect_term = true;
        sign = c == '-' ? -1 : 1;
      }
      ++i;
    } else {
      if (!expect_term) throw ParseError("missing operator in flow expression '" + text + "'", 1, i + 1);
      std::size_t j = i;
      while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_')) ++j;
      if (j == i) throw ParseError("unexpected character in flow expression '" + text + "'", 1, i + 1);
      e.terms.push_back({sign, text.substr(i, j - i)});
      sign = 1;
      expect_term = false;
      i = j;
    }
  }
  if (expect_term) throw ParseError("incomplete flow expression '" + text + "'", 1, text.size() + 1);
  return e;
}

double FlowExpression::evaluate(const SensorTable& table, std::size_t row) const {
  double sum = 0.0;
  for (const auto& t : terms) sum += t.sign * table.column(table.index_of(SensorKind::mass_flow, t.sensor))[row];
  return sum;
}

namespace {

std::optional<FlowExpression> resolve(ConsumerMask target, const std::vector<std::pair<std::string, ConsumerMask>>& sensors) {
  for (const auto& [id, m] : sensors) {
    if (m == target) return FlowExpression{{{1, id}}};
  }
  // disjoint cover by the largest contained sensors
  auto cover = [&](ConsumerMask want) -> std::optional<FlowExpression> {
    std::vector<std::pair<std::string, ConsumerMask>> inside;
    for (const auto& s : sensors) {
      if (s.second != 0 && (s.second & ~want) == 0) inside.push_back(s);
    }
    std::stable_sort(inside.begin(), inside.end(),
                     [](const auto& a, const auto& b) { return std::popcount(a.second) > std::popcount(b.second); });
    FlowExpression e;
    ConsumerMask covered = 0;
    for (const auto& [id, m] : inside) {
      if ((m & covered) == 0) {
        e.terms.push_back({1, id});
        covered |= m;
      }
    }
    if (covered != want) return std::nullopt;
    return e;
  };
  if (auto e = cover(target)) return e;
  // superset minus the complement
  for (const auto& [id, m] : sensors) {
    if ((m & target) == target && m != target) {
      if (auto rest = cover(m & ~target)) {
        FlowExpression e{{{1, id}}};
        for (auto t : rest->terms) e.terms.push_back({-1, t.sensor});
        return e;
      }
    }
  }
  return std::nullopt;
}

}  // namespace

AugmentationMap derive_augmentation_map(const NetworkTopology& topology) {
  const auto masks = consumer_masks(topology);
  std::vector<std::pair<std::string, ConsumerMask>> sensors;
  for (const auto& id : topology.sensors.mass_flow) sensors.emplace_back(id, masks.at(id));

  AugmentationMap map;
  for (const auto* p : topology.all_pipes()) {
    auto e = resolve(masks.at(p->id), sensors);
    if (!e) throw ConfigError("cannot determine the mass flow of pipe '" + p->id + "' from the flow sensors");
    map.pipes.emplace_back(p->id, std::move(*e));
  }
  for (const auto& v : topology.valves) {
    auto e = resolve(masks.at(v.id), sensors);
    if (!e) throw ConfigError("cannot determine the mass flow of valve '" + v.id + "' from the flow sensors");
    map.valves.emplace_back(v.id, std::move(*e));
  }
  return map;
}

std::string augmentation_map_to_string(const AugmentationMap& map) {
  json j;
  j["format"] = "dhsense-augmentation/1";
  j["pipes"] = json::array();
  for (const auto& [id, e] : map.pipes) j["pipes"].push_back({{"component", id}, {"flow", e.to_string()}});
  j["valves"] = json::array();
  for (const auto& [id, e] : map.valves) j["valves"].push_back({{"component", id}, {"flow", e.to_string()}});
  return j.dump(2) + "\n";
}

AugmentationMap augmentation_map_from_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("malformed augmentation map", 1, e.byte);
  }
  if (j.value("format", "") != "dhsense-augmentation/1") throw SchemaError("augmentation map: missing format tag");
  AugmentationMap map;
  try {
    for (const auto& p : j.at("pipes")) {
      map.pipes.emplace_back(p.at("component").get<std::string>(), FlowExpression::parse(p.at("flow").get<std::string>()));
    }
    for (const auto& v : j.at("valves")) {
      map.valves.emplace_back(v.at("component").get<std::string>(), FlowExpression::parse(v.at("flow").get<std::string>()));
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("augmentation map: ") + e.what());
  }
  return map;
}

AugmentationMap load_augmentation_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open augmentation map " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return augmentation_map_from_string(ss.str());
}

void save_augmentation_map(const AugmentationMap& map, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write augmentation map " + path.string());
  out << augmentation_map_to_string(map);
}

std::size_t FeatureMatrix::count(Provenance p) const {
  return static_cast<std::size_t>(std::count(provenance.begin(), provenance.end(), p));
}

FeatureMatrix FeatureMatrix::select(const std::vector<std::size_t>& columns) const {
  FeatureMatrix out;
  out.values.resize(values.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) {
    out.names.push_back(names.at(columns[k]));
    out.provenance.push_back(provenance.at(columns[k]));
    out.values.col(static_cast<Eigen::Index>(k)) = values.col(static_cast<Eigen::Index>(columns[k]));
  }
  return out;
}

FeatureMatrix FeatureMatrix::head(std::size_t n) const {
  FeatureMatrix out = *this;
  out.values = values.topRows(static_cast<Eigen::Index>(std::min(n, rows())));
  return out;
}

FeatureMatrix flow_features(const SensorTable& table) {
  const auto cols = table.columns_of(SensorKind::mass_flow);
  FeatureMatrix f;
  f.values.resize(static_cast<Eigen::Index>(table.rows()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) {
    f.names.push_back(table.columns()[cols[k]].key());
    f.provenance.push_back(Provenance::physical);
    const auto& c = table.column(cols[k]);
    for (std::size_t r = 0; r < table.rows(); ++r) f.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = c[r];
  }
  return f;
}

FeatureMatrix target_features(const SensorTable& table) {
  std::vector<std::size_t> cols = table.columns_of(SensorKind::pressure);
  for (auto c : table.columns_of(SensorKind::temperature)) cols.push_back(c);
  FeatureMatrix f;
  f.values.resize(static_cast<Eigen::Index>(table.rows()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) {
    f.names.push_back(table.columns()[cols[k]].key());
    f.provenance.push_back(Provenance::physical);
    const auto& c = table.column(cols[k]);
    for (std::size_t r = 0; r < table.rows(); ++r) f.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = c[r];
  }
  return f;
}

FeatureMatrix augment_physics(const SensorTable& table, const NetworkTopology& topology, const FluidProps& fluid,
                              const AugmentationMap& map, const AugmentOptions& opts) {
  for (const auto* p : topology.all_pipes()) {
    const bool mapped = std::any_of(map.pipes.begin(), map.pipes.end(), [&](const auto& e) { return e.first == p->id; });
    if (!mapped) throw ConfigError("augmentation map has no flow expression for pipe '" + p->id + "'");
  }
  for (const auto& [id, e] : map.pipes) {
    if (!topology.has_pipe(id)) throw ConfigError("augmentation map references unknown pipe '" + id + "'");
    for (const auto& t : e.terms) table.index_of(SensorKind::mass_flow, t.sensor);
  }
  for (const auto& [id, e] : map.valves) {
    topology.valve(id);
    for (const auto& t : e.terms) table.index_of(SensorKind::mass_flow, t.sensor);
  }

  FeatureMatrix flows = flow_features(table);
  const auto rows = static_cast<Eigen::Index>(table.rows());
  const auto n_flow = static_cast<Eigen::Index>(flows.features());
  const auto n_pipes = static_cast<Eigen::Index>(map.pipes.size());
  const auto n_valves = static_cast<Eigen::Index>(map.valves.size());

  FeatureMatrix f;
  f.names = flows.names;
  f.provenance = flows.provenance;
  f.values.resize(rows, n_flow + 2 * n_pipes + n_valves);
  f.values.leftCols(n_flow) = flows.values;
  for (const auto& [id, e] : map.pipes) {
    f.names.push_back("dP_" + id);
    f.provenance.push_back(Provenance::derived);
  }
  for (const auto& [id, e] : map.pipes) {
    f.names.push_back("dT_" + id);
    f.provenance.push_back(Provenance::derived);
  }
  for (const auto& [id, e] : map.valves) {
    f.names.push_back("dP_" + id);
    f.provenance.push_back(Provenance::derived);
  }

  const double delta_nominal = opts.nominal_temperature - opts.nominal_ambient;
  // expression -> row evaluator with the column lookups hoisted
  auto bind = [&table](const FlowExpression& expr) {
    std::vector<std::pair<double, const std::vector<double>*>> terms;
    for (const auto& t : expr.terms) {
      terms.emplace_back(t.sign, &table.column(table.index_of(SensorKind::mass_flow, t.sensor)));
    }
    return [terms](std::size_t r) {
      double sum = 0.0;
      for (const auto& [sign, col] : terms) sum += sign * (*col)[r];
      return sum;
    };
  };
  for (Eigen::Index k = 0; k < n_pipes; ++k) {
    const auto& [id, expr] = map.pipes[static_cast<std::size_t>(k)];
    const auto& pipe = topology.pipe(id);
    const double heat_kw = pipe.heat_transfer * delta_nominal / 1000.0;
    const auto flow = bind(expr);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double mdot = flow(static_cast<std::size_t>(r));
      f.values(r, n_flow + k) = darcy_pressure_drop(mdot, pipe, fluid, opts.friction);
      const double dt = std::abs(mdot) < opts.flow_floor ? opts.max_temperature_drop
                                                         : temperature_drop_from_heat(heat_kw, mdot, fluid);
      f.values(r, n_flow + n_pipes + k) = std::min(dt, opts.max_temperature_drop);
    }
  }
  for (Eigen::Index k = 0; k < n_valves; ++k) {
    const auto& [id, expr] = map.valves[static_cast<std::size_t>(k)];
    const auto& valve = topology.valve(id);
    const auto flow = bind(expr);
    for (Eigen::Index r = 0; r < rows; ++r) {
      f.values(r, n_flow + 2 * n_pipes + k) = valve_pressure_drop(flow(static_cast<std::size_t>(r)), valve, fluid);
    }
  }
  return f;
}

SensorTable inject_noise(const SensorTable& table, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ConfigError("noise standard deviation must be non-negative");
  SensorTable out = table;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (auto c : out.columns_of(SensorKind::mass_flow)) {
    for (auto& v : out.column(c)) v += noise(rng);
  }
  return out;
}

SensorTable features_as_table(const FeatureMatrix& features) {
  std::vector<std::int64_t> time(features.rows());
  for (std::size_t r = 0; r < time.size(); ++r) time[r] = static_cast<std::int64_t>(r);
  SensorTable table(std::move(time));
  for (std::size_t k = 0; k < features.features(); ++k) {
    const auto& name = features.names[k];
    ColumnInfo info;
    if (name.rfind("mdot_", 0) == 0) {
      info = {SensorKind::mass_flow, name.substr(5), "kg/s"};
    } else if (name.rfind("dT_", 0) == 0) {
      info = {SensorKind::temperature, name, "K"};
    } else if (name.rfind("dP_", 0) == 0) {
      info = {SensorKind::pressure, name, "Pa"};
    } else if (name.rfind("p_", 0) == 0) {
      info = {SensorKind::pressure, name.substr(2), "Pa"};
    } else if (name.rfind("t_", 0) == 0) {
      info = {SensorKind::temperature, name.substr(2), "degC"};
    } else {
      throw SchemaError("feature '" + name + "' has no dataset column kind");
    }
    const auto col = features.values.col(static_cast<Eigen::Index>(k));
    table.add_column(std::move(info), std::vector<double>(col.data(), col.data() + col.size()));
  }
  return table;
}

}  // namespace dhsense
