#include "dhsense/topology.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "dhsense/error.hpp"
#include "json.hpp"

namespace dhsense {

using nlohmann::json;

namespace {

template <typename T>
const T& find_by_id(const std::vector<T>& items, const std::string& id, const char* kind) {
  for (const auto& item : items) {
    if (item.id == id) return item;
  }
  throw ConfigError(std::string("unknown ") + kind + " '" + id + "'");
}

// Incoming pipe per junction (feed side) / outgoing pipe per junction (return side).
std::map<std::string, const PipeSpec*> index_by(const std::vector<PipeSpec>& pipes, bool by_downstream,
                                                const char* side) {
  std::map<std::string, const PipeSpec*> index;
  for (const auto& p : pipes) {
    const auto& key = by_downstream ? p.downstream : p.upstream;
    if (!index.emplace(key, &p).second) {
      throw ConfigError(std::string(side) + " subgraph is not a tree: junction '" + key +
                        "' has more than one " + (by_downstream ? "incoming" : "outgoing") + " pipe");
    }
  }
  return index;
}

// Walks from `start` following `next` until `root`; throws on cycles or dead ends.
std::vector<const PipeSpec*> path_to_root(const std::string& start, const std::string& root,
                                          const std::map<std::string, const PipeSpec*>& next, bool follow_upstream,
                                          const char* side) {
  std::vector<const PipeSpec*> path;
  std::string at = start;
  std::set<std::string> seen;
  while (at != root) {
    if (!seen.insert(at).second) throw ConfigError(std::string(side) + " subgraph contains a cycle at '" + at + "'");
    auto it = next.find(at);
    if (it == next.end()) {
      throw ConfigError(std::string(side) + " junction '" + start + "' is not connected to '" + root + "'");
    }
    path.push_back(it->second);
    at = follow_upstream ? it->second->upstream : it->second->downstream;
  }
  return path;
}

}  // namespace

const PipeSpec& NetworkTopology::pipe(const std::string& id) const {
  for (const auto& p : feed_pipes)
    if (p.id == id) return p;
  return find_by_id(return_pipes, id, "pipe");
}

const ValveSpec& NetworkTopology::valve(const std::string& id) const { return find_by_id(valves, id, "valve"); }

const ConsumerSpec& NetworkTopology::consumer(const std::string& id) const {
  return find_by_id(consumers, id, "consumer");
}

bool NetworkTopology::has_pipe(const std::string& id) const {
  for (const auto* p : all_pipes())
    if (p->id == id) return true;
  return false;
}

bool NetworkTopology::has_junction(const std::string& id) const {
  for (const auto& j : junctions)
    if (j.id == id) return true;
  return false;
}

std::vector<const PipeSpec*> NetworkTopology::all_pipes() const {
  std::vector<const PipeSpec*> out;
  for (const auto& p : feed_pipes) out.push_back(&p);
  for (const auto& p : return_pipes) out.push_back(&p);
  return out;
}

void NetworkTopology::validate() const {
  std::set<std::string> junction_ids;
  for (const auto& j : junctions) {
    if (!junction_ids.insert(j.id).second) throw ConfigError("duplicate junction id '" + j.id + "'");
    if (j.elevation != 0.0) throw ConfigError("junction '" + j.id + "': only horizontal networks are supported");
  }
  std::set<std::string> component_ids;
  for (const auto* p : all_pipes()) {
    p->validate();
    if (!component_ids.insert(p->id).second) throw ConfigError("duplicate component id '" + p->id + "'");
    if (!junction_ids.count(p->upstream) || !junction_ids.count(p->downstream)) {
      throw ConfigError("pipe '" + p->id + "' references an unknown junction");
    }
  }
  for (const auto& v : valves) {
    v.validate();
    if (!component_ids.insert(v.id).second) throw ConfigError("duplicate component id '" + v.id + "'");
  }
  if (!junction_ids.count(source.supply_node) || !junction_ids.count(source.return_node)) {
    throw ConfigError("source references an unknown junction");
  }
  if (consumers.empty()) throw ConfigError("network has no consumers");
  if (consumers.size() > 64) throw ConfigError("at most 64 consumers are supported");

  const auto feed_in = index_by(feed_pipes, true, "feed");
  const auto return_out = index_by(return_pipes, false, "return");
  std::set<std::string> feed_upstreams;
  for (const auto& p : feed_pipes) feed_upstreams.insert(p.upstream);
  std::set<std::string> return_downstreams;
  for (const auto& p : return_pipes) return_downstreams.insert(p.downstream);

  std::set<std::string> used_feed;
  std::set<std::string> used_return;
  std::set<std::string> consumer_ids;
  std::set<std::string> used_valves;
  for (const auto& c : consumers) {
    if (!consumer_ids.insert(c.id).second) throw ConfigError("duplicate consumer id '" + c.id + "'");
    if (c.area <= 0) throw ConfigError("consumer '" + c.id + "': area must be positive");
    if (c.min_demand <= 0) throw ConfigError("consumer '" + c.id + "': minimum demand must be positive");
    if (c.return_setpoint >= source.supply_temperature) {
      throw ConfigError("consumer '" + c.id + "': return setpoint must be below the supply setpoint");
    }
    if (!used_valves.insert(c.valve).second) throw ConfigError("valve '" + c.valve + "' shared by consumers");
    const auto& v = valve(c.valve);
    if (feed_upstreams.count(v.upstream)) {
      throw ConfigError("consumer '" + c.id + "': valve inlet '" + v.upstream + "' is not a feed leaf");
    }
    if (return_downstreams.count(v.downstream)) {
      throw ConfigError("consumer '" + c.id + "': valve outlet '" + v.downstream + "' is not a return leaf");
    }
    for (const auto* p : path_to_root(v.upstream, source.supply_node, feed_in, true, "feed")) used_feed.insert(p->id);
    for (const auto* p : path_to_root(v.downstream, source.return_node, return_out, false, "return")) {
      used_return.insert(p->id);
    }
  }
  for (const auto& p : feed_pipes) {
    if (!used_feed.count(p.id)) throw ConfigError("feed pipe '" + p.id + "' serves no consumer");
  }
  for (const auto& p : return_pipes) {
    if (!used_return.count(p.id)) throw ConfigError("return pipe '" + p.id + "' serves no consumer");
  }
  if (valves.size() != consumers.size()) throw ConfigError("every valve must belong to exactly one consumer");

  for (const auto& id : sensors.mass_flow) {
    if (!has_pipe(id)) throw ConfigError("mass flow sensor on unknown pipe '" + id + "'");
  }
  for (const auto* list : {&sensors.pressure, &sensors.temperature}) {
    for (const auto& id : *list) {
      if (!junction_ids.count(id)) throw ConfigError("sensor on unknown junction '" + id + "'");
    }
  }
}

std::map<std::string, ConsumerMask> consumer_masks(const NetworkTopology& topology) {
  const auto feed_in = index_by(topology.feed_pipes, true, "feed");
  const auto return_out = index_by(topology.return_pipes, false, "return");
  std::map<std::string, ConsumerMask> masks;
  for (const auto* p : topology.all_pipes()) masks[p->id] = 0;
  for (std::size_t i = 0; i < topology.consumers.size(); ++i) {
    const ConsumerMask bit = ConsumerMask{1} << i;
    const auto& v = topology.valve(topology.consumers[i].valve);
    masks[v.id] = bit;
    for (const auto* p : path_to_root(v.upstream, topology.source.supply_node, feed_in, true, "feed")) {
      masks[p->id] |= bit;
    }
    for (const auto* p : path_to_root(v.downstream, topology.source.return_node, return_out, false, "return")) {
      masks[p->id] |= bit;
    }
  }
  return masks;
}

NetworkTopology default_topology() {
  NetworkTopology t;
  for (const char* id : {"SF", "JF1", "JF2", "JF3", "CA_f", "CB_f", "CC_f", "CD_f", "CA_r", "CB_r", "CC_r", "CD_r",
                         "JR2", "JR3", "JR1", "SR"}) {
    t.junctions.push_back({id, 0.0});
  }
  constexpr double ks = 0.0005;
  auto pipe = [&](const char* id, double d_mm, double l, double ka, const char* from, const char* to) {
    return PipeSpec{id, d_mm / 1000.0, l, ks, ka, from, to};
  };
  t.feed_pipes = {
      pipe("FP0", 31.3, 60, 3.02, "SF", "JF1"),    pipe("FP1", 27.6, 120, 3.03, "JF1", "JF2"),
      pipe("FP2", 17.5, 20, 2.81, "JF2", "CA_f"),  pipe("FP3", 16.9, 100, 3.07, "JF2", "CB_f"),
      pipe("FP4", 27.6, 120, 3.03, "JF1", "JF3"),  pipe("FP5", 16.7, 20, 2.81, "JF3", "CC_f"),
      pipe("FP6", 18.5, 100, 3.06, "JF3", "CD_f"),
  };
  t.return_pipes = {
      pipe("RP0", 18.2, 60, 3.94, "JR1", "SR"),    pipe("RP1", 30.3, 120, 3.99, "JR2", "JR1"),
      pipe("RP2", 19.0, 20, 3.83, "CA_r", "JR2"),  pipe("RP3", 18.5, 100, 4.29, "CB_r", "JR2"),
      pipe("RP4", 30.3, 120, 3.85, "JR3", "JR1"),  pipe("RP5", 17.3, 20, 3.68, "CC_r", "JR3"),
      pipe("RP6", 19.3, 100, 4.04, "CD_r", "JR3"),
  };
  constexpr double zeta = 6e-7;
  t.valves = {
      {"VA", zeta, "CA_f", "CA_r"},
      {"VB", zeta, "CB_f", "CB_r"},
      {"VC", zeta, "CC_f", "CC_r"},
      {"VD", zeta, "CD_f", "CD_r"},
  };
  t.consumers = {
      {"A", 4.0, 60.0, 1.0, "VA"},
      {"B", 4.5, 60.0, 1.0, "VB"},
      {"C", 5.0, 60.0, 1.0, "VC"},
      {"D", 5.5, 60.0, 1.0, "VD"},
  };
  t.source = {"SF", "SR", 90.0, 500e3};
  t.sensors.mass_flow = {"FP0", "FP2", "FP3", "FP5", "FP6"};
  for (const auto& j : t.junctions) {
    if (j.id == t.source.supply_node) continue;  // setpoints, not measurements
    t.sensors.pressure.push_back(j.id);
    if (j.id.size() > 1 && j.id.back() == 'r' && j.id.front() == 'C') continue;  // consumer return setpoints
    t.sensors.temperature.push_back(j.id);
  }
  return t;
}

// ---------------------------------------------------------------------------
// JSON schema. Keys carry their units; diameters are stored in mm like the
// pipe table they come from, everything else in SI.

namespace {

json pipe_to_json(const PipeSpec& p) {
  return json{{"id", p.id},
              {"D [mm]", p.diameter * 1000.0},
              {"L [m]", p.length},
              {"ks [m]", p.roughness},
              {"ka [W/K]", p.heat_transfer},
              {"from", p.upstream},
              {"to", p.downstream}};
}

template <typename T>
T get_field(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(where + ": missing field '" + key + "'");
  try {
    return it->template get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(where + ": field '" + key + "' has the wrong type");
  }
}

PipeSpec pipe_from_json(const json& j) {
  const std::string id = get_field<std::string>(j, "id", "pipe");
  const std::string where = "pipe " + id;
  return PipeSpec{id,
                  get_field<double>(j, "D [mm]", where) / 1000.0,
                  get_field<double>(j, "L [m]", where),
                  get_field<double>(j, "ks [m]", where),
                  get_field<double>(j, "ka [W/K]", where),
                  get_field<std::string>(j, "from", where),
                  get_field<std::string>(j, "to", where)};
}

constexpr const char* kTopologyFormat = "dhsense-topology/1";

}  // namespace

std::string topology_to_string(const NetworkTopology& t) {
  json j;
  j["format"] = kTopologyFormat;
  j["source"] = {{"supply_node", t.source.supply_node},
                 {"return_node", t.source.return_node},
                 {"supply_temperature [degC]", t.source.supply_temperature},
                 {"supply_pressure [Pa]", t.source.supply_pressure}};
  j["junctions"] = json::array();
  for (const auto& jn : t.junctions) j["junctions"].push_back({{"id", jn.id}, {"elevation [m]", jn.elevation}});
  j["feed_pipes"] = json::array();
  for (const auto& p : t.feed_pipes) j["feed_pipes"].push_back(pipe_to_json(p));
  j["return_pipes"] = json::array();
  for (const auto& p : t.return_pipes) j["return_pipes"].push_back(pipe_to_json(p));
  j["valves"] = json::array();
  for (const auto& v : t.valves) {
    j["valves"].push_back({{"id", v.id}, {"zeta [-]", v.flow_coefficient}, {"from", v.upstream}, {"to", v.downstream}});
  }
  j["consumers"] = json::array();
  for (const auto& c : t.consumers) {
    j["consumers"].push_back({{"id", c.id},
                              {"area [m2]", c.area},
                              {"return_setpoint [degC]", c.return_setpoint},
                              {"min_demand [kW]", c.min_demand},
                              {"valve", c.valve}});
  }
  j["sensors"] = {{"mass_flow", t.sensors.mass_flow},
                  {"pressure", t.sensors.pressure},
                  {"temperature", t.sensors.temperature}};
  return j.dump(2) + "\n";
}

NetworkTopology topology_from_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // byte offset only; recover line/column from it
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError("malformed topology file", line, col);
  }
  if (j.value("format", "") != kTopologyFormat) throw SchemaError("topology: unsupported or missing format tag");

  NetworkTopology t;
  const auto src = get_field<json>(j, "source", "topology");
  t.source = {get_field<std::string>(src, "supply_node", "source"),
              get_field<std::string>(src, "return_node", "source"),
              get_field<double>(src, "supply_temperature [degC]", "source"),
              get_field<double>(src, "supply_pressure [Pa]", "source")};
  for (const auto& jn : get_field<json>(j, "junctions", "topology")) {
    t.junctions.push_back({get_field<std::string>(jn, "id", "junction"), jn.value("elevation [m]", 0.0)});
  }
  for (const auto& p : get_field<json>(j, "feed_pipes", "topology")) t.feed_pipes.push_back(pipe_from_json(p));
  for (const auto& p : get_field<json>(j, "return_pipes", "topology")) t.return_pipes.push_back(pipe_from_json(p));
  for (const auto& v : get_field<json>(j, "valves", "topology")) {
    const auto id = get_field<std::string>(v, "id", "valve");
    t.valves.push_back({id, get_field<double>(v, "zeta [-]", "valve " + id), get_field<std::string>(v, "from", id),
                        get_field<std::string>(v, "to", id)});
  }
  for (const auto& c : get_field<json>(j, "consumers", "topology")) {
    const auto id = get_field<std::string>(c, "id", "consumer");
    const auto where = "consumer " + id;
    t.consumers.push_back({id, get_field<double>(c, "area [m2]", where),
                           get_field<double>(c, "return_setpoint [degC]", where),
                           get_field<double>(c, "min_demand [kW]", where), get_field<std::string>(c, "valve", where)});
  }
  const auto& s = get_field<json>(j, "sensors", "topology");
  t.sensors.mass_flow = get_field<std::vector<std::string>>(s, "mass_flow", "sensors");
  t.sensors.pressure = get_field<std::vector<std::string>>(s, "pressure", "sensors");
  t.sensors.temperature = get_field<std::vector<std::string>>(s, "temperature", "sensors");
  t.validate();
  return t;
}

NetworkTopology load_topology(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open topology file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return topology_from_string(ss.str());
}

void save_topology(const NetworkTopology& topology, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write topology file " + path.string());
  out << topology_to_string(topology);
}

}  // namespace dhsense
