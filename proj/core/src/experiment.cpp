#include "dhsense/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "dhsense/error.hpp"
#include "dhsense/simulator.hpp"
#include "dhsense/topology.hpp"
#include "dhsense/weather.hpp"
#include "json.hpp"

namespace dhsense {

using nlohmann::json;

// ---------------------------------------------------------------- config

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("experiment needs at least one seed");
  if (architectures.empty()) throw ConfigError("experiment needs at least one architecture");
  if (variants.empty()) throw ConfigError("experiment needs at least one variant");
  if (rows == 0) throw ConfigError("rows must be positive");
  if (!(sigma >= 0.0)) throw ConfigError("noise sigma must be non-negative");
  if (stride == 0) throw ConfigError("stride must be positive");
  if (jobs == 0) throw ConfigError("jobs must be positive");
  const double total = split.train + split.val + split.test;
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1, got " + std::to_string(total));
  model.validate();
}

namespace {

json model_json(const ModelConfig& m) {
  return {{"graph_hidden", m.graph_hidden},   {"mlp_hidden", m.mlp_hidden},
          {"heads", m.heads},                 {"cheb_order", m.cheb_order},
          {"window", m.window},               {"activation", activation_name(m.activation)},
          {"learning_rate", m.learning_rate}, {"batch_size", m.batch_size},
          {"patience", m.patience},           {"max_epochs", m.max_epochs},
          {"x_skip", m.x_skip},               {"cnn_channels", m.cnn_channels},
          {"cnn_kernel", m.cnn_kernel},       {"attention_slope", m.attention_slope},
          {"fgo_backend", m.fgo_backend == DftBackend::fftw ? "fftw" : "dense"}};
}

json config_json(const ExperimentConfig& c) {
  json j;
  j["dataset"] = c.dataset;
  j["topology"] = c.topology;
  j["rows"] = c.rows;
  j["weather_seed"] = c.weather_seed;
  j["scenario"] = scenario_name(c.scenario);
  j["sigma"] = c.sigma;
  j["noise_seed"] = c.noise_seed;
  j["architectures"] = json::array();
  for (auto a : c.architectures) j["architectures"].push_back(architecture_name(a));
  j["variants"] = json::array();
  for (auto v : c.variants) j["variants"].push_back(variant_name(v));
  j["seeds"] = c.seeds;
  j["model"] = model_json(c.model);
  j["split"] = {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}};
  j["stride"] = c.stride;
  j["adjacency"] = {{"kappa", c.adjacency.kappa}, {"self_loops", c.adjacency.self_loops}};
  j["augment"] = {{"nominal_temperature", c.augment.nominal_temperature},
                  {"nominal_ambient", c.augment.nominal_ambient},
                  {"flow_floor", c.augment.flow_floor},
                  {"max_temperature_drop", c.augment.max_temperature_drop}};
  j["plot_sensors"] = c.plot_sensors;
  j["output_dir"] = c.output_dir;
  j["jobs"] = c.jobs;
  j["save_checkpoints"] = c.save_checkpoints;
  return j;
}

/// Reads known keys of an object into targets, rejecting anything else.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw SchemaError(where_ + " must be an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw SchemaError("unknown key '" + k + "' in " + where_);
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw SchemaError("bad value for '" + std::string(key) + "' in " + where_ + ": " + e.what());
    }
  }
  const json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void read_model(const json& j, ModelConfig& m) {
  Reader r(j, "model");
  r.get("graph_hidden", m.graph_hidden);
  r.get("mlp_hidden", m.mlp_hidden);
  r.get("heads", m.heads);
  r.get("cheb_order", m.cheb_order);
  r.get("window", m.window);
  std::string act = activation_name(m.activation);
  r.get("activation", act);
  m.activation = parse_activation(act);
  r.get("learning_rate", m.learning_rate);
  r.get("batch_size", m.batch_size);
  r.get("patience", m.patience);
  r.get("max_epochs", m.max_epochs);
  r.get("x_skip", m.x_skip);
  r.get("cnn_channels", m.cnn_channels);
  r.get("cnn_kernel", m.cnn_kernel);
  r.get("attention_slope", m.attention_slope);
  std::string backend = m.fgo_backend == DftBackend::fftw ? "fftw" : "dense";
  r.get("fgo_backend", backend);
  if (backend == "fftw") {
    m.fgo_backend = DftBackend::fftw;
  } else if (backend == "dense") {
    m.fgo_backend = DftBackend::dense;
  } else {
    throw ConfigError("unknown fgo_backend '" + backend + "' (expected fftw or dense)");
  }
}

}  // namespace

std::string experiment_config_to_string(const ExperimentConfig& config) { return config_json(config).dump(2) + "\n"; }

ExperimentConfig experiment_config_from_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed experiment config: ") + e.what(), 1, e.byte);
  }
  ExperimentConfig c;
  {
    Reader r(j, "experiment config");
    r.get("dataset", c.dataset);
    r.get("topology", c.topology);
    r.get("rows", c.rows);
    r.get("weather_seed", c.weather_seed);
    std::string scenario = scenario_name(c.scenario);
    r.get("scenario", scenario);
    c.scenario = parse_scenario(scenario);
    r.get("sigma", c.sigma);
    r.get("noise_seed", c.noise_seed);
    if (const auto* a = r.sub("architectures")) {
      c.architectures.clear();
      for (const auto& name : *a) c.architectures.push_back(parse_architecture(name.get<std::string>()));
    }
    if (const auto* v = r.sub("variants")) {
      c.variants.clear();
      for (const auto& name : *v) c.variants.push_back(parse_variant(name.get<std::string>()));
    }
    r.get("seeds", c.seeds);
    if (const auto* m = r.sub("model")) read_model(*m, c.model);
    if (const auto* s = r.sub("split")) {
      Reader rs(*s, "split");
      rs.get("train", c.split.train);
      rs.get("val", c.split.val);
      rs.get("test", c.split.test);
    }
    r.get("stride", c.stride);
    if (const auto* a = r.sub("adjacency")) {
      Reader ra(*a, "adjacency");
      ra.get("kappa", c.adjacency.kappa);
      ra.get("self_loops", c.adjacency.self_loops);
    }
    if (const auto* a = r.sub("augment")) {
      Reader ra(*a, "augment");
      ra.get("nominal_temperature", c.augment.nominal_temperature);
      ra.get("nominal_ambient", c.augment.nominal_ambient);
      ra.get("flow_floor", c.augment.flow_floor);
      ra.get("max_temperature_drop", c.augment.max_temperature_drop);
    }
    r.get("plot_sensors", c.plot_sensors);
    r.get("output_dir", c.output_dir);
    r.get("jobs", c.jobs);
    r.get("save_checkpoints", c.save_checkpoints);
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open experiment config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return experiment_config_from_string(ss.str());
}

// ---------------------------------------------------------------- data

ScenarioData prepare_scenario(const ExperimentConfig& config) {
  const NetworkTopology topo = config.topology.empty() ? default_topology() : load_topology(config.topology);
  const FluidProps fluid;
  ScenarioData d;
  if (config.dataset == "generate") {
    d.table = generate_dataset(topo, synthesize_weather(config.rows, config.weather_seed), fluid);
  } else {
    auto table = import_table(config.dataset);
    if (table.rows() < config.rows) {
      throw ConfigError("dataset " + config.dataset + " has " + std::to_string(table.rows()) + " rows, " +
                        std::to_string(config.rows) + " requested");
    }
    d.table = table.head(config.rows);
  }
  if (config.scenario == Scenario::noisy) d.table = inject_noise(d.table, config.sigma, config.noise_seed);
  d.physics = augment_physics(d.table, topo, fluid, derive_augmentation_map(topo), config.augment);
  d.flows = flow_features(d.table);
  d.targets = target_features(d.table);
  return d;
}

VariantData prepare_variant(const ScenarioData& data, Variant variant, const ExperimentConfig& config,
                            bool with_adjacency) {
  const FeatureMatrix& features = variant == Variant::physics_enhanced ? data.physics : data.flows;
  const std::size_t window = config.model.window;
  VariantData v;
  v.variant = variant;
  v.feature_names = features.names;
  const auto windows = window_count(features.rows(), window, config.stride);
  v.bounds = chronological_split(windows, config.split);
  // rows touched by training windows only
  v.normalization_rows = (v.bounds.train_end - 1) * config.stride + window;
  v.feature_stats = NormalizationStats::fit(features.head(v.normalization_rows));
  v.target_stats = NormalizationStats::fit(data.targets.head(v.normalization_rows));
  const Eigen::MatrixXd x = v.feature_stats.apply(features.values);
  const Eigen::MatrixXd y = v.target_stats.apply(data.targets.values);
  v.samples = window_slices(x, y, window, config.stride, with_adjacency ? &config.adjacency : nullptr);
  return v;
}

std::vector<BatchedGraph> make_batches(const std::vector<GraphSample>& samples, std::size_t begin, std::size_t end,
                                       std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  std::vector<BatchedGraph> out;
  for (std::size_t b = begin; b < end; b += batch_size) {
    std::vector<const GraphSample*> chunk;
    for (std::size_t i = b; i < std::min(end, b + batch_size); ++i) chunk.push_back(&samples[i]);
    out.push_back(block_diag_batch(chunk));
  }
  return out;
}

std::string cell_name(Architecture a, Variant v, std::uint64_t seed) {
  return architecture_name(a) + "_" + variant_name(v) + "_seed" + std::to_string(seed);
}

// ---------------------------------------------------------------- run

namespace {

struct PreparedSplits {
  std::vector<PreparedBatch> train, val, test;
};

bool needs_adjacency(Architecture a) {
  return a == Architecture::chebynet || a == Architecture::gatv2 || a == Architecture::transformer;
}

[[noreturn]] void rethrow_annotated(std::exception_ptr e, const std::string& prefix) {
  try {
    std::rethrow_exception(e);
  } catch (const ParseError& x) {
    throw ParseError(prefix + x.what(), x.line(), x.column());
  } catch (const ConvergenceError& x) {
    throw ConvergenceError(prefix + x.what(), x.residual());
  } catch (const ConfigError& x) {
    throw ConfigError(prefix + x.what());
  } catch (const SchemaError& x) {
    throw SchemaError(prefix + x.what());
  } catch (const DomainError& x) {
    throw DomainError(prefix + x.what());
  } catch (const NumericalError& x) {
    throw NumericalError(prefix + x.what());
  } catch (const ShapeError& x) {
    throw ShapeError(prefix + x.what());
  } catch (const std::exception& x) {
    throw Error(prefix + x.what());
  }
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const LogFn& log) {
  config.validate();
  auto say = [&](const std::string& m) {
    if (log) log(m);
  };
  say("scenario " + scenario_name(config.scenario) +
      (config.scenario == Scenario::noisy ? " (sigma " + fmt(config.sigma) + " kg/s)" : std::string()) + ", " +
      std::to_string(config.rows) + " rows; |dT| nodes use nominal water " + fmt(config.augment.nominal_temperature) +
      " degC and ambient " + fmt(config.augment.nominal_ambient) + " degC");

  const ScenarioData data = prepare_scenario(config);
  bool any_adjacency = false;
  for (auto a : config.architectures) any_adjacency = any_adjacency || needs_adjacency(a);

  for (const auto& s : config.plot_sensors) {
    if (std::find(data.targets.names.begin(), data.targets.names.end(), s) == data.targets.names.end()) {
      throw ConfigError("plot sensor '" + s + "' is not a virtual sensor of this network");
    }
  }

  std::vector<VariantData> variants;
  for (auto v : config.variants) {
    variants.push_back(prepare_variant(data, v, config, any_adjacency));
    say(variant_name(v) + ": " + std::to_string(variants.back().feature_names.size()) + " nodes, " +
        std::to_string(variants.back().samples.size()) + " windows");
  }

  // batches and graph structures per (variant, architecture), shared by seeds
  std::vector<std::vector<PreparedSplits>> prepared(variants.size());
  for (std::size_t vi = 0; vi < variants.size(); ++vi) {
    const auto& vd = variants[vi];
    const auto& b = vd.bounds;
    const auto train_b = make_batches(vd.samples, 0, b.train_end, config.model.batch_size);
    const auto val_b = make_batches(vd.samples, b.train_end, b.val_end, config.model.batch_size);
    const auto test_b = make_batches(vd.samples, b.val_end, b.total, config.model.batch_size);
    for (auto arch : config.architectures) {
      ModelConfig mc = config.model;
      mc.architecture = arch;
      PreparedSplits p;
      for (const auto& x : train_b) p.train.push_back(prepare_batch(x, mc));
      for (const auto& x : val_b) p.val.push_back(prepare_batch(x, mc));
      for (const auto& x : test_b) p.test.push_back(prepare_batch(x, mc));
      prepared[vi].push_back(std::move(p));
    }
  }

  struct Job {
    std::size_t arch_index, variant_index;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t ai = 0; ai < config.architectures.size(); ++ai) {
    for (std::size_t vi = 0; vi < variants.size(); ++vi) {
      for (auto seed : config.seeds) jobs.push_back({ai, vi, seed});
    }
  }

  ExperimentResult result;
  result.report.cells.resize(jobs.size());
  result.cells.resize(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  const std::size_t n_targets = data.targets.features();

  auto run_cell = [&](std::size_t k) {
    const auto& job = jobs[k];
    const auto arch = config.architectures[job.arch_index];
    const auto& vd = variants[job.variant_index];
    const auto& splits = prepared[job.variant_index][job.arch_index];
    try {
      const auto t0 = std::chrono::steady_clock::now();
      ModelConfig mc = config.model;
      mc.architecture = arch;
      mc.seed = job.seed;
      Model model(mc, vd.feature_names.size(), n_targets);
      const TrainResult tr = train(model, splits.train, splits.val);
      const Eigen::MatrixXd pred = predict(model, splits.test);
      Eigen::MatrixXd actual(pred.rows(), pred.cols());
      for (std::size_t i = vd.bounds.val_end; i < vd.bounds.total; ++i) {
        actual.row(static_cast<Eigen::Index>(i - vd.bounds.val_end)) = vd.samples[i].y.transpose();
      }
      CellResult& cell = result.report.cells[k];
      cell.architecture = arch;
      cell.variant = vd.variant;
      cell.seed = job.seed;
      cell.test = compute_metrics(actual, pred);
      const Eigen::VectorXd ps = per_sensor_mae(actual, pred);
      cell.per_sensor_mae.assign(ps.data(), ps.data() + ps.size());
      cell.nodes = vd.feature_names.size();
      cell.parameters = model.parameter_count();
      cell.epochs_run = tr.history.size();
      cell.best_epoch = tr.best_epoch;
      cell.best_val_loss = tr.best_val_loss;

      CellArtifacts& art = result.cells[k];
      art.architecture = arch;
      art.variant = vd.variant;
      art.seed = job.seed;
      art.history = tr.history;
      for (std::size_t i = vd.bounds.val_end; i < vd.bounds.total; ++i) {
        art.test_hours.push_back(vd.samples[i].start + config.model.window - 1);
      }
      art.test_actual = actual;
      art.test_predicted = pred;
      art.target_stats = vd.target_stats;
      if (config.save_checkpoints) art.checkpoint = named_parameters(model);

      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      say(cell_name(arch, vd.variant, job.seed) + ": " + std::to_string(cell.epochs_run) + " epochs (best " +
          std::to_string(cell.best_epoch) + "), test RMSE " + fmt(cell.test.rmse) + ", MAE " + fmt(cell.test.mae) +
          ", accuracy " + fmt(cell.test.accuracy) + " [" + fmt(secs) + " s]");
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };

  if (config.jobs <= 1) {
    for (std::size_t k = 0; k < jobs.size(); ++k) {
      run_cell(k);
      if (errors[k]) break;
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(config.jobs, jobs.size()); ++t) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < jobs.size(); k = next++) run_cell(k);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    if (errors[k]) {
      const auto& job = jobs[k];
      rethrow_annotated(errors[k], "[" + architecture_name(config.architectures[job.arch_index]) + ", " +
                                       variant_name(variants[job.variant_index].variant) + ", seed " +
                                       std::to_string(job.seed) + "] ");
    }
  }

  auto& rep = result.report;
  rep.scenario = config.scenario;
  rep.sigma = config.scenario == Scenario::noisy ? config.sigma : 0.0;
  rep.rows = data.table.rows();
  rep.train_windows = variants.front().bounds.train_size();
  rep.val_windows = variants.front().bounds.val_size();
  rep.test_windows = variants.front().bounds.test_size();
  rep.target_names = data.targets.names;
  rep.config_json = config_json(config).dump();
  summarize(rep);
  return result;
}

void write_experiment(const ExperimentResult& result, const ExperimentConfig& config,
                      const std::filesystem::path& dir) {
  emit_report(result.report, dir);
  std::filesystem::create_directories(dir / "history");
  std::filesystem::create_directories(dir / "plots");
  const auto& names = result.report.target_names;
  std::vector<std::size_t> plot_cols;
  for (const auto& s : config.plot_sensors) {
    const auto it = std::find(names.begin(), names.end(), s);
    if (it != names.end()) plot_cols.push_back(static_cast<std::size_t>(it - names.begin()));
  }
  for (const auto& c : result.cells) {
    const std::string name = cell_name(c.architecture, c.variant, c.seed);
    {
      std::ofstream out(dir / "history" / (name + ".csv"), std::ios::binary);
      if (!out) throw ConfigError("cannot write history for " + name);
      out << "epoch,train_loss,val_loss,wall_seconds\n";
      for (const auto& r : c.history) {
        out << r.epoch << "," << format_double(r.train_loss) << "," << format_double(r.val_loss) << ","
            << format_double(r.wall_seconds) << "\n";
      }
    }
    {
      std::ofstream out(dir / "plots" / (name + ".csv"), std::ios::binary);
      if (!out) throw ConfigError("cannot write plot data for " + name);
      out << "hour";
      for (auto col : plot_cols) {
        const auto& s = names[col];
        out << "," << s << "_actual," << s << "_predicted," << s << "_actual_raw," << s << "_predicted_raw";
      }
      out << "\n";
      const Eigen::MatrixXd actual_raw = c.target_stats.invert(c.test_actual);
      const Eigen::MatrixXd pred_raw = c.target_stats.invert(c.test_predicted);
      for (Eigen::Index r = 0; r < c.test_actual.rows(); ++r) {
        out << c.test_hours[static_cast<std::size_t>(r)];
        for (auto col : plot_cols) {
          const auto ci = static_cast<Eigen::Index>(col);
          out << "," << format_double(c.test_actual(r, ci)) << "," << format_double(c.test_predicted(r, ci)) << ","
              << format_double(actual_raw(r, ci)) << "," << format_double(pred_raw(r, ci));
        }
        out << "\n";
      }
    }
    if (!c.checkpoint.empty()) {
      std::filesystem::create_directories(dir / "checkpoints");
      std::ofstream out(dir / "checkpoints" / (name + ".json"), std::ios::binary);
      if (!out) throw ConfigError("cannot write checkpoint for " + name);
      out << checkpoint_to_string(c.checkpoint);
    }
  }
}

}  // namespace dhsense
