// dhsense: dataset generation, augmentation inspection, training and sweeps.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "dhsense/augment.hpp"
#include "dhsense/error.hpp"
#include "dhsense/experiment.hpp"
#include "dhsense/simulator.hpp"
#include "dhsense/topology.hpp"
#include "dhsense/weather.hpp"

namespace fs = std::filesystem;
using namespace dhsense;

namespace {

struct Overrides {
  std::string config;
  std::string scenario;
  double sigma = -1.0;
  std::string arch;
  std::string seeds;
  std::size_t rows = 0;
  std::string out;
  std::string dataset;
  std::size_t max_epochs = 0;
  std::size_t jobs = 0;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "experiment config file (JSON)");
  cmd->add_option("--scenario", o.scenario, "ideal | noisy")->check(CLI::IsMember({"ideal", "noisy"}));
  cmd->add_option("--sigma", o.sigma, "noise std on mass flows [kg/s]");
  cmd->add_option("--rows", o.rows, "hourly rows to use");
  cmd->add_option("--out", o.out, "output directory or file");
  cmd->add_option("--dataset", o.dataset, "dataset CSV instead of generating one");
}

void add_training(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--arch", o.arch, "architectures, comma separated");
  cmd->add_option("--seeds", o.seeds, "seeds, comma separated");
  cmd->add_option("--max-epochs", o.max_epochs, "epoch cap");
  cmd->add_option("--jobs", o.jobs, "cells trained concurrently");
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_experiment_config(o.config);
  if (!o.scenario.empty()) c.scenario = parse_scenario(o.scenario);
  if (o.sigma >= 0.0) {
    c.sigma = o.sigma;
    if (o.scenario.empty()) c.scenario = Scenario::noisy;
  }
  if (!o.arch.empty()) {
    c.architectures.clear();
    for (const auto& a : split_list(o.arch)) c.architectures.push_back(parse_architecture(a));
  }
  if (!o.seeds.empty()) {
    c.seeds.clear();
    for (const auto& s : split_list(o.seeds)) {
      try {
        c.seeds.push_back(std::stoull(s));
      } catch (const std::exception&) {
        throw ConfigError("seed '" + s + "' is not a non-negative integer");
      }
    }
  }
  if (o.rows) c.rows = o.rows;
  if (!o.out.empty()) c.output_dir = o.out;
  if (!o.dataset.empty()) c.dataset = o.dataset;
  if (o.max_epochs) c.model.max_epochs = o.max_epochs;
  if (o.jobs) c.jobs = o.jobs;
  c.validate();
  return c;
}

void log_line(const std::string& m) { std::cerr << m << std::endl; }

int run_generate(const Overrides& o) {
  const auto c = resolve(o);
  const auto topo = c.topology.empty() ? default_topology() : load_topology(c.topology);
  auto table = generate_dataset(topo, synthesize_weather(c.rows, c.weather_seed), FluidProps{});
  if (c.scenario == Scenario::noisy) table = inject_noise(table, c.sigma, c.noise_seed);
  const fs::path out = o.out.empty() ? fs::path("dataset.csv") : fs::path(o.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  export_table(table, out);
  log_line("wrote " + std::to_string(table.rows()) + " rows x " + std::to_string(table.cols()) + " columns to " +
           out.string());
  return 0;
}

int run_augment(const Overrides& o) {
  const auto c = resolve(o);
  const auto data = prepare_scenario(c);
  const fs::path dir = o.out.empty() ? fs::path("augmented") : fs::path(o.out);
  fs::create_directories(dir);
  export_table(features_as_table(data.physics), dir / "features.csv");
  const auto topo = c.topology.empty() ? default_topology() : load_topology(c.topology);
  save_augmentation_map(derive_augmentation_map(topo), dir / "augmentation_map.json");
  std::cout << "feature,provenance\n";
  for (std::size_t i = 0; i < data.physics.features(); ++i) {
    std::cout << data.physics.names[i] << ","
              << (data.physics.provenance[i] == Provenance::physical ? "physical" : "derived") << "\n";
  }
  log_line("wrote " + (dir / "features.csv").string());
  return 0;
}

int run_experiment_verb(const Overrides& o, bool single) {
  auto c = resolve(o);
  if (single) {
    if (c.architectures.size() != 1) throw ConfigError("train takes exactly one --arch");
    if (o.seeds.empty()) c.seeds = {c.seeds.front()};
    c.save_checkpoints = true;
  }
  const auto result = run_experiment(c, log_line);
  write_experiment(result, c, c.output_dir);
  std::cout << render_table(result.report);
  log_line("results in " + c.output_dir);
  return 0;
}

int run_report(const Overrides& o) {
  const fs::path dir = o.out.empty() ? fs::path("results") : fs::path(o.out);
  auto report = load_report(dir / "report.json");
  emit_report(report, dir);
  std::cout << render_table(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"District heating virtual-sensor experiments"};
  bool print_defaults = false;
  app.add_flag("--print-defaults", print_defaults, "print the default experiment config and exit");
  app.require_subcommand(0, 1);

  Overrides o;
  auto* gen = app.add_subcommand("generate", "simulate the network and write a dataset CSV");
  add_common(gen, o);
  auto* aug = app.add_subcommand("augment", "write the physics-augmented feature table");
  add_common(aug, o);
  auto* tr = app.add_subcommand("train", "train one architecture (both variants) and save checkpoints");
  add_common(tr, o);
  add_training(tr, o);
  auto* sw = app.add_subcommand("sweep", "train every architecture x variant x seed cell");
  add_common(sw, o);
  add_training(sw, o);
  auto* rep = app.add_subcommand("report", "re-render tables from <out>/report.json");
  rep->add_option("--out", o.out, "results directory");

  CLI11_PARSE(app, argc, argv);
  try {
    if (print_defaults) {
      std::cout << experiment_config_to_string(ExperimentConfig{});
      return 0;
    }
    if (gen->parsed()) return run_generate(o);
    if (aug->parsed()) return run_augment(o);
    if (tr->parsed()) return run_experiment_verb(o, true);
    if (sw->parsed()) return run_experiment_verb(o, false);
    if (rep->parsed()) return run_report(o);
    std::cout << app.help();
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
