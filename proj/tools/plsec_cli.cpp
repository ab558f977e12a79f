// plsec: command-line front end for the eavesdropping simulator.
//
//   plsec run    --config point.cfg --out-dir out/
//   plsec sweep  --config sweep_m.cfg --out-dir out/ --parallelism 4
//   plsec demo   --out-dir out/
//   plsec table2 --realizations 20 --out-dir out/

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "plsec/errors.hpp"
#include "plsec/harness.hpp"

namespace fs = std::filesystem;
using namespace plsec;

namespace {

struct CommonFlags {
  std::string config;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> realizations;
  std::optional<int> frames;
  std::optional<int> parallelism;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "key = value configuration file")->check(CLI::ExistingFile);
  app->add_option("--out-dir", f.out_dir, "directory for CSV, SVG and manifest output");
  app->add_option("--seed", f.seed, "master seed");
  app->add_option("--realizations", f.realizations, "channel realizations per point");
  app->add_option("--frames", f.frames, "data frames per realization");
  app->add_option("--parallelism", f.parallelism, "OpenMP threads (0 = runtime default)");
}

ExperimentConfig resolve(const CommonFlags& f, ExperimentConfig base = {}) {
  ExperimentConfig cfg = f.config.empty() ? base : load_config(f.config, base);
  if (f.seed) cfg.seed = *f.seed;
  if (f.realizations) cfg.realizations = *f.realizations;
  if (f.frames) cfg.frames = *f.frames;
  if (f.parallelism) cfg.parallelism = *f.parallelism;
  return cfg;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << text;
}

void write_manifest(const fs::path& dir, std::string_view command, const ExperimentConfig& cfg,
                    const std::vector<std::string>& outputs) {
  std::string text = "# plsec " + std::string(command) + "\n" + config_to_text(cfg);
  for (const auto& o : outputs) text += "output = " + o + "\n";
  write_file(dir / "manifest.txt", text);
}

int cmd_run(const CommonFlags& f, bool is_sweep) {
  const ExperimentConfig cfg = resolve(f);
  const fs::path dir(f.out_dir);
  fs::create_directories(dir);
  std::vector<MetricsRecord> records;
  if (is_sweep) {
    if (cfg.sweep_axis.empty()) throw ConfigError("sweep: sweep_axis is not set");
    records = sweep(expand_sweep(cfg));
  } else {
    records.push_back(run_point(cfg));
  }
  std::ofstream csv(dir / "results.csv", std::ios::binary);
  write_csv(records, csv);
  std::vector<std::string> outputs{"results.csv"};
  if (is_sweep) {
    const std::string x = cfg.sweep_axis;
    for (const char* y : {"ber_eve", "fer_eve", "p_tot_db"}) {
      PlotSpec ps;
      ps.x_field = x;
      ps.y_field = y;
      ps.title = cfg.scenario + ": " + y;
      const std::string name = std::string(y) + "_vs_" + x + ".svg";
      write_file(dir / name, render_plot(records, ps));
      outputs.push_back(name);
    }
  }
  write_manifest(dir, is_sweep ? "sweep" : "run", cfg, outputs);
  write_csv(records, std::cout);
  int failed = 0;
  for (const auto& r : records) failed += r.status != "ok";
  return failed ? 2 : 0;
}

int cmd_demo(const CommonFlags& f) {
  ExperimentConfig base;
  base.eta_db = 5.0;
  base.M = 1;
  const ExperimentConfig cfg = resolve(f, base);
  const fs::path dir(f.out_dir);
  fs::create_directories(dir);
  const DemoResult d = demo_constellation(cfg);
  write_file(dir / "constellation.csv", d.csv);
  write_file(dir / "constellation.svg", d.svg);
  write_manifest(dir, "demo", cfg, {"constellation.csv", "constellation.svg"});
  std::cout << "wrote " << d.points.size() << " points to " << (dir / "constellation.csv") << '\n';
  return 0;
}

int cmd_table2(const CommonFlags& f) {
  const ExperimentConfig cfg = resolve(f);
  const fs::path dir(f.out_dir);
  fs::create_directories(dir);
  const auto rows = table2(cfg);
  const std::string text = table2_csv(rows);
  write_file(dir / "table2.csv", text);
  write_manifest(dir, "table2", cfg, {"table2.csv"});
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Link-level simulator of learning eavesdroppers against symbol-level precoding"};
  app.require_subcommand(1);
  CommonFlags run_f, sweep_f, demo_f, t2_f;
  auto* run = app.add_subcommand("run", "simulate one operating point");
  auto* sw = app.add_subcommand("sweep", "sweep M or gamma_db and plot");
  auto* demo = app.add_subcommand("demo", "noiseless constellation scatter for ZF and CISPM");
  auto* t2 = app.add_subcommand("table2", "pre-decoding accuracy for every precoder and attack");
  add_common(run, run_f);
  add_common(sw, sweep_f);
  add_common(demo, demo_f);
  add_common(t2, t2_f);
  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_f, false);
    if (*sw) return cmd_run(sweep_f, true);
    if (*demo) return cmd_demo(demo_f);
    if (*t2) return cmd_table2(t2_f);
  } catch (const plsec::Error& e) {
    std::cerr << "plsec: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
