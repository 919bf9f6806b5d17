#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "vbi/config.hpp"
#include "vbi/engine.hpp"
#include "vbi/errors.hpp"
#include "vbi/generator.hpp"
#include "vbi/trace.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { ok = 0, failure = 1, bad_input = 2, lifecycle = 3, out_of_memory = 4 };

struct RunSpec {
  vbi::Scenario scenario;
  vbi::HetPolicy policy = vbi::HetPolicy::aware;
};

RunSpec parse_label(const std::string& label, const std::string& default_policy) {
  RunSpec r;
  const auto colon = label.find(':');
  r.scenario = vbi::parse_scenario(label.substr(0, colon));
  const std::string policy = colon == std::string::npos ? default_policy : label.substr(colon + 1);
  r.policy = vbi::parse_policy(policy);
  if (colon != std::string::npos && !vbi::is_hetero(r.scenario)) {
    throw vbi::ConfigError("policy given for non-heterogeneous scenario '" + label + "'");
  }
  return r;
}

vbi::SimConfig config_from(const std::string& path) {
  return path.empty() ? vbi::SimConfig{} : vbi::load_config(path);
}

vbi::TraceFormat format_of(const vbi::SimConfig& cfg) {
  vbi::TraceFormat f;
  f.mode.vm_mode = cfg.vm_mode;
  f.vm_id = static_cast<uint8_t>(cfg.vm_id);
  return f;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw vbi::ConfigError("cannot write " + path);
  out << text;
}

std::string trace_name(const fs::path& p) {
  std::string name = p.filename().string();
  for (const char* ext : {".gz", ".trace", ".vbt"}) {
    const std::string e = ext;
    if (name.size() > e.size() && name.compare(name.size() - e.size(), e.size(), e) == 0) {
      name.resize(name.size() - e.size());
    }
  }
  return name;
}

int sweep(const std::string& dir, const std::string& scenarios, const std::string& out_path,
          const vbi::SimConfig& cfg, const std::string& policy, unsigned jobs) {
  std::vector<fs::path> traces;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string n = e.path().filename().string();
    if (e.is_regular_file() && (n.find(".trace") != std::string::npos || n.ends_with(".vbt") ||
                                n.ends_with(".vbt.gz"))) {
      traces.push_back(e.path());
    }
  }
  std::sort(traces.begin(), traces.end());
  if (traces.empty()) throw vbi::ConfigError("no traces (*.trace, *.trace.gz) in " + dir);

  std::vector<RunSpec> specs;
  std::vector<std::string> labels;
  std::stringstream list(scenarios);
  for (std::string item; std::getline(list, item, ',');) {
    if (item.empty()) continue;
    specs.push_back(parse_label(item, policy));
    labels.push_back(vbi::scenario_label(specs.back().scenario, specs.back().policy));
  }
  if (specs.empty()) throw vbi::ConfigError("empty scenario list");

  const vbi::TraceFormat fmt = format_of(cfg);
  std::vector<vbi::Trace> loaded;
  for (const auto& t : traces) loaded.push_back(vbi::read_trace(t.string(), fmt));

  const std::size_t total = traces.size() * specs.size();
  std::vector<std::string> rows(total);
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      const std::size_t t = i / specs.size();
      const std::size_t s = i % specs.size();
      try {
        const vbi::RunResult r = vbi::run(loaded[t], cfg, specs[s].scenario, specs[s].policy);
        rows[i] = r.stats.csv_row(trace_name(traces[t]), labels[s]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < std::max(1u, jobs); ++j) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);

  std::string csv = vbi::Stats::csv_header() + "\n";
  for (const auto& row : rows) csv += row + "\n";
  write_file(out_path, csv);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-driven simulator of a Virtual Block Interface memory system"};
  app.require_subcommand(1);

  std::string trace_path, scenario, policy = "aware", config_path, out_path, csv_path;
  auto* run = app.add_subcommand("run", "replay one trace through one scenario");
  run->add_option("--trace", trace_path, "trace file (plain or gzip)")->required();
  run->add_option("--scenario", scenario, "scenario name, optionally name:policy")->required();
  run->add_option("--policy", policy, "aware, unaware or ideal (heterogeneous scenarios)");
  run->add_option("--config", config_path, "TOML config");
  run->add_option("--out", out_path, "stats JSON (default: stdout)");
  run->add_option("--csv", csv_path, "also write a one-row CSV");

  std::string spec;
  uint64_t seed = 1;
  bool vm_mode = false;
  unsigned vm_id = 0;
  auto* gen = app.add_subcommand("gen", "generate a synthetic trace");
  gen->add_option("--spec", spec, "generator, e.g. skew:vbs=10,accesses=100000")->required();
  gen->add_option("--seed", seed, "RNG seed");
  gen->add_option("--out", out_path, "output trace (.gz compresses)")->required();
  gen->add_flag("--vm-mode", vm_mode, "write VM-mode VBUIDs");
  gen->add_option("--vm-id", vm_id, "VM ID for VM-mode VBUIDs");

  std::string traces_dir, scenarios;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  auto* sw = app.add_subcommand("sweep", "run every trace in a directory through several scenarios");
  sw->add_option("--traces", traces_dir, "directory of traces")->required();
  sw->add_option("--scenarios", scenarios, "comma-separated scenario list")->required();
  sw->add_option("--out", out_path, "results CSV")->required();
  sw->add_option("--config", config_path, "TOML config");
  sw->add_option("--policy", policy, "default policy for heterogeneous scenarios");
  sw->add_option("--jobs", jobs, "worker threads");

  auto* cfg_cmd = app.add_subcommand("config", "print the effective config as TOML");
  cfg_cmd->add_option("--config", config_path, "TOML config to load first");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : bad_input;
  }

  try {
    if (*run) {
      const vbi::SimConfig cfg = config_from(config_path);
      const RunSpec r = parse_label(scenario, policy);
      const vbi::Trace trace = vbi::read_trace(trace_path, format_of(cfg));
      vbi::RunResult result = vbi::run(trace, cfg, r.scenario, r.policy);
      result.meta["trace"] = trace_name(trace_path);
      const std::string json = result.json();
      if (out_path.empty()) {
        std::cout << json;
      } else {
        write_file(out_path, json);
      }
      if (!csv_path.empty()) {
        write_file(csv_path, vbi::Stats::csv_header() + "\n" +
                                 result.stats.csv_row(trace_name(trace_path),
                                                      vbi::scenario_label(r.scenario, r.policy)) +
                                 "\n");
      }
    } else if (*gen) {
      vbi::TraceFormat fmt;
      fmt.mode.vm_mode = vm_mode;
      fmt.vm_id = static_cast<uint8_t>(vm_id);
      vbi::save_trace(out_path, vbi::generate_trace(spec, seed), fmt);
    } else if (*sw) {
      return sweep(traces_dir, scenarios, out_path, config_from(config_path), policy, jobs);
    } else if (*cfg_cmd) {
      std::cout << vbi::dump_config(config_from(config_path));
    }
  } catch (const vbi::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return bad_input;
  } catch (const vbi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return bad_input;
  } catch (const vbi::OutOfMemory& e) {
    std::cerr << "out of memory: " << e.what() << "\n";
    return out_of_memory;
  } catch (const vbi::LifecycleError& e) {
    std::cerr << "lifecycle violation: " << e.what() << "\n";
    return lifecycle;
  } catch (const vbi::CapacityError& e) {
    std::cerr << "capacity exceeded: " << e.what() << "\n";
    return lifecycle;
  } catch (const vbi::EncodingError& e) {
    std::cerr << "encoding error: " << e.what() << "\n";
    return lifecycle;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return failure;
  }
  return ok;
}
