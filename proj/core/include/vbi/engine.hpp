#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "vbi/config.hpp"
#include "vbi/hotness.hpp"
#include "vbi/machine.hpp"
#include "vbi/stats.hpp"
#include "vbi/trace.hpp"

namespace vbi {

enum class Scenario : uint8_t {
  native,
  native2m,
  virtual4k,
  virtual2m,
  perfect_tlb,
  vivt,
  vbi1,
  vbi2,
  vbifull,
  het_pcm_dram,
  het_tldram,
};

const char* scenario_name(Scenario s);
Scenario parse_scenario(std::string_view name);  // throws ConfigError
const std::vector<Scenario>& all_scenarios();
bool is_hetero(Scenario s);
bool is_vbi(Scenario s);

// Scenario name plus policy for heterogeneous runs, e.g. "het_tldram:aware".
std::string scenario_label(Scenario s, HetPolicy policy);

std::unique_ptr<Machine> make_machine(const SimConfig& cfg, Scenario s, HetPolicy policy = HetPolicy::aware);

// Limited-MLP, in-order-retirement core. Time advances in issue slots of
// 1/issue_width cycle; at most max_outstanding memory operations are in flight.
class CoreModel {
 public:
  CoreModel(Machine& machine, const CoreConfig& cfg);

  void step(const TraceEvent& ev);
  // Waits for every outstanding operation and lets the machine drain.
  void finish();

  uint64_t cycles() const { return (ticks_ + width_ - 1) / width_; }
  uint64_t instructions() const { return instructions_; }
  uint64_t now() const { return cycles(); }

 private:
  void retire_completed();
  void drain();
  void wait_until(uint64_t cycle);

  Machine& machine_;
  uint64_t width_;
  std::size_t limit_;
  uint64_t ticks_ = 0;
  uint64_t instructions_ = 0;
  uint64_t advanced_to_ = 0;
  std::vector<uint64_t> window_;  // completion cycles, oldest first
  std::size_t head_ = 0;
};

struct Replay {
  uint64_t cycles = 0;
  uint64_t instructions = 0;
  uint64_t mem_events = 0;
  uint64_t lifecycle_events = 0;
};

// Drives `machine` with every event of `trace` and finishes it.
Replay replay(Machine& machine, const Trace& trace, const CoreConfig& cfg);

struct RunResult {
  Stats stats;
  std::map<std::string, std::string> meta;

  std::string json() const { return stats.to_json(meta); }
};

// Replays `trace` through one scenario. Lifecycle and capacity errors are
// rethrown naming the offending event.
RunResult run(const Trace& trace, const SimConfig& cfg, Scenario s, HetPolicy policy = HetPolicy::aware);

}  // namespace vbi
