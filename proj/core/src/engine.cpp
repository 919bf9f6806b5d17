#include "vbi/engine.hpp"

#include <algorithm>
#include <array>

#include "vbi/errors.hpp"
#include "vbi/vbi_machine.hpp"
#include "vbi/x86_machine.hpp"

namespace vbi {

namespace {

struct ScenarioName {
  Scenario scenario;
  const char* name;
};

constexpr std::array<ScenarioName, 11> kScenarios{{
    {Scenario::native, "native"},
    {Scenario::native2m, "native2m"},
    {Scenario::virtual4k, "virtual"},
    {Scenario::virtual2m, "virtual2m"},
    {Scenario::perfect_tlb, "perfect_tlb"},
    {Scenario::vivt, "vivt"},
    {Scenario::vbi1, "vbi1"},
    {Scenario::vbi2, "vbi2"},
    {Scenario::vbifull, "vbifull"},
    {Scenario::het_pcm_dram, "het_pcm_dram"},
    {Scenario::het_tldram, "het_tldram"},
}};

std::string where(const TraceEvent& ev, std::size_t index) {
  std::string s = "event " + std::to_string(index);
  if (ev.line != 0) s += " (line " + std::to_string(ev.line) + ")";
  return s + " " + event_name(ev.kind) + ": ";
}

}  // namespace

const char* scenario_name(Scenario s) {
  for (const auto& e : kScenarios) {
    if (e.scenario == s) return e.name;
  }
  return "?";
}

Scenario parse_scenario(std::string_view name) {
  for (const auto& e : kScenarios) {
    if (name == e.name) return e.scenario;
  }
  throw ConfigError("unknown scenario '" + std::string(name) + "'");
}

const std::vector<Scenario>& all_scenarios() {
  static const std::vector<Scenario> list = [] {
    std::vector<Scenario> v;
    for (const auto& e : kScenarios) v.push_back(e.scenario);
    return v;
  }();
  return list;
}

bool is_hetero(Scenario s) { return s == Scenario::het_pcm_dram || s == Scenario::het_tldram; }

bool is_vbi(Scenario s) {
  return s == Scenario::vbi1 || s == Scenario::vbi2 || s == Scenario::vbifull || is_hetero(s);
}

std::string scenario_label(Scenario s, HetPolicy policy) {
  std::string label = scenario_name(s);
  if (is_hetero(s)) label += std::string(":") + policy_name(policy);
  return label;
}

std::unique_ptr<Machine> make_machine(const SimConfig& cfg, Scenario s, HetPolicy policy) {
  X86Options x;
  VbiOptions v;
  switch (s) {
    case Scenario::native: break;
    case Scenario::native2m: x.mode = X86Mode::native2m; break;
    case Scenario::virtual4k: x.mode = X86Mode::nested4k; break;
    case Scenario::virtual2m: x.mode = X86Mode::nested2m; break;
    case Scenario::perfect_tlb: x.perfect_tlb = true; break;
    case Scenario::vivt: x.vivt = true; break;
    case Scenario::vbi1:
      return std::make_unique<VbiMachine>(cfg, v);
    case Scenario::vbi2:
      v.delayed_allocation = true;
      return std::make_unique<VbiMachine>(cfg, v);
    case Scenario::vbifull:
      v.delayed_allocation = true;
      v.alloc = AllocPolicy::early_reservation;
      return std::make_unique<VbiMachine>(cfg, v);
    case Scenario::het_pcm_dram:
    case Scenario::het_tldram:
      v.hetero = s == Scenario::het_pcm_dram ? HeteroKind::pcm_dram : HeteroKind::tl_dram;
      v.policy = policy;
      return std::make_unique<VbiMachine>(cfg, v);
  }
  return std::make_unique<X86Machine>(cfg, x);
}

CoreModel::CoreModel(Machine& machine, const CoreConfig& cfg)
    : machine_(machine), width_(cfg.issue_width), limit_(cfg.max_outstanding) {
  if (width_ == 0 || limit_ == 0) throw ConfigError("core issue_width and max_outstanding must be positive");
}

void CoreModel::wait_until(uint64_t cycle) { ticks_ = std::max(ticks_, cycle * width_); }

void CoreModel::retire_completed() {
  while (head_ < window_.size() && window_[head_] * width_ <= ticks_) ++head_;
  if (head_ == window_.size()) {
    window_.clear();
    head_ = 0;
  }
}

void CoreModel::drain() {
  for (std::size_t i = head_; i < window_.size(); ++i) wait_until(window_[i]);
  window_.clear();
  head_ = 0;
}

void CoreModel::step(const TraceEvent& ev) {
  ticks_ += ev.icount;
  instructions_ += ev.icount;
  const uint64_t t = now();
  if (t > advanced_to_) {
    machine_.advance(t - advanced_to_);
    advanced_to_ = t;
  }
  if (ev.kind == EventKind::instr) return;

  if (ev.kind != EventKind::mem) {
    drain();
    wait_until(machine_.lifecycle(ev, now()));
    return;
  }

  retire_completed();
  if (window_.size() - head_ >= limit_) {
    // Retirement blocks on the oldest access.
    wait_until(window_[head_]);
    retire_completed();
  }
  const AccessResult r = machine_.access(ev, now());
  ticks_ += 1;
  ++instructions_;
  if (r.faulted) return;
  if (r.serialize) {
    drain();
    wait_until(r.done);
    return;
  }
  window_.push_back(r.done);
}

void CoreModel::finish() {
  drain();
  machine_.finish(now());
}

Replay replay(Machine& machine, const Trace& trace, const CoreConfig& cfg) {
  CoreModel core(machine, cfg);
  Replay out;
  std::size_t index = 0;
  try {
    for (; index < trace.events.size(); ++index) {
      const TraceEvent& ev = trace.events[index];
      if (ev.kind == EventKind::mem) {
        ++out.mem_events;
      } else if (ev.kind != EventKind::instr) {
        ++out.lifecycle_events;
      }
      core.step(ev);
    }
    core.finish();
  } catch (const Error& e) {
    if (index >= trace.events.size()) throw;
    const std::string msg = where(trace.events[index], index) + e.what();
    if (dynamic_cast<const OutOfMemory*>(&e)) throw OutOfMemory(msg);
    if (dynamic_cast<const CapacityError*>(&e)) throw CapacityError(msg);
    if (dynamic_cast<const LifecycleError*>(&e) || dynamic_cast<const EncodingError*>(&e)) {
      throw LifecycleError(msg);
    }
    throw;
  }
  out.cycles = core.cycles();
  out.instructions = core.instructions();
  return out;
}

RunResult run(const Trace& trace, const SimConfig& cfg, Scenario s, HetPolicy policy) {
  cfg.validate();
  auto machine = make_machine(cfg, s, policy);
  if (is_hetero(s) && policy == HetPolicy::ideal) {
    // Oracle placement needs the whole-run access profile first.
    auto profiler = make_machine(cfg, s, HetPolicy::unaware);
    replay(*profiler, trace, cfg.core);
    static_cast<VbiMachine&>(*machine).set_profile(static_cast<VbiMachine&>(*profiler).profile());
  }
  const Replay r = replay(*machine, trace, cfg.core);

  RunResult result;
  machine->report(result.stats);
  result.stats.set("cycles", r.cycles);
  result.stats.set("instructions", r.instructions);
  result.stats.set("events.mem", r.mem_events);
  result.stats.set("events.lifecycle", r.lifecycle_events);
  result.meta["scenario"] = scenario_name(s);
  if (is_hetero(s)) result.meta["policy"] = policy_name(policy);
  result.meta["seed"] = std::to_string(cfg.seed);
  result.meta["events"] = std::to_string(trace.events.size());
  return result;
}

}  // namespace vbi
