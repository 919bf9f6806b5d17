#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "vbi/config.hpp"
#include "vbi/device.hpp"
#include "vbi/protection.hpp"
#include "vbi/registry.hpp"
#include "vbi/stats.hpp"
#include "vbi/trace.hpp"

namespace vbi {

struct AccessResult {
  uint64_t done = 0;       // cycle the access completes
  bool serialize = false;  // the access trapped (page fault); nothing overlaps it
  bool faulted = false;    // protection fault, no memory operation issued
};

// Per-device and total access counters; with `audit`, the timing violations
// found in each device's recorded command stream.
void report_memory(const MemorySystem& mem, bool audit, Stats& s);

// One data access as the core issued it, after protection resolved the name.
struct DataAccess {
  Vbuid vb;
  uint64_t offset = 0;
  bool write = false;
  friend bool operator==(const DataAccess&, const DataAccess&) = default;
};

// A memory system behind the core model. Times are CPU cycles.
class Machine {
 public:
  explicit Machine(const SimConfig& cfg);
  virtual ~Machine() = default;

  virtual AccessResult access(const TraceEvent& ev, uint64_t now) = 0;
  // Applies a lifecycle record; returns the cycle the core may resume.
  virtual uint64_t lifecycle(const TraceEvent& ev, uint64_t now) = 0;
  // Idle time passed; background work (cache scrubbing) proceeds.
  virtual void advance(uint64_t cycles);
  virtual void finish(uint64_t now) = 0;
  virtual void report(Stats& s) const;

  // Records every permitted access into `log` (nullptr stops recording).
  void set_access_log(std::vector<DataAccess>* log) { log_ = log; }

  VbRegistry& registry() { return registry_; }
  Protection& protection() { return protection_; }

 protected:
  // Name-level handling shared by every machine. Returns the VB touched.
  Vbuid request_vb(const TraceEvent& ev);
  void check_disable(const Vbuid& vb) const;
  // Name-level preconditions of CLONE (vb -> vb2) and PROMOTE (vb -> vb2).
  void check_clone(const TraceEvent& ev) const;
  void check_promote(const TraceEvent& ev) const;

  void log_access(const Vbuid& vb, uint64_t offset, bool write) {
    if (log_ != nullptr) log_->push_back({vb, offset, write});
  }

  SimConfig cfg_;
  VbRegistry registry_;
  Protection protection_;
  Stats counters_;
  std::vector<DataAccess>* log_ = nullptr;
};

}  // namespace vbi
