#pragma once

#include <map>
#include <optional>
#include <vector>

#include "vbi/cache.hpp"
#include "vbi/device.hpp"
#include "vbi/hotness.hpp"
#include "vbi/machine.hpp"
#include "vbi/physical_memory.hpp"
#include "vbi/translation.hpp"

namespace vbi {

enum class HeteroKind : uint8_t { none, pcm_dram, tl_dram };

struct VbiOptions {
  bool delayed_allocation = false;
  AllocPolicy alloc = AllocPolicy::on_demand;
  HeteroKind hetero = HeteroKind::none;
  HetPolicy policy = HetPolicy::aware;
};

// Per-unit profile gathered by one run, the input of oracle placement.
struct UnitProfile {
  std::map<UnitId, uint64_t> counts;
  std::map<UnitId, uint64_t> pages;
};

// VBI pipeline: protection and address formation at the core, VBI-addressed
// caches, and translation plus allocation at the memory controller on LLC
// misses and dirty writebacks.
class VbiMachine : public Machine {
 public:
  VbiMachine(const SimConfig& cfg, const VbiOptions& opts);

  AccessResult access(const TraceEvent& ev, uint64_t now) override;
  uint64_t lifecycle(const TraceEvent& ev, uint64_t now) override;
  void finish(uint64_t now) override;
  void report(Stats& s) const override;

  // Oracle placement input from an earlier run of the same trace.
  void set_profile(const UnitProfile& profile);
  UnitProfile profile() const;

  PhysicalMemory& memory() { return phys_; }
  CacheHierarchy& caches() { return caches_; }
  VbiTranslator& translator() { return translator_; }
  MemorySystem& devices() { return mem_; }
  const std::optional<HotnessTracker>& hotness() const { return hot_; }

  // Writes back and drops every cached line of `vb`; returns the lines written.
  uint64_t flush_vb(const Vbuid& vb, uint64_t now);

 private:
  struct MissPath {
    VbiTranslation tr;
    uint64_t done = 0;
  };

  MissPath translate(const Vbuid& vb, uint64_t offset, uint64_t start);
  AllocResult allocate(const Vbuid& vb, uint64_t page, AllocReason reason);
  void after_alloc(const Vbuid& vb, uint64_t page, const AllocResult& r);
  uint64_t line_address(uint64_t frame, uint64_t offset) const {
    return (frame << kPageBits) | (offset & (kPageSize - 1) & ~(kLineSize - 1));
  }
  void writeback(const Eviction& ev, uint64_t now);
  void writebacks(const std::vector<Eviction>& evs, uint64_t now);
  void run_epoch(uint64_t now);
  uint64_t demand_read(uint64_t addr, uint64_t at);

  VbiOptions opts_;
  PhysicalMemory phys_;
  VbiTranslator translator_;
  CacheHierarchy caches_;
  MemorySystem mem_;
  std::optional<HotnessTracker> hot_;
  std::map<UnitId, uint64_t> unit_pages_;
  uint64_t demand_latency_ = 0;
  uint64_t demand_reads_ = 0;
};

}  // namespace vbi
