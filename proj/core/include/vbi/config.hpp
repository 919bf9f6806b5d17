#pragma once

#include <cstdint>
#include <string>

#include "vbi/cache.hpp"
#include "vbi/device.hpp"
#include "vbi/tlb.hpp"

namespace vbi {

struct CoreConfig {
  unsigned issue_width = 4;      // non-memory CPI = 1 / issue_width
  unsigned max_outstanding = 8;  // memory operations in flight
};

struct ProtectionConfig {
  unsigned cvt_cache_slots = 64;
  unsigned max_entries = 4096;
  unsigned cvt_miss_cycles = 8;
};

struct RegistryConfig {
  unsigned vit_cache_entries = 64;
  uint64_t scrub_lines_per_cycle = 64;
};

struct MemoryConfig {
  uint64_t pool_bytes = uint64_t{2} << 30;
  unsigned cpu_cycles_per_mem_cycle = 4;
  uint64_t page_fault_cycles = 2000;
  uint64_t swap_cycles = 5000;
  unsigned mtl_tlb_hit_cycles = 1;
  bool drain_at_end = true;
  bool record_commands = false;
};

struct HeteroConfig {
  double pcm_dram_fast_fraction = 0.25;
  double tldram_fast_fraction = 0.125;
  uint64_t epoch_cycles = 10'000'000;
};

struct SimConfig {
  uint64_t seed = 1;
  bool vm_mode = false;
  unsigned vm_id = 0;
  CoreConfig core;
  CacheConfig cache;
  TlbConfig tlb;
  ProtectionConfig protection;
  RegistryConfig registry;
  MemoryConfig memory;
  DeviceTiming dram = default_timing(DeviceKind::dram);
  DeviceTiming pcm = default_timing(DeviceKind::pcm);
  DeviceTiming tl_fast = default_timing(DeviceKind::tl_fast);
  DeviceTiming tl_slow = default_timing(DeviceKind::tl_slow);
  HeteroConfig hetero;

  // Throws ConfigError on inconsistent knobs.
  void validate() const;
};

// TOML text to config; unknown sections or keys are errors.
SimConfig parse_config(const std::string& text, const std::string& source = "config");
SimConfig load_config(const std::string& path);
// The full config, every knob spelled out, as TOML.
std::string dump_config(const SimConfig& cfg);

}  // namespace vbi
