#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace vbi {

enum class DeviceKind : uint8_t { dram, pcm, tl_fast, tl_slow };

const char* device_name(DeviceKind kind);

// All timings in memory-controller cycles.
struct DeviceTiming {
  unsigned tRCD = 5;
  unsigned tRP = 5;
  unsigned tRRDact = 3;
  unsigned tRRDpre = 3;
  unsigned tCL = 5;
  unsigned tBL = 4;
  unsigned banks = 8;
  uint64_t row_bytes = 8192;
};

DeviceTiming default_timing(DeviceKind kind);

enum class CommandKind : uint8_t { act, pre, rd, wr };

struct Command {
  uint64_t cycle = 0;
  CommandKind kind = CommandKind::act;
  unsigned bank = 0;
  uint64_t row = 0;
};

struct DeviceStats {
  uint64_t reads = 0;
  uint64_t writes = 0;
  uint64_t row_hits = 0;
  uint64_t row_empty = 0;
  uint64_t row_conflicts = 0;
  uint64_t latency_sum = 0;  // memory cycles from arrival to data
  std::vector<uint64_t> bank_accesses;
  std::vector<uint64_t> bank_row_hits;

  uint64_t accesses() const { return reads + writes; }
};

// One channel, one rank, open-page banks served first-come first-served.
// Rows are interleaved across banks.
class MemoryDevice {
 public:
  MemoryDevice(DeviceKind kind, const DeviceTiming& timing, bool record_commands = false);

  DeviceKind kind() const { return kind_; }
  const DeviceTiming& timing() const { return timing_; }

  // Serves one line access arriving at `now`; returns the data-ready cycle.
  uint64_t service(uint64_t addr, bool write, uint64_t now);

  unsigned bank_of(uint64_t addr) const { return (addr / timing_.row_bytes) % timing_.banks; }
  uint64_t row_of(uint64_t addr) const { return addr / (timing_.row_bytes * timing_.banks); }

  const DeviceStats& stats() const { return stats_; }
  const std::vector<Command>& commands() const { return commands_; }

 private:
  struct Bank {
    std::optional<uint64_t> open_row;
    uint64_t ready = 0;  // earliest cycle for the next command to this bank
  };

  void emit(uint64_t cycle, CommandKind kind, unsigned bank, uint64_t row);

  DeviceKind kind_;
  DeviceTiming timing_;
  bool record_;
  std::vector<Bank> banks_;
  std::optional<uint64_t> last_act_;
  std::optional<uint64_t> last_pre_;
  DeviceStats stats_;
  std::vector<Command> commands_;
};

struct TimingViolation {
  std::size_t index = 0;  // position in the cycle-sorted stream
  std::string rule;
};

// Checks a command stream against tRCD, tRP, tRRDact and tRRDpre, and for
// column or precharge commands issued to a bank without an open row.
std::vector<TimingViolation> audit_commands(std::vector<Command> commands, const DeviceTiming& timing);

struct MemoryRegion {
  uint64_t base = 0;  // bytes
  uint64_t bytes = 0;
  unsigned device = 0;
};

// Physical address space split over devices. Addresses above every region
// (translation metadata) go to the home device.
class MemorySystem {
 public:
  MemorySystem(std::vector<MemoryDevice> devices, std::vector<MemoryRegion> regions, unsigned home,
               unsigned cpu_cycles_per_mem_cycle);

  unsigned device_of(uint64_t addr) const;
  // `now` and the result are CPU cycles.
  uint64_t access(uint64_t addr, bool write, uint64_t now);

  std::size_t device_count() const { return devices_.size(); }
  const MemoryDevice& device(unsigned i) const { return devices_.at(i); }
  const std::vector<MemoryRegion>& regions() const { return regions_; }
  unsigned cpu_per_mem() const { return ratio_; }

 private:
  std::vector<MemoryDevice> devices_;
  std::vector<MemoryRegion> regions_;
  unsigned home_;
  unsigned ratio_;
};

}  // namespace vbi
