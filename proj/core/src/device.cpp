#include "vbi/device.hpp"

#include <algorithm>
#include <map>

#include "vbi/errors.hpp"

namespace vbi {

const char* device_name(DeviceKind kind) {
  switch (kind) {
    case DeviceKind::dram: return "dram";
    case DeviceKind::pcm: return "pcm";
    case DeviceKind::tl_fast: return "tl_fast";
    case DeviceKind::tl_slow: return "tl_slow";
  }
  return "?";
}

DeviceTiming default_timing(DeviceKind kind) {
  DeviceTiming t;
  switch (kind) {
    case DeviceKind::dram:
    case DeviceKind::tl_slow:
      break;
    case DeviceKind::pcm:
      t.tRCD = 22;
      t.tRP = 60;
      t.tRRDact = 2;
      t.tRRDpre = 11;
      break;
    case DeviceKind::tl_fast:
      t.tRCD = 3;
      t.tRP = 3;
      break;
  }
  return t;
}

MemoryDevice::MemoryDevice(DeviceKind kind, const DeviceTiming& timing, bool record_commands)
    : kind_(kind), timing_(timing), record_(record_commands), banks_(timing.banks) {
  if (timing.banks == 0 || timing.row_bytes == 0) throw ConfigError("device needs banks and rows");
  stats_.bank_accesses.assign(timing.banks, 0);
  stats_.bank_row_hits.assign(timing.banks, 0);
}

void MemoryDevice::emit(uint64_t cycle, CommandKind kind, unsigned bank, uint64_t row) {
  if (record_) commands_.push_back({cycle, kind, bank, row});
}

uint64_t MemoryDevice::service(uint64_t addr, bool write, uint64_t now) {
  const unsigned b = bank_of(addr);
  const uint64_t row = row_of(addr);
  Bank& bank = banks_[b];
  uint64_t t = std::max(now, bank.ready);

  if (bank.open_row == row) {
    ++stats_.row_hits;
    ++stats_.bank_row_hits[b];
  } else {
    if (bank.open_row) {
      ++stats_.row_conflicts;
      uint64_t pre = t;
      if (last_pre_) pre = std::max(pre, *last_pre_ + timing_.tRRDpre);
      emit(pre, CommandKind::pre, b, *bank.open_row);
      last_pre_ = pre;
      t = pre + timing_.tRP;
    } else {
      ++stats_.row_empty;
    }
    uint64_t act = t;
    if (last_act_) act = std::max(act, *last_act_ + timing_.tRRDact);
    emit(act, CommandKind::act, b, row);
    last_act_ = act;
    bank.open_row = row;
    t = act + timing_.tRCD;
  }

  emit(t, write ? CommandKind::wr : CommandKind::rd, b, row);
  bank.ready = t + timing_.tBL;
  const uint64_t done = t + timing_.tCL + timing_.tBL;
  write ? ++stats_.writes : ++stats_.reads;
  ++stats_.bank_accesses[b];
  stats_.latency_sum += done - now;
  return done;
}

std::vector<TimingViolation> audit_commands(std::vector<Command> commands, const DeviceTiming& timing) {
  std::stable_sort(commands.begin(), commands.end(),
                   [](const Command& a, const Command& b) { return a.cycle < b.cycle; });
  struct BankState {
    bool open = false;
    uint64_t row = 0;
    std::optional<uint64_t> act;
    std::optional<uint64_t> pre;
  };
  std::map<unsigned, BankState> banks;
  std::optional<uint64_t> last_act;
  std::optional<uint64_t> last_pre;
  std::vector<TimingViolation> out;
  auto flag = [&](std::size_t i, std::string rule) { out.push_back({i, std::move(rule)}); };

  for (std::size_t i = 0; i < commands.size(); ++i) {
    const Command& c = commands[i];
    BankState& s = banks[c.bank];
    switch (c.kind) {
      case CommandKind::act:
        if (s.open) flag(i, "ACT to open bank");
        if (s.pre && c.cycle < *s.pre + timing.tRP) flag(i, "tRP");
        if (last_act && c.cycle < *last_act + timing.tRRDact) flag(i, "tRRDact");
        s.open = true;
        s.row = c.row;
        s.act = c.cycle;
        last_act = c.cycle;
        break;
      case CommandKind::pre:
        if (!s.open) flag(i, "PRE to closed bank");
        if (last_pre && c.cycle < *last_pre + timing.tRRDpre) flag(i, "tRRDpre");
        s.open = false;
        s.pre = c.cycle;
        last_pre = c.cycle;
        break;
      case CommandKind::rd:
      case CommandKind::wr:
        if (!s.open || s.row != c.row) flag(i, "column access to closed row");
        if (s.act && c.cycle < *s.act + timing.tRCD) flag(i, "tRCD");
        break;
    }
  }
  return out;
}

MemorySystem::MemorySystem(std::vector<MemoryDevice> devices, std::vector<MemoryRegion> regions,
                           unsigned home, unsigned cpu_cycles_per_mem_cycle)
    : devices_(std::move(devices)), regions_(std::move(regions)), home_(home), ratio_(cpu_cycles_per_mem_cycle) {
  if (devices_.empty() || home_ >= devices_.size()) throw ConfigError("memory system needs a home device");
  if (ratio_ == 0) throw ConfigError("cpu_cycles_per_mem_cycle must be positive");
  for (const MemoryRegion& r : regions_) {
    if (r.device >= devices_.size()) throw ConfigError("region names a missing device");
  }
}

unsigned MemorySystem::device_of(uint64_t addr) const {
  for (const MemoryRegion& r : regions_) {
    if (addr >= r.base && addr - r.base < r.bytes) return r.device;
  }
  return home_;
}

uint64_t MemorySystem::access(uint64_t addr, bool write, uint64_t now) {
  MemoryDevice& d = devices_[device_of(addr)];
  const uint64_t mem_now = (now + ratio_ - 1) / ratio_;
  return d.service(addr, write, mem_now) * ratio_;
}

}  // namespace vbi
