#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vbi/address.hpp"
#include "vbi/lru.hpp"

namespace vbi {

// 16-bit property mask. The low byte holds the named flags; the high byte is
// reserved and rejected by the parser.
class Props {
 public:
  enum Flag : uint16_t {
    code = 1u << 0,
    read_only = 1u << 1,
    kernel = 1u << 2,
    compressible = 1u << 3,
    persistent = 1u << 4,
    latency_sensitive = 1u << 5,
    bandwidth_sensitive = 1u << 6,
    error_tolerant = 1u << 7,
  };
  static constexpr uint16_t kKnownMask = 0x00ff;

  constexpr Props() = default;
  constexpr explicit Props(uint16_t bits) : bits_(bits) {}

  // Accepts a numeric mask ("0x22", "34") or names joined by '|' ("ro|lat"),
  // or "-" for none. Throws ConfigError on unknown names or reserved bits.
  static Props parse(std::string_view text);

  constexpr uint16_t bits() const { return bits_; }
  constexpr bool has(Flag f) const { return (bits_ & f) != 0; }
  std::string to_string() const;

  friend constexpr bool operator==(Props, Props) = default;

 private:
  uint16_t bits_ = 0;
};

enum class StructureKind : uint8_t { direct, single_level, multi_level };

const char* structure_name(StructureKind kind);

struct VitEntry {
  bool enabled = false;
  Props props;
  uint32_t ref_count = 0;
  StructureKind ts_kind = StructureKind::direct;
  // Physical address of the translation root (or direct-mapped base).
  std::optional<uint64_t> ts_root;
};

struct VitCacheStats {
  uint64_t hits = 0;
  uint64_t misses = 0;
};

// Fully associative LRU cache of VIT entries keyed by VBUID. It holds only the
// key: contents are read through to the table, which keeps it coherent.
class VitCache {
 public:
  explicit VitCache(std::size_t entries = 64) : array_(entries, entries) {}

  bool lookup(const Vbuid& vb);
  void invalidate(const Vbuid& vb) { array_.erase(vb.key()); }
  const VitCacheStats& stats() const { return stats_; }

 private:
  LruArray<char> array_;
  VitCacheStats stats_;
};

// Background scrubbing of a disabled VB's cache lines. Jobs drain in FIFO
// order at `lines_per_cycle` of otherwise idle LLC bandwidth.
struct ScrubJob {
  Vbuid vb;
  uint64_t lines_remaining = 0;
};

class ScrubQueue {
 public:
  explicit ScrubQueue(uint64_t lines_per_cycle = 64) : rate_(lines_per_cycle) {}

  void push(const Vbuid& vb, uint64_t lines) { jobs_.push_back({vb, lines}); }
  bool pending(const Vbuid& vb) const;
  bool empty() const { return jobs_.empty(); }

  // Spends `cycles` of scrub bandwidth; returns the jobs that completed.
  std::vector<Vbuid> advance(uint64_t cycles);
  // Cycles needed to finish every job up to and including `vb`'s.
  uint64_t cycles_until_done(const Vbuid& vb) const;
  uint64_t rate() const { return rate_; }

 private:
  uint64_t rate_;
  uint64_t credit_ = 0;
  std::deque<ScrubJob> jobs_;
};

// Per-size-class VB Info Tables. Each table stores entries only up to the
// largest enabled VBID of its class.
class VbRegistry {
 public:
  explicit VbRegistry(AddressingMode mode = {}, uint8_t vm_id = 0,
                      std::size_t vit_cache_entries = 64, uint64_t scrub_rate = 64);

  AddressingMode mode() const { return mode_; }
  uint8_t vm_id() const { return vm_id_; }

  // Lowest disabled VBID in the class whose scrub has completed.
  Vbuid pick_free(unsigned size_id) const;

  void enable_vb(const Vbuid& vb, Props props);
  // Clears the entry and schedules the scrub of `cached_lines` lines. Requires
  // ref_count == 0.
  void disable_vb(const Vbuid& vb, uint64_t cached_lines);

  void acquire(const Vbuid& vb);
  void release(const Vbuid& vb);

  bool enabled(const Vbuid& vb) const;
  const VitEntry* find(const Vbuid& vb) const;
  VitEntry& entry(const Vbuid& vb);  // throws LifecycleError if not enabled
  std::size_t table_length(unsigned size_id) const { return tables_[size_id].size(); }

  // Physical address of a VIT entry inside the metadata region rooted at `base`.
  uint64_t entry_address(const Vbuid& vb, uint64_t base) const;

  VitCache& vit_cache() { return vit_cache_; }
  const VitCache& vit_cache() const { return vit_cache_; }
  ScrubQueue& scrub_queue() { return scrub_; }
  const ScrubQueue& scrub_queue() const { return scrub_; }
  bool scrub_pending(const Vbuid& vb) const { return scrub_.pending(vb); }

  std::vector<Vbuid> enabled_vbs() const;

 private:
  void check_vb(const Vbuid& vb) const;
  void trim(unsigned size_id);

  AddressingMode mode_;
  uint8_t vm_id_;
  std::vector<std::vector<VitEntry>> tables_;
  VitCache vit_cache_;
  ScrubQueue scrub_;
};

}  // namespace vbi
