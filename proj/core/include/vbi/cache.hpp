#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "vbi/lru.hpp"

namespace vbi {

struct CacheLevelConfig {
  uint64_t size_bytes = 0;
  unsigned ways = 0;
  unsigned latency = 0;
};

struct CacheConfig {
  std::array<CacheLevelConfig, 3> levels{{{32 * 1024, 8, 4}, {256 * 1024, 8, 8}, {8 * 1024 * 1024, 16, 31}}};
};

struct LineMeta {
  bool dirty = false;
  bool zero_filled = false;
  uint64_t owner = 0;      // VB key, or address-space id in the baselines
  uint64_t vb_offset = 0;  // line-aligned offset inside the owning VB
  std::optional<uint64_t> phys;
};

struct Eviction {
  uint64_t line = 0;  // line address (byte address >> 6)
  LineMeta meta;
};

struct CacheLevelStats {
  uint64_t hits = 0;
  uint64_t misses = 0;
};

struct CacheStats {
  std::array<CacheLevelStats, 3> level;
  uint64_t dirty_writebacks = 0;
  uint64_t clean_drops = 0;
  uint64_t invalidations = 0;
};

// Three-level, non-inclusive, write-back hierarchy with LRU in every level.
// Lines are keyed by line address; the address space (VBI, virtual, physical)
// is up to the caller.
class CacheHierarchy {
 public:
  explicit CacheHierarchy(const CacheConfig& cfg = {});

  // Looks the line up level by level. Returns the hitting level (0..2) and
  // copies the line into the levels above it; nullopt on an LLC miss. Writes
  // dirty the L1 copy.
  std::optional<unsigned> probe(uint64_t line, bool write, std::vector<Eviction>& writebacks);
  // Installs a missed line in every level. Dirty L3 victims are appended to
  // `writebacks`.
  void fill(uint64_t line, LineMeta meta, bool write, std::vector<Eviction>& writebacks);

  // Latency of a hit at `level`, or of a full miss when level == 3.
  unsigned lookup_latency(unsigned level) const;

  bool contains(uint64_t line) const;
  const LineMeta* find(uint64_t line) const;  // topmost copy
  // Distinct lines held for `owner` anywhere in the hierarchy.
  uint64_t count_owner(uint64_t owner) const;
  uint64_t count_dirty_owner(uint64_t owner) const;
  // Removes every copy of the owner's lines. Returns the distinct dirty lines
  // (if `collect_dirty`) so the caller can write them back.
  std::vector<Eviction> invalidate_owner(uint64_t owner, bool collect_dirty);
  // Every distinct dirty line in the hierarchy, removed.
  std::vector<Eviction> drain_dirty();

  const CacheStats& stats() const { return stats_; }
  const CacheConfig& config() const { return cfg_; }

 private:
  void insert_into(unsigned level, uint64_t line, const LineMeta& meta, std::vector<Eviction>& writebacks);
  void write_down(unsigned level, uint64_t line, const LineMeta& meta, std::vector<Eviction>& writebacks);
  std::vector<Eviction> remove_matching(uint64_t owner, bool all, bool collect_dirty);

  CacheConfig cfg_;
  std::array<LruArray<LineMeta>, 3> levels_;
  CacheStats stats_;
};

}  // namespace vbi
