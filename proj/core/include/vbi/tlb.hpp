#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "vbi/lru.hpp"

namespace vbi {

struct TlbStats {
  uint64_t hits = 0;
  uint64_t misses = 0;
};

// One TLB structure. Entries remember the owning VB (or address space) so a
// whole owner can be shot down at once.
class Tlb {
 public:
  Tlb(std::size_t entries, std::size_t ways) : array_(entries, ways) {}

  std::optional<uint64_t> lookup(uint64_t key);
  void insert(uint64_t key, uint64_t frame, uint64_t owner) { array_.insert(key, {frame, owner}); }
  void invalidate(uint64_t key) { array_.erase(key); }
  std::size_t invalidate_owner(uint64_t owner);
  std::size_t occupancy() const { return array_.size(); }
  std::size_t capacity() const { return array_.capacity(); }
  const TlbStats& stats() const { return stats_; }

 private:
  struct Entry {
    uint64_t frame = 0;
    uint64_t owner = 0;
  };
  LruArray<Entry> array_;
  TlbStats stats_;
};

struct TlbConfig {
  std::size_t l1_4k_entries = 64;
  std::size_t l1_2m_entries = 32;
  std::size_t l2_entries = 512;
  std::size_t l2_ways = 4;
  std::size_t vb_direct_entries = 32;
  std::size_t pwc_entries = 32;
  unsigned l2_latency = 7;
};

// Fully associative cache of non-leaf walk entries, keyed by entry tag.
class PageWalkCache {
 public:
  explicit PageWalkCache(std::size_t entries = 32) : array_(entries, entries) {}

  bool probe(uint64_t tag) const { return array_.peek(tag) != nullptr; }
  void touch(uint64_t tag) { array_.find(tag); }
  void insert(uint64_t tag, uint64_t owner) { array_.insert(tag, owner); }
  std::size_t invalidate_owner(uint64_t owner) {
    return array_.erase_if([&](uint64_t, uint64_t o) { return o == owner; });
  }
  void record(bool hit) { hit ? ++stats_.hits : ++stats_.misses; }
  const TlbStats& stats() const { return stats_; }

 private:
  LruArray<uint64_t> array_;
  TlbStats stats_;
};

inline std::optional<uint64_t> Tlb::lookup(uint64_t key) {
  if (const Entry* e = array_.find(key)) {
    ++stats_.hits;
    return e->frame;
  }
  ++stats_.misses;
  return std::nullopt;
}

inline std::size_t Tlb::invalidate_owner(uint64_t owner) {
  return array_.erase_if([&](uint64_t, const Entry& e) { return e.owner == owner; });
}

}  // namespace vbi
