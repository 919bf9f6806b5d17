#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

namespace vbi {

// Bump allocator for translation metadata (page-table nodes, VIT windows).
// Lives above the allocatable frame pool; never reclaimed.
class MetadataArena {
 public:
  explicit MetadataArena(uint64_t base = 0) : base_(base), next_(base) {}

  uint64_t alloc(uint64_t bytes);
  uint64_t base() const { return base_; }
  uint64_t used() const { return next_ - base_; }

 private:
  uint64_t base_;
  uint64_t next_;
};

// Node topology of a radix translation table over `index_bits` of page index.
// Levels are numbered from the leaf (0) up; all levels but the top resolve 9
// bits, the top resolves the remainder. Leaf payloads are kept by the owner;
// this class answers which table entries a walk reads.
class RadixTable {
 public:
  static constexpr unsigned kFanoutBits = 9;

  RadixTable(unsigned index_bits, unsigned levels, MetadataArena& arena);

  // Levels needed to resolve `index_bits` with 9-bit fanout.
  static unsigned levels_for(unsigned index_bits) {
    return index_bits == 0 ? 1 : (index_bits + kFanoutBits - 1) / kFanoutBits;
  }

  unsigned levels() const { return levels_; }
  unsigned index_bits() const { return index_bits_; }
  unsigned level_bits(unsigned level) const;

  // Creates every node on the path to `page`.
  void ensure_path(uint64_t page);
  bool has_root() const { return nodes_.count(node_key(levels_ - 1, 0)) != 0; }
  std::optional<uint64_t> root_address() const;
  std::size_t node_count() const { return nodes_.size(); }

  // Physical address of the entry consulted at `level` for `page`, or nullopt
  // if that node does not exist.
  std::optional<uint64_t> entry_address(unsigned level, uint64_t page) const;

  // Identifies the entry read at `level` (used as a page-walk-cache tag).
  uint64_t entry_tag(unsigned level, uint64_t page) const { return page >> (kFanoutBits * level); }

  // Entries read by a walk starting at `start_level`, stopping at a missing node.
  std::vector<uint64_t> walk(uint64_t page, unsigned start_level) const;

 private:
  uint64_t node_prefix(unsigned level, uint64_t page) const;
  static uint64_t node_key(unsigned level, uint64_t prefix) { return (prefix << 4) | level; }

  unsigned index_bits_;
  unsigned levels_;
  MetadataArena* arena_;
  std::unordered_map<uint64_t, uint64_t> nodes_;
};

}  // namespace vbi
