#include "vbi/radix_table.hpp"

#include "vbi/errors.hpp"

namespace vbi {

uint64_t MetadataArena::alloc(uint64_t bytes) {
  constexpr uint64_t kAlign = 4096;
  const uint64_t addr = next_;
  next_ += (bytes + kAlign - 1) / kAlign * kAlign;
  return addr;
}

RadixTable::RadixTable(unsigned index_bits, unsigned levels, MetadataArena& arena)
    : index_bits_(index_bits), levels_(levels), arena_(&arena) {
  if (levels == 0 || levels > 8) throw ConfigError("radix table needs 1..8 levels");
  if (index_bits > kFanoutBits * (levels - 1) + 40) throw ConfigError("radix top level too wide");
}

unsigned RadixTable::level_bits(unsigned level) const {
  if (level + 1 < levels_) return kFanoutBits;
  const unsigned below = kFanoutBits * (levels_ - 1);
  return index_bits_ > below ? index_bits_ - below : 0;
}

uint64_t RadixTable::node_prefix(unsigned level, uint64_t page) const {
  if (level + 1 >= levels_) return 0;
  return page >> (kFanoutBits * (level + 1));
}

void RadixTable::ensure_path(uint64_t page) {
  for (unsigned l = levels_; l-- > 0;) {
    const uint64_t key = node_key(l, node_prefix(l, page));
    if (nodes_.count(key) == 0) {
      const uint64_t entries = uint64_t{1} << level_bits(l);
      nodes_.emplace(key, arena_->alloc(entries * 8));
    }
  }
}

std::optional<uint64_t> RadixTable::root_address() const {
  auto it = nodes_.find(node_key(levels_ - 1, 0));
  if (it == nodes_.end()) return std::nullopt;
  return it->second;
}

std::optional<uint64_t> RadixTable::entry_address(unsigned level, uint64_t page) const {
  auto it = nodes_.find(node_key(level, node_prefix(level, page)));
  if (it == nodes_.end()) return std::nullopt;
  const uint64_t mask = (uint64_t{1} << level_bits(level)) - 1;
  const uint64_t index = (page >> (kFanoutBits * level)) & mask;
  return it->second + index * 8;
}

std::vector<uint64_t> RadixTable::walk(uint64_t page, unsigned start_level) const {
  std::vector<uint64_t> reads;
  for (unsigned l = start_level + 1; l-- > 0;) {
    auto addr = entry_address(l, page);
    if (!addr) break;
    reads.push_back(*addr);
  }
  return reads;
}

}  // namespace vbi
