#include "vbi/frame_pool.hpp"

#include <algorithm>

#include "vbi/errors.hpp"

namespace vbi {

FramePool::FramePool(uint64_t total_frames) : total_(total_frames) {
  if (total_frames == 0) throw ConfigError("frame pool needs at least one frame");
  uint64_t start = 0;
  while (start < total_) {
    unsigned order = 0;
    while (order < kMaxOrder) {
      const uint64_t next = uint64_t{1} << (order + 1);
      if (start % next != 0 || start + next > total_) break;
      ++order;
    }
    insert_raw(start, order, kUnreserved);
    max_order_ = std::max(max_order_, order);
    start += uint64_t{1} << order;
  }
}

uint64_t FramePool::free_frames_tagged(uint64_t tag) const {
  auto it = by_tag_.find(tag);
  if (it == by_tag_.end()) return 0;
  uint64_t n = 0;
  for (unsigned o = 0; o <= kMaxOrder; ++o) n += it->second[o].size() << o;
  return n;
}

void FramePool::insert_raw(uint64_t start, unsigned order, uint64_t tag) {
  free_.emplace(start, FreeInfo{order, tag});
  by_tag_[tag][order].insert(start);
  free_frames_ += uint64_t{1} << order;
}

void FramePool::remove_free(uint64_t start) {
  auto it = free_.find(start);
  const FreeInfo info = it->second;
  auto tag_it = by_tag_.find(info.tag);
  tag_it->second[info.order].erase(start);
  free_.erase(it);
  free_frames_ -= uint64_t{1} << info.order;
  bool empty = true;
  for (const auto& list : tag_it->second) empty = empty && list.empty();
  if (empty) by_tag_.erase(tag_it);
}

void FramePool::insert_coalesce(uint64_t start, unsigned order, uint64_t tag) {
  while (order < kMaxOrder) {
    const uint64_t size = uint64_t{1} << order;
    const uint64_t buddy = start ^ size;
    if (buddy + size > total_) break;
    auto it = free_.find(buddy);
    if (it == free_.end() || it->second.order != order || it->second.tag != tag) break;
    remove_free(buddy);
    start = std::min(start, buddy);
    ++order;
  }
  insert_raw(start, order, tag);
}

uint64_t FramePool::take_and_split(uint64_t start, unsigned target_order, uint64_t owner) {
  const FreeInfo info = free_.at(start);
  remove_free(start);
  unsigned order = info.order;
  while (order > target_order) {
    --order;
    insert_raw(start + (uint64_t{1} << order), order, info.tag);
  }
  allocated_.emplace(start, AllocInfo{target_order, owner});
  return start;
}

std::optional<uint64_t> FramePool::alloc_tagged(uint64_t tag, unsigned order, uint64_t owner) {
  auto it = by_tag_.find(tag);
  if (it == by_tag_.end() || order > kMaxOrder) return std::nullopt;
  for (unsigned o = order; o <= kMaxOrder; ++o) {
    const auto& list = it->second[o];
    if (!list.empty()) return take_and_split(*list.begin(), order, owner);
  }
  return std::nullopt;
}

std::optional<uint64_t> FramePool::alloc(unsigned order, uint64_t owner) {
  return alloc_tagged(kUnreserved, order, owner);
}

std::optional<uint64_t> FramePool::alloc_reserved(uint64_t reservation, unsigned order,
                                                  uint64_t owner) {
  if (reservation == kUnreserved) return std::nullopt;
  return alloc_tagged(reservation, order, owner);
}

std::optional<std::pair<uint64_t, uint64_t>> FramePool::alloc_foreign(uint64_t exclude,
                                                                      unsigned order,
                                                                      uint64_t owner) {
  for (unsigned o = order; o <= kMaxOrder; ++o) {
    std::optional<std::pair<uint64_t, uint64_t>> best;
    for (const auto& [tag, lists] : by_tag_) {
      if (tag == kUnreserved || tag == exclude || lists[o].empty()) continue;
      const uint64_t start = *lists[o].begin();
      if (!best || start < best->first) best.emplace(start, tag);
    }
    if (best) {
      take_and_split(best->first, order, owner);
      return best;
    }
  }
  return std::nullopt;
}

bool FramePool::alloc_at(uint64_t start, unsigned order, uint64_t owner) {
  const uint64_t size = uint64_t{1} << order;
  if (start % size != 0 || start + size > total_) return false;
  auto it = free_.upper_bound(start);
  if (it == free_.begin()) return false;
  --it;
  const uint64_t block = it->first;
  const FreeInfo info = it->second;
  if (start >= block + (uint64_t{1} << info.order) || info.order < order) return false;

  remove_free(block);
  uint64_t cur = block;
  unsigned cur_order = info.order;
  while (cur_order > order) {
    --cur_order;
    const uint64_t half = uint64_t{1} << cur_order;
    if (start >= cur + half) {
      insert_raw(cur, cur_order, info.tag);
      cur += half;
    } else {
      insert_raw(cur + half, cur_order, info.tag);
    }
  }
  allocated_.emplace(start, AllocInfo{order, owner});
  return true;
}

void FramePool::free(uint64_t start, uint64_t tag) {
  auto it = allocated_.find(start);
  if (it == allocated_.end()) throw Error("free of unallocated frame " + std::to_string(start));
  const unsigned order = it->second.order;
  allocated_.erase(it);
  insert_coalesce(start, order, tag);
}

std::optional<uint64_t> FramePool::reserve(unsigned order, uint64_t owner) {
  if (owner == kUnreserved) return std::nullopt;
  auto start = alloc_tagged(kUnreserved, order, owner);
  if (!start) return std::nullopt;
  allocated_.erase(*start);
  insert_coalesce(*start, order, owner);
  return start;
}

void FramePool::release(uint64_t owner) {
  auto it = by_tag_.find(owner);
  if (it == by_tag_.end() || owner == kUnreserved) return;
  std::vector<std::pair<uint64_t, unsigned>> blocks;
  for (unsigned o = 0; o <= kMaxOrder; ++o) {
    for (uint64_t s : it->second[o]) blocks.emplace_back(s, o);
  }
  for (auto [s, o] : blocks) remove_free(s);
  std::sort(blocks.begin(), blocks.end());
  for (auto [s, o] : blocks) insert_coalesce(s, o, kUnreserved);
}

std::optional<unsigned> FramePool::largest_free_order() const {
  auto it = by_tag_.find(kUnreserved);
  if (it == by_tag_.end()) return std::nullopt;
  for (unsigned o = kMaxOrder + 1; o-- > 0;) {
    if (!it->second[o].empty()) return o;
  }
  return std::nullopt;
}

std::optional<uint64_t> FramePool::free_tag_at(uint64_t frame) const {
  auto it = free_.upper_bound(frame);
  if (it == free_.begin()) return std::nullopt;
  --it;
  if (frame >= it->first + (uint64_t{1} << it->second.order)) return std::nullopt;
  return it->second.tag;
}

std::optional<BlockInfo> FramePool::allocated_block(uint64_t start) const {
  auto it = allocated_.find(start);
  if (it == allocated_.end()) return std::nullopt;
  return BlockInfo{start, it->second.order, true, it->second.owner};
}

std::vector<BlockInfo> FramePool::blocks() const {
  std::vector<BlockInfo> out;
  out.reserve(free_.size() + allocated_.size());
  for (const auto& [s, f] : free_) out.push_back({s, f.order, false, f.tag});
  for (const auto& [s, a] : allocated_) out.push_back({s, a.order, true, a.owner});
  std::sort(out.begin(), out.end(),
            [](const BlockInfo& a, const BlockInfo& b) { return a.start < b.start; });
  return out;
}

bool FramePool::check_invariants(std::string* why) const {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  uint64_t next = 0;
  for (const auto& b : blocks()) {
    if (b.start != next) return fail("gap or overlap at frame " + std::to_string(b.start));
    if (b.start % b.frames() != 0) return fail("misaligned block at " + std::to_string(b.start));
    next = b.start + b.frames();
  }
  if (next != total_) return fail("blocks do not cover the pool");
  for (const auto& [s, f] : free_) {
    const uint64_t size = uint64_t{1} << f.order;
    auto it = free_.find(s ^ size);
    if (it != free_.end() && it->second.order == f.order && it->second.tag == f.tag &&
        (s ^ size) + size <= total_) {
      return fail("uncoalesced buddies at " + std::to_string(s));
    }
  }
  return true;
}

}  // namespace vbi
