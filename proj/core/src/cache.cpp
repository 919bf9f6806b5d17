#include "vbi/cache.hpp"

#include <map>

#include "vbi/address.hpp"
#include "vbi/errors.hpp"

namespace vbi {

namespace {

LruArray<LineMeta> make_level(const CacheLevelConfig& c) {
  const uint64_t lines = c.size_bytes / kLineSize;
  if (lines == 0 || c.ways == 0 || lines % c.ways != 0) throw ConfigError("bad cache geometry");
  return LruArray<LineMeta>(lines, c.ways);
}

}  // namespace

CacheHierarchy::CacheHierarchy(const CacheConfig& cfg)
    : cfg_(cfg), levels_{make_level(cfg.levels[0]), make_level(cfg.levels[1]), make_level(cfg.levels[2])} {}

unsigned CacheHierarchy::lookup_latency(unsigned level) const {
  unsigned total = 0;
  for (unsigned l = 0; l <= level && l < 3; ++l) total += cfg_.levels[l].latency;
  return total;
}

std::optional<unsigned> CacheHierarchy::probe(uint64_t line, bool write, std::vector<Eviction>& writebacks) {
  for (unsigned l = 0; l < 3; ++l) {
    LineMeta* meta = levels_[l].find(line);
    if (meta == nullptr) {
      ++stats_.level[l].misses;
      continue;
    }
    ++stats_.level[l].hits;
    if (l == 0) {
      if (write) {
        meta->dirty = true;
        meta->zero_filled = false;
      }
      return 0;
    }
    LineMeta copy = *meta;
    copy.dirty = false;
    if (write) {
      copy.dirty = true;
      copy.zero_filled = false;
    }
    for (unsigned up = l; up-- > 0;) {
      LineMeta m = copy;
      if (up != 0) m.dirty = false;
      insert_into(up, line, m, writebacks);
    }
    return l;
  }
  return std::nullopt;
}

void CacheHierarchy::fill(uint64_t line, LineMeta meta, bool write, std::vector<Eviction>& writebacks) {
  meta.dirty = false;
  for (unsigned l = 3; l-- > 0;) {
    LineMeta m = meta;
    if (l == 0 && write) {
      m.dirty = true;
      m.zero_filled = false;
    }
    insert_into(l, line, m, writebacks);
  }
}

void CacheHierarchy::insert_into(unsigned level, uint64_t line, const LineMeta& meta,
                                 std::vector<Eviction>& writebacks) {
  auto victim = levels_[level].insert(line, meta);
  if (!victim) return;
  if (!victim->second.dirty) {
    if (level == 2) ++stats_.clean_drops;
    return;
  }
  if (level == 2) {
    ++stats_.dirty_writebacks;
    writebacks.push_back({victim->first, victim->second});
  } else {
    write_down(level + 1, victim->first, victim->second, writebacks);
  }
}

void CacheHierarchy::write_down(unsigned level, uint64_t line, const LineMeta& meta,
                                std::vector<Eviction>& writebacks) {
  if (LineMeta* below = levels_[level].find(line)) {
    below->dirty = true;
    below->zero_filled = false;
    return;
  }
  insert_into(level, line, meta, writebacks);
}

bool CacheHierarchy::contains(uint64_t line) const { return find(line) != nullptr; }

const LineMeta* CacheHierarchy::find(uint64_t line) const {
  for (const auto& level : levels_) {
    if (const LineMeta* m = level.peek(line)) return m;
  }
  return nullptr;
}

uint64_t CacheHierarchy::count_owner(uint64_t owner) const {
  std::map<uint64_t, bool> lines;
  for (const auto& level : levels_) {
    level.for_each([&](uint64_t line, const LineMeta& m) {
      if (m.owner == owner) lines[line] = true;
    });
  }
  return lines.size();
}

uint64_t CacheHierarchy::count_dirty_owner(uint64_t owner) const {
  std::map<uint64_t, bool> lines;
  for (const auto& level : levels_) {
    level.for_each([&](uint64_t line, const LineMeta& m) {
      if (m.owner == owner && m.dirty) lines[line] = true;
    });
  }
  return lines.size();
}

std::vector<Eviction> CacheHierarchy::remove_matching(uint64_t owner, bool all, bool collect_dirty) {
  std::map<uint64_t, LineMeta> dirty;
  std::map<uint64_t, bool> seen;
  for (auto& level : levels_) {
    level.erase_if([&](uint64_t line, const LineMeta& m) {
      if (!all && m.owner != owner) return false;
      if (m.dirty && collect_dirty) dirty.emplace(line, m);
      seen[line] = true;
      return all ? m.dirty : true;
    });
  }
  std::vector<Eviction> out;
  for (auto& [line, m] : dirty) out.push_back({line, m});
  if (!all) stats_.invalidations += seen.size();
  return out;
}

std::vector<Eviction> CacheHierarchy::invalidate_owner(uint64_t owner, bool collect_dirty) {
  return remove_matching(owner, false, collect_dirty);
}

std::vector<Eviction> CacheHierarchy::drain_dirty() { return remove_matching(0, true, true); }

}  // namespace vbi
