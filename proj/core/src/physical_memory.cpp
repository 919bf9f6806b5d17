#include "vbi/physical_memory.hpp"

#include <algorithm>
#include <set>

#include "vbi/errors.hpp"

namespace vbi {

namespace {

constexpr uint64_t kGiB = uint64_t{1} << 30;

uint64_t tag_of(const Vbuid& vb) { return vb.key(); }

}  // namespace

PhysicalMemory::PhysicalMemory(std::vector<uint64_t> zone_frames, AllocPolicy policy)
    : policy_(policy) {
  if (zone_frames.empty()) throw ConfigError("physical memory needs at least one zone");
  for (uint64_t frames : zone_frames) {
    zones_.push_back(Zone{total_, FramePool(frames)});
    total_ += frames;
  }
  const uint64_t bytes = total_ << kPageBits;
  metadata_base_ = (bytes + kGiB - 1) / kGiB * kGiB;
  arena_ = MetadataArena(metadata_base_ + kVitWindow);
}

unsigned PhysicalMemory::zone_of(uint64_t frame) const {
  for (unsigned z = zones_.size(); z-- > 0;) {
    if (frame >= zones_[z].base) return z;
  }
  return 0;
}

uint64_t PhysicalMemory::allocated_frames() const {
  uint64_t n = 0;
  for (const Zone& z : zones_) n += z.pool.allocated_frames();
  return n;
}

uint64_t PhysicalMemory::reserved_frames() const {
  uint64_t n = 0;
  for (const Zone& z : zones_) n += z.pool.reserved_frames();
  return n;
}

VbSpace& PhysicalMemory::create_space(const Vbuid& vb) {
  auto& slot = spaces_[vb.key()];
  if (slot) throw LifecycleError("VB " + vb.to_string() + " already has a physical space");
  slot = std::make_unique<VbSpace>(vb, choose_structure(vb.size_class()), arena_);
  return *slot;
}

VbSpace* PhysicalMemory::space(const Vbuid& vb) {
  auto it = spaces_.find(vb.key());
  return it == spaces_.end() ? nullptr : it->second.get();
}

const VbSpace* PhysicalMemory::space(const Vbuid& vb) const {
  auto it = spaces_.find(vb.key());
  return it == spaces_.end() ? nullptr : it->second.get();
}

VbSpace& PhysicalMemory::must(const Vbuid& vb) {
  VbSpace* s = space(vb);
  if (s == nullptr) throw LifecycleError("VB " + vb.to_string() + " has no physical space");
  return *s;
}

void PhysicalMemory::release_frame(uint64_t frame) {
  auto it = refs_.find(frame);
  if (it == refs_.end()) throw Error("release of untracked frame " + std::to_string(frame));
  if (--it->second > 0) return;
  refs_.erase(it);
  Zone& z = zones_[zone_of(frame)];
  z.pool.free(frame - z.base, kUnreserved);
  ++stats_.frames_freed;
}

void PhysicalMemory::destroy_space(const Vbuid& vb) {
  auto it = spaces_.find(vb.key());
  if (it == spaces_.end()) return;
  for (const auto& [page, m] : it->second->ts.mappings()) {
    if (m.state == RegionState::allocated) release_frame(m.frame);
  }
  for (Zone& z : zones_) z.pool.release(tag_of(vb));
  spaces_.erase(it);
}

RegionState PhysicalMemory::region_state(const Vbuid& vb, uint64_t page) const {
  const VbSpace* s = space(vb);
  if (s == nullptr) return RegionState::unallocated;
  if (const PageMapping* m = s->ts.find(page)) return m->state;
  for (const ReservationRange& r : s->ranges) {
    if (!r.covers(page)) continue;
    const uint64_t frame = r.frame + (page - r.vb_page);
    const Zone& z = zones_[zone_of(frame)];
    if (z.pool.free_tag_at(frame - z.base) == tag_of(vb)) return RegionState::reserved;
  }
  return RegionState::unallocated;
}

void PhysicalMemory::lose_direct(VbSpace& s, std::vector<Vbuid>* lost) {
  if (!s.directly_mapped) return;
  s.directly_mapped = false;
  s.ts.make_table();
  ++stats_.direct_lost;
  if (lost) lost->push_back(s.vb);
}

void PhysicalMemory::reserve_for(VbSpace& s, uint64_t page) {
  Zone& z = zones_[s.zone];
  const unsigned vb_order = s.vb.size_class().offset_bits - kPageBits;
  const uint64_t tag = tag_of(s.vb);
  const bool first = !s.reservation_attempted;
  s.reservation_attempted = true;
  const std::optional<unsigned> largest = z.pool.largest_free_order();
  if (!largest) return;

  if (first && s.ts.mappings().empty() && *largest >= vb_order) {
    const uint64_t start = *z.pool.reserve(vb_order, tag);
    s.ranges.push_back({0, z.base + start, vb_order});
    s.directly_mapped = true;
    s.ts.make_direct(z.base + start);
    ++stats_.reservations_full;
    return;
  }

  // Sparse: the largest aligned chunk around `page` that overlaps neither an
  // existing range nor an already mapped page.
  for (unsigned k = std::min(*largest, vb_order) + 1; k-- > 0;) {
    const uint64_t len = uint64_t{1} << k;
    const uint64_t lo = page & ~(len - 1);
    const bool overlaps_range = std::any_of(s.ranges.begin(), s.ranges.end(), [&](const ReservationRange& r) {
      return r.vb_page < lo + len && lo < r.vb_page + r.pages();
    });
    if (overlaps_range) continue;
    auto mapped = s.ts.mappings().lower_bound(lo);
    if (mapped != s.ts.mappings().end() && mapped->first < lo + len) continue;
    const uint64_t start = *z.pool.reserve(k, tag);
    s.ranges.push_back({lo, z.base + start, k});
    ++stats_.reservations_sparse;
    return;
  }
}

std::optional<AllocResult> PhysicalMemory::alloc_in_zone(VbSpace& s, unsigned zone, uint64_t page) {
  Zone& z = zones_[zone];
  const uint64_t tag = tag_of(s.vb);
  AllocResult r;

  for (const ReservationRange& range : s.ranges) {
    if (!range.covers(page)) continue;
    const uint64_t frame = range.frame + (page - range.vb_page);
    if (zone_of(frame) != zone) break;
    if (z.pool.free_tag_at(frame - z.base) == tag && z.pool.alloc_at(frame - z.base, 0, tag)) {
      r.frame = frame;
      r.priority = 1;
      return r;
    }
    break;
  }
  // Anything below keeps the page out of its reserved slot.
  if (auto local = z.pool.alloc_reserved(tag, 0, tag)) {
    r.frame = z.base + *local;
    r.priority = 1;
  } else if (auto local2 = z.pool.alloc(0, tag)) {
    r.frame = z.base + *local2;
    r.priority = 2;
  } else if (auto foreign = z.pool.alloc_foreign(tag, 0, tag)) {
    r.frame = z.base + foreign->first;
    r.priority = 3;
    for (auto& [key, other] : spaces_) {
      if (key == foreign->second) lose_direct(*other, &r.lost_direct);
    }
  } else {
    return std::nullopt;
  }
  lose_direct(s, &r.lost_direct);
  return r;
}

AllocResult PhysicalMemory::allocate(VbSpace& s, uint64_t page, unsigned zone) {
  if (policy_ == AllocPolicy::early_reservation) {
    const bool covered = std::any_of(s.ranges.begin(), s.ranges.end(),
                                     [&](const ReservationRange& r) { return r.covers(page); });
    if (!covered) reserve_for(s, page);
  }
  if (zone >= zones_.size()) throw Error("zone out of range");
  std::vector<unsigned> order{zone};
  for (unsigned z = 0; z < zones_.size(); ++z) {
    if (z != zone) order.push_back(z);
  }
  for (unsigned z : order) {
    if (auto r = alloc_in_zone(s, z, page)) {
      ++stats_.priority[r->priority];
      ++stats_.frames_allocated;
      refs_[r->frame] = 1;
      return *r;
    }
  }
  throw OutOfMemory("no free frame for " + s.vb.to_string() + " page " + std::to_string(page));
}

AllocResult PhysicalMemory::ensure_backed(const Vbuid& vb, uint64_t page, AllocReason reason,
                                          std::optional<unsigned> zone) {
  VbSpace& s = must(vb);
  if (page >= vb.size_class().pages()) throw Error("page beyond VB size");
  const PageMapping* m = s.ts.find(page);
  if (m != nullptr && m->state == RegionState::allocated) {
    throw Error("ensure_backed on an allocated page of " + vb.to_string());
  }
  const bool swapped = m != nullptr && m->state == RegionState::swapped_out;
  AllocResult r = allocate(s, page, zone.value_or(s.zone));
  s.ts.map(page, PageMapping{RegionState::allocated, r.frame, false});
  s.alloc_order.push_back(page);
  if (swapped || reason == AllocReason::swap_in) ++stats_.swap_in;
  return r;
}

std::optional<uint64_t> PhysicalMemory::resolve_cow(const Vbuid& vb, uint64_t page, AllocResult* alloc,
                                                    std::optional<unsigned> zone) {
  VbSpace& s = must(vb);
  const PageMapping* m = s.ts.find(page);
  if (m == nullptr || m->state != RegionState::allocated || !m->cow) {
    throw Error("resolve_cow on a page that is not copy-on-write");
  }
  const uint64_t old = m->frame;
  if (share_count(old) <= 1) {
    s.ts.set_cow(page, false);
    ++stats_.cow_reuse;
    return std::nullopt;
  }
  AllocResult r = allocate(s, page, zone.value_or(zone_of(old)));
  --refs_[old];
  s.ts.map(page, PageMapping{RegionState::allocated, r.frame, false});
  s.alloc_order.push_back(page);
  ++stats_.cow_copies;
  if (alloc) *alloc = std::move(r);
  return old;
}

void PhysicalMemory::clone(const Vbuid& src, const Vbuid& dst) {
  if (src.size_id != dst.size_id) throw LifecycleError("clone across size classes");
  VbSpace& a = must(src);
  VbSpace& b = must(dst);
  if (!b.ts.mappings().empty()) throw LifecycleError("clone target " + dst.to_string() + " is not empty");
  std::vector<std::pair<uint64_t, PageMapping>> pages(a.ts.mappings().begin(), a.ts.mappings().end());
  for (auto& [page, m] : pages) {
    if (m.state == RegionState::allocated) {
      a.ts.set_cow(page, true);
      m.cow = true;
      ++refs_[m.frame];
      b.alloc_order.push_back(page);
    }
    b.ts.map(page, m);
  }
}

void PhysicalMemory::promote(const Vbuid& src, const Vbuid& larger) {
  if (larger.size_id <= src.size_id) throw LifecycleError("promotion target is not larger");
  VbSpace& a = must(src);
  VbSpace& b = must(larger);
  if (!b.ts.mappings().empty()) throw LifecycleError("promotion target " + larger.to_string() + " is not empty");
  for (const auto& [page, m] : a.ts.mappings()) b.ts.map(page, m);
  b.alloc_order = a.alloc_order;
  b.zone = a.zone;
  const std::vector<uint64_t> pages = [&] {
    std::vector<uint64_t> v;
    for (const auto& [page, m] : a.ts.mappings()) v.push_back(page);
    return v;
  }();
  for (uint64_t page : pages) a.ts.unmap(page);
  a.alloc_order.clear();
  a.ranges.clear();
  a.directly_mapped = false;
  a.ts.make_table();
  for (Zone& z : zones_) z.pool.release(tag_of(src));
}

std::optional<SwapVictim> PhysicalMemory::pick_swap_victim() {
  VbSpace* best = nullptr;
  for (auto& [key, s] : spaces_) {
    if (s->ts.allocated_pages() == 0) continue;
    if (best == nullptr || s->ts.allocated_pages() > best->ts.allocated_pages()) best = s.get();
  }
  if (best == nullptr) return std::nullopt;
  auto& order = best->alloc_order;
  auto live = [&](uint64_t page) {
    const PageMapping* m = best->ts.find(page);
    return m != nullptr && m->state == RegionState::allocated;
  };
  while (!order.empty() && !live(order.front())) order.pop_front();
  for (uint64_t page : order) {
    const PageMapping* m = best->ts.find(page);
    if (m != nullptr && m->state == RegionState::allocated && share_count(m->frame) == 1) {
      return SwapVictim{best->vb, page, m->frame};
    }
  }
  return std::nullopt;
}

void PhysicalMemory::swap_out(const Vbuid& vb, uint64_t page) {
  VbSpace& s = must(vb);
  const PageMapping* m = s.ts.find(page);
  if (m == nullptr || m->state != RegionState::allocated) throw Error("swap_out of an unbacked page");
  release_frame(m->frame);
  s.ts.map(page, PageMapping{RegionState::swapped_out, 0, false});
  ++stats_.swap_out;
}

std::optional<std::pair<uint64_t, uint64_t>> PhysicalMemory::migrate(const Vbuid& vb, uint64_t page,
                                                                     unsigned zone) {
  VbSpace& s = must(vb);
  const PageMapping* m = s.ts.find(page);
  if (m == nullptr || m->state != RegionState::allocated || m->cow) return std::nullopt;
  const uint64_t old = m->frame;
  if (zone_of(old) == zone || share_count(old) != 1) return std::nullopt;
  Zone& z = zones_[zone];
  auto local = z.pool.alloc(0, tag_of(vb));
  if (!local) return std::nullopt;
  const uint64_t frame = z.base + *local;
  refs_[frame] = 1;
  release_frame(old);
  s.ts.map(page, PageMapping{RegionState::allocated, frame, false});
  ++stats_.migrations;
  return std::make_pair(old, frame);
}

uint32_t PhysicalMemory::share_count(uint64_t frame) const {
  auto it = refs_.find(frame);
  return it == refs_.end() ? 0 : it->second;
}

bool PhysicalMemory::check_invariants(std::string* why) const {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  for (const Zone& z : zones_) {
    if (!z.pool.check_invariants(why)) return false;
  }
  std::unordered_map<uint64_t, uint32_t> seen;
  for (const auto& [key, s] : spaces_) {
    for (const auto& [page, m] : s->ts.mappings()) {
      if (m.state == RegionState::allocated) ++seen[m.frame];
    }
  }
  if (seen != refs_) return fail("frame share counts disagree with mappings");
  if (seen.size() != allocated_frames()) return fail("allocated frame count disagrees with mappings");
  return true;
}

}  // namespace vbi
