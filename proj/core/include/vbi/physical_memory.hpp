#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "vbi/address.hpp"
#include "vbi/frame_pool.hpp"
#include "vbi/radix_table.hpp"
#include "vbi/translation.hpp"

namespace vbi {

enum class AllocPolicy : uint8_t { on_demand, early_reservation };
enum class AllocReason : uint8_t { dirty_writeback, swap_in, cow_copy, migration };

// A run of VB pages backed by a reserved physical block: page vb_page + i maps
// to frame + i.
struct ReservationRange {
  uint64_t vb_page = 0;
  uint64_t frame = 0;
  unsigned order = 0;

  uint64_t pages() const { return uint64_t{1} << order; }
  bool covers(uint64_t page) const { return page >= vb_page && page < vb_page + pages(); }
};

struct VbSpace {
  Vbuid vb;
  TranslationStructure ts;
  std::vector<ReservationRange> ranges;
  bool directly_mapped = false;
  bool reservation_attempted = false;
  unsigned zone = 0;
  std::deque<uint64_t> alloc_order;  // pages in allocation order (may hold stale entries)

  VbSpace(const Vbuid& v, StructureKind kind, MetadataArena& arena)
      : vb(v), ts(v.size_class(), kind, arena) {}
};

struct AllocResult {
  uint64_t frame = 0;
  unsigned priority = 0;  // 1 own-reserved, 2 unreserved, 3 foreign-reserved
  // VBs whose directly mapped status ended with this allocation.
  std::vector<Vbuid> lost_direct;
};

struct PhysStats {
  uint64_t frames_allocated = 0;  // allocations performed (4 KB regions)
  uint64_t frames_freed = 0;
  uint64_t priority[4] = {0, 0, 0, 0};
  uint64_t reservations_full = 0;
  uint64_t reservations_sparse = 0;
  uint64_t direct_lost = 0;
  uint64_t cow_copies = 0;
  uint64_t cow_reuse = 0;
  uint64_t swap_in = 0;
  uint64_t swap_out = 0;
  uint64_t migrations = 0;
};

struct SwapVictim {
  Vbuid vb;
  uint64_t page = 0;
  uint64_t frame = 0;
};

// Physical frames of the VBI machine. The frame space is split into zones
// (one per memory region), each a buddy pool; frame numbers are global.
class PhysicalMemory {
 public:
  PhysicalMemory(std::vector<uint64_t> zone_frames, AllocPolicy policy);

  AllocPolicy policy() const { return policy_; }
  uint64_t total_frames() const { return total_; }
  std::size_t zone_count() const { return zones_.size(); }
  unsigned zone_of(uint64_t frame) const;
  uint64_t zone_base(unsigned zone) const { return zones_.at(zone).base; }
  const FramePool& pool(unsigned zone) const { return zones_.at(zone).pool; }
  uint64_t free_frames(unsigned zone) const { return zones_.at(zone).pool.free_frames(); }
  uint64_t allocated_frames() const;
  uint64_t reserved_frames() const;

  // First byte above the frame pool; VIT windows and translation tables live
  // from here up.
  uint64_t metadata_base() const { return metadata_base_; }
  uint64_t vit_base() const { return metadata_base_; }
  static constexpr uint64_t kVitWindow = uint64_t{8} << 30;
  MetadataArena& arena() { return arena_; }

  VbSpace& create_space(const Vbuid& vb);
  // Frees every frame and reservation of the VB (shared frames only lose a reference).
  void destroy_space(const Vbuid& vb);
  VbSpace* space(const Vbuid& vb);
  const VbSpace* space(const Vbuid& vb) const;

  RegionState region_state(const Vbuid& vb, uint64_t page) const;

  // Backs one 4 KB region of the VB. Throws OutOfMemory when every zone is
  // exhausted at every priority.
  // `zone` overrides the VB's home zone for this allocation.
  AllocResult ensure_backed(const Vbuid& vb, uint64_t page, AllocReason reason,
                            std::optional<unsigned> zone = std::nullopt);

  // Gives the writer a private frame for a CoW page. Returns the old frame when
  // a copy was needed, nullopt when the page was the last sharer.
  std::optional<uint64_t> resolve_cow(const Vbuid& vb, uint64_t page, AllocResult* alloc = nullptr,
                                      std::optional<unsigned> zone = std::nullopt);

  // dst shares all of src's frames; both sides become CoW.
  void clone(const Vbuid& src, const Vbuid& dst);
  // Moves src's mappings into the low pages of `larger`; src is left empty.
  void promote(const Vbuid& src, const Vbuid& larger);

  // Least recently allocated unshared page of the VB holding the most frames.
  std::optional<SwapVictim> pick_swap_victim();
  void swap_out(const Vbuid& vb, uint64_t page);

  // Moves an unshared allocated page to `zone`. Returns (old, new) frames.
  std::optional<std::pair<uint64_t, uint64_t>> migrate(const Vbuid& vb, uint64_t page, unsigned zone);

  uint32_t share_count(uint64_t frame) const;
  const PhysStats& stats() const { return stats_; }
  bool check_invariants(std::string* why = nullptr) const;

 private:
  struct Zone {
    uint64_t base;
    FramePool pool;
  };

  std::optional<AllocResult> alloc_in_zone(VbSpace& s, unsigned zone, uint64_t page);
  AllocResult allocate(VbSpace& s, uint64_t page, unsigned zone);
  void reserve_for(VbSpace& s, uint64_t page);
  void lose_direct(VbSpace& s, std::vector<Vbuid>* lost);
  void install(VbSpace& s, uint64_t page, uint64_t frame);
  void release_frame(uint64_t frame);
  VbSpace& must(const Vbuid& vb);

  AllocPolicy policy_;
  std::vector<Zone> zones_;
  uint64_t total_ = 0;
  uint64_t metadata_base_ = 0;
  MetadataArena arena_;
  std::map<uint64_t, std::unique_ptr<VbSpace>> spaces_;
  std::unordered_map<uint64_t, uint32_t> refs_;
  PhysStats stats_;
};

}  // namespace vbi
