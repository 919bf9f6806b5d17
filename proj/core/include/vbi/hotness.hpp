#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "vbi/address.hpp"
#include "vbi/registry.hpp"

namespace vbi {

enum class HetPolicy : uint8_t { aware, unaware, ideal };

const char* policy_name(HetPolicy p);
HetPolicy parse_policy(std::string_view text);

// Placement and migration unit: a whole VB up to 4 MB, else a 4 MB chunk.
struct UnitId {
  uint64_t vb_key = 0;
  uint64_t chunk = 0;
  friend auto operator<=>(const UnitId&, const UnitId&) = default;
};

inline constexpr unsigned kChunkPageBits = 10;  // 4 MB of 4 KB pages

UnitId unit_of(const Vbuid& vb, uint64_t page);
// Size of the unit in KB (for access density).
uint64_t unit_kb(const Vbuid& vb);
// First page and page count of a unit inside its VB.
std::pair<uint64_t, uint64_t> unit_pages(const Vbuid& vb, const UnitId& unit);

struct RankedUnit {
  UnitId unit;
  uint64_t count = 0;
  double density = 0;  // accesses per KB
};

// Per-unit access counting and the fast/slow placement decision.
class HotnessTracker {
 public:
  HotnessTracker(HetPolicy policy, unsigned fast_zone, unsigned slow_zone, uint64_t epoch_cycles);

  HetPolicy policy() const { return policy_; }
  unsigned fast_zone() const { return fast_; }
  unsigned slow_zone() const { return slow_; }
  uint64_t epoch_cycles() const { return epoch_; }

  // Zone for a unit's allocations, fixed at its first allocation (until migrated).
  unsigned place(const UnitId& unit, Props props, uint64_t fast_free_frames);
  std::optional<unsigned> zone_of(const UnitId& unit) const;
  void set_zone(const UnitId& unit, unsigned zone) { zones_[unit] = zone; }

  // Drops placement and epoch state of a VB that went away.
  void forget(uint64_t vb_key);

  void record(const UnitId& unit) { ++epoch_counts_[unit]; ++total_counts_[unit]; }

  bool epoch_due(uint64_t now) const { return now >= next_epoch_; }
  // Units touched in the closing epoch, densest first (ties by unit order);
  // resets the epoch counters.
  std::vector<RankedUnit> close_epoch(uint64_t now);
  uint64_t epochs() const { return epochs_; }

  // Whole-run counts, the profile an oracle placement would use.
  const std::map<UnitId, uint64_t>& totals() const { return total_counts_; }
  // Oracle placement: units ranked by whole-run density are marked fast while
  // their touched pages fit in `fast_frames`.
  void set_profile(const std::map<UnitId, uint64_t>& counts, const std::map<UnitId, uint64_t>& pages,
                   uint64_t fast_frames);

 private:
  HetPolicy policy_;
  unsigned fast_;
  unsigned slow_;
  uint64_t epoch_;
  uint64_t next_epoch_;
  uint64_t epochs_ = 0;
  uint64_t round_robin_ = 0;
  std::map<UnitId, unsigned> zones_;
  std::map<UnitId, uint64_t> epoch_counts_;
  std::map<UnitId, uint64_t> total_counts_;
  std::map<UnitId, bool> oracle_fast_;
};

}  // namespace vbi
