#include <doctest.h>

#include <set>

#include "../support/priority_oracle.hpp"
#include "vbi/errors.hpp"
#include "vbi/physical_memory.hpp"

using namespace vbi;

namespace {

constexpr uint64_t k2GiBFrames = 524288;

AllocResult back(PhysicalMemory& m, const Vbuid& vb, uint64_t page) {
  return m.ensure_backed(vb, page, AllocReason::dirty_writeback);
}

}  // namespace

TEST_CASE("empty pool: a 4 MB VB gets a full contiguous reservation") {
  PhysicalMemory m({k2GiBFrames}, AllocPolicy::early_reservation);
  const Vbuid vb{2, 0, 0};
  m.create_space(vb);
  const AllocResult r = back(m, vb, 5);
  CHECK(r.priority == 1);
  const VbSpace& s = *m.space(vb);
  CHECK(s.directly_mapped);
  CHECK(s.ts.kind() == StructureKind::direct);
  REQUIRE(s.ranges.size() == 1);
  CHECK(s.ranges[0].pages() == 1024);
  CHECK(r.frame == s.ranges[0].frame + 5);
  CHECK(m.reserved_frames() == 1023);
  CHECK(m.region_state(vb, 6) == RegionState::reserved);
  // Later pages keep the direct layout.
  CHECK(back(m, vb, 900).frame == s.ranges[0].frame + 900);
  CHECK(m.space(vb)->directly_mapped);
}

TEST_CASE("fragmented pool: reservations shrink to the largest free run") {
  PhysicalMemory m({2048}, AllocPolicy::early_reservation);
  std::vector<Vbuid> fillers;
  for (uint64_t i = 0; i < 2048; ++i) {
    fillers.push_back(Vbuid{0, 0, i});
    m.create_space(fillers.back());
    back(m, fillers.back(), 0);
  }
  CHECK(m.free_frames(0) == 0);
  // Open four 1 MB holes.
  for (const Vbuid& f : fillers) {
    const uint64_t frame = m.space(f)->ts.find(0)->frame;
    if (frame % 512 < 256) m.destroy_space(f);
  }
  REQUIRE(m.pool(0).largest_free_order() == 8u);

  const Vbuid vb{2, 0, 0};
  m.create_space(vb);
  back(m, vb, 0);
  back(m, vb, 700);
  const VbSpace& s = *m.space(vb);
  CHECK_FALSE(s.directly_mapped);
  CHECK(s.ts.kind() == StructureKind::single_level);
  REQUIRE(s.ranges.size() == 2);
  for (const ReservationRange& r : s.ranges) CHECK(r.pages() <= 256);
  CHECK(m.stats().reservations_sparse == 2);
}

TEST_CASE("foreign reservations are consumed last and end direct mapping") {
  PhysicalMemory m({2048}, AllocPolicy::early_reservation);
  const Vbuid a{2, 0, 0}, b{2, 0, 1}, c{0, 0, 0};
  m.create_space(a);
  m.create_space(b);
  m.create_space(c);
  back(m, a, 0);
  back(m, b, 0);
  CHECK(m.space(a)->directly_mapped);
  CHECK(m.pool(0).free_frames_tagged(kUnreserved) == 0);
  const AllocResult r = back(m, c, 0);
  CHECK(r.priority == 3);
  REQUIRE(r.lost_direct.size() == 1);
  CHECK(r.lost_direct[0] == a);
  CHECK_FALSE(m.space(a)->directly_mapped);
  CHECK(m.space(a)->ts.kind() == StructureKind::single_level);
  CHECK(m.space(b)->directly_mapped);
  CHECK(m.stats().direct_lost == 1);
}

TEST_CASE("disabling a reserving VB returns its reservation") {
  PhysicalMemory m({4096}, AllocPolicy::early_reservation);
  const Vbuid a{2, 0, 0}, b{2, 0, 1};
  m.create_space(a);
  m.create_space(b);
  back(m, a, 0);
  back(m, b, 0);
  CHECK(m.reserved_frames() == 2046);
  m.destroy_space(a);
  CHECK(m.reserved_frames() == 1023);
  CHECK(m.allocated_frames() == 1);
  CHECK(m.pool(0).free_frames_tagged(kUnreserved) == 4096 - 1024);
}

TEST_CASE("on-demand policy allocates single unreserved frames") {
  PhysicalMemory m({64}, AllocPolicy::on_demand);
  const Vbuid vb{3, 0, 0};
  m.create_space(vb);
  CHECK(m.region_state(vb, 10) == RegionState::unallocated);
  const AllocResult r = back(m, vb, 10);
  CHECK(r.priority == 2);
  CHECK(m.region_state(vb, 10) == RegionState::allocated);
  CHECK(m.reserved_frames() == 0);
  CHECK(m.stats().frames_allocated == 1);
  CHECK_THROWS_AS(back(m, vb, 10), Error);
}

TEST_CASE("N sharers writing once make N-1 copies") {
  for (unsigned n = 2; n <= 6; ++n) {
    PhysicalMemory m({256}, AllocPolicy::on_demand);
    std::vector<Vbuid> vbs;
    for (unsigned i = 0; i < n; ++i) {
      vbs.push_back(Vbuid{1, 0, i});
      m.create_space(vbs.back());
    }
    back(m, vbs[0], 3);
    for (unsigned i = 1; i < n; ++i) m.clone(vbs[0], vbs[i]);
    const uint64_t shared = m.space(vbs[0])->ts.find(3)->frame;
    CHECK(m.share_count(shared) == n);
    std::set<uint64_t> frames;
    for (const Vbuid& vb : vbs) {
      m.resolve_cow(vb, 3);
      frames.insert(m.space(vb)->ts.find(3)->frame);
      CHECK_FALSE(m.space(vb)->ts.find(3)->cow);
    }
    CHECK(m.stats().cow_copies == n - 1);
    CHECK(m.stats().cow_reuse == 1);
    CHECK(frames.size() == n);
    CHECK(m.allocated_frames() == n);
    std::string why;
    CHECK(m.check_invariants(&why));
  }
}

TEST_CASE("clone and promote preconditions") {
  PhysicalMemory m({256}, AllocPolicy::on_demand);
  const Vbuid a{1, 0, 0}, b{1, 0, 1}, big{2, 0, 0};
  m.create_space(a);
  m.create_space(b);
  m.create_space(big);
  back(m, a, 1);
  back(m, b, 2);
  CHECK_THROWS_AS(m.clone(a, b), LifecycleError);
  CHECK_THROWS_AS(m.clone(a, big), LifecycleError);
  CHECK_THROWS_AS(m.resolve_cow(a, 1), Error);
  CHECK_THROWS_AS(m.promote(big, a), LifecycleError);

  const uint64_t f1 = m.space(a)->ts.find(1)->frame;
  m.promote(a, big);
  CHECK(m.space(big)->ts.find(1)->frame == f1);
  CHECK(m.space(a)->ts.mappings().empty());
  back(m, big, 500);  // beyond the old size
  CHECK(m.region_state(big, 500) == RegionState::allocated);
}

TEST_CASE("swap out the least recently allocated page of the largest VB") {
  PhysicalMemory m({4}, AllocPolicy::on_demand);
  const Vbuid small{1, 0, 0}, large{1, 0, 1};
  m.create_space(small);
  m.create_space(large);
  back(m, small, 0);
  back(m, large, 7);
  back(m, large, 2);
  back(m, large, 9);
  CHECK_THROWS_AS(back(m, small, 1), OutOfMemory);
  const auto victim = m.pick_swap_victim();
  REQUIRE(victim);
  CHECK(victim->vb == large);
  CHECK(victim->page == 7);
  m.swap_out(large, 7);
  CHECK(m.region_state(large, 7) == RegionState::swapped_out);
  back(m, small, 1);
  CHECK(m.stats().swap_out == 1);

  m.swap_out(large, 2);
  back(m, large, 7);
  CHECK(m.stats().swap_in == 1);
  CHECK(m.region_state(large, 7) == RegionState::allocated);
}

TEST_CASE("zones: fallback when full and migration between them") {
  PhysicalMemory m({2, 4}, AllocPolicy::on_demand);
  CHECK(m.zone_base(1) == 2);
  const Vbuid vb{1, 0, 0};
  m.create_space(vb);
  CHECK(m.zone_of(back(m, vb, 0).frame) == 0);
  CHECK(m.zone_of(back(m, vb, 1).frame) == 0);
  CHECK(m.zone_of(back(m, vb, 2).frame) == 1);
  CHECK(m.zone_of(m.ensure_backed(vb, 3, AllocReason::migration, 1u).frame) == 1);

  const auto moved = m.migrate(vb, 0, 1);
  REQUIRE(moved);
  CHECK(m.zone_of(moved->second) == 1);
  CHECK(m.space(vb)->ts.find(0)->frame == moved->second);
  CHECK(m.free_frames(0) == 1);
  CHECK_FALSE(m.migrate(vb, 0, 1).has_value());  // already there
  CHECK(m.stats().migrations == 1);
}

TEST_CASE("metadata sits above the frame pool on a 1 GB boundary") {
  PhysicalMemory m({1000}, AllocPolicy::on_demand);
  CHECK(m.metadata_base() == uint64_t{1} << 30);
  CHECK(m.arena().base() == m.metadata_base() + PhysicalMemory::kVitWindow);
}

TEST_CASE("allocation priority is never skipped") {
  uint64_t seen[4] = {0, 0, 0, 0};
  for (uint64_t seed = 1; seed <= 40; ++seed) {
    const std::string err = testing::run_priority_sequence(seed, 256, 400, seen);
    INFO(err);
    CHECK(err.empty());
  }
  // The workload reaches every priority level.
  CHECK(seen[1] > 0);
  CHECK(seen[2] > 0);
  CHECK(seen[3] > 0);
  MESSAGE("priorities: " << seen[1] << " " << seen[2] << " " << seen[3]);
}
