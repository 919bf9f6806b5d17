#include <doctest.h>

#include "vbi/errors.hpp"
#include "vbi/x86_translation.hpp"

using namespace vbi;

namespace {

// Hands out pages in order; guest-physical and machine-physical spaces are
// separate counters.
struct Backing {
  uint64_t next_native = 0;
  uint64_t next_guest = 0;
  uint64_t next_host = uint64_t{1} << 32;
  unsigned page_bits = 12;

  X86Backing hooks() {
    X86Backing b;
    b.native_fault = [this](uint16_t, uint64_t) { return next_native++ << page_bits; };
    b.guest_fault = [this](uint16_t, uint64_t) { return next_guest++ << page_bits; };
    b.host_fault = [this](uint64_t, bool) {
      const uint64_t base = next_host;
      next_host += uint64_t{1} << page_bits;
      return base;
    };
    return b;
  }
};

// Accesses of a fully cold nested walk: every guest level plus the data page
// needs a full host walk.
unsigned nested_cold(unsigned guest_levels, unsigned host_levels) {
  return (guest_levels + 1) * host_levels + guest_levels;
}

struct Rig {
  Backing backing;
  MetadataArena arena{uint64_t{1} << 44};
  X86Mmu mmu;
  explicit Rig(X86Mode mode, bool perfect = false)
      : backing{0, 0, uint64_t{1} << 32, x86_large_pages(mode) ? 21u : 12u},
        mmu(mode, TlbConfig{}, arena, backing.hooks(), perfect) {}
};

}  // namespace

TEST_CASE("cold walk access counts") {
  CHECK(Rig(X86Mode::native4k).mmu.translate(1, 0x12345678).walk_accesses == 4);
  CHECK(Rig(X86Mode::native2m).mmu.translate(1, 0x12345678).walk_accesses == 3);
  CHECK(nested_cold(4, 4) == 24);
  const X86Translation n4 = Rig(X86Mode::nested4k).mmu.translate(1, 0x12345678);
  CHECK(n4.walk_accesses == 24);
  CHECK(n4.nested_accesses == 20);
  CHECK(Rig(X86Mode::nested2m).mmu.translate(1, 0x12345678).walk_accesses == nested_cold(3, 3));
}

TEST_CASE("faults allocate on first touch and then translate consistently") {
  Rig r(X86Mode::native4k);
  const X86Translation first = r.mmu.translate(1, 0x5000 + 12);
  CHECK(first.faults == 1);
  CHECK(first.paddr == 12);
  const X86Translation again = r.mmu.translate(1, 0x5000 + 100);
  CHECK(again.faults == 0);
  CHECK(again.level == TlbLevel::l1);
  CHECK(again.paddr == 100);
  CHECK(r.mmu.lookup(1, 5) == 0u);
  CHECK(r.mmu.translate(2, 0x5000).paddr == 0x1000);  // separate address space
}

TEST_CASE("neighbouring page reuses the walk cache") {
  Rig r(X86Mode::native4k);
  r.mmu.translate(1, 0);
  const X86Translation near = r.mmu.translate(1, 0x1000);
  CHECK(near.pwc_hit);
  CHECK(near.walk_accesses == 1);
}

TEST_CASE("nested walks can hit the walk cache on host entries") {
  Rig r(X86Mode::nested4k);
  r.mmu.translate(1, 0);
  const X86Translation near = r.mmu.translate(1, 0x1000);
  CHECK(near.walk_accesses < 24);
}

TEST_CASE("perfect TLB never walks") {
  Rig r(X86Mode::native4k, true);
  for (uint64_t p = 0; p < 1000; ++p) CHECK(r.mmu.translate(1, p << 12).walk_accesses == 0);
  CHECK(r.mmu.walks() == 0);
}

TEST_CASE("unmap and remap drop stale TLB entries") {
  Rig r(X86Mode::native4k);
  r.mmu.translate(1, 0x3000);
  r.mmu.remap(1, 3, 0x777000);
  CHECK(r.mmu.translate(1, 0x3004).paddr == 0x777004);
  CHECK(r.mmu.unmap(1, 3) == 0x777000u);
  CHECK(r.mmu.translate(1, 0x3000).faults == 1);
}

TEST_CASE("host mappings can only be installed in nested mode") {
  Rig r(X86Mode::native4k);
  CHECK_THROWS_AS(r.mmu.map_host(1, 0x1000), Error);
}
