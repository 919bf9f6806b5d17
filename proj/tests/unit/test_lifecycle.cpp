#include <doctest.h>

#include "vbi/engine.hpp"
#include "vbi/errors.hpp"
#include "vbi/vbi_machine.hpp"
#include "vbi/x86_machine.hpp"

using namespace vbi;

namespace {

SimConfig small_config() {
  SimConfig c;
  c.memory.pool_bytes = 64 << 20;
  return c;
}

// Feeds trace lines one batch at a time so state can be inspected in between.
struct Driver {
  std::unique_ptr<Machine> machine;
  CoreModel core;

  explicit Driver(Scenario s) : machine(make_machine(small_config(), s)), core(*machine, CoreConfig{}) {}

  void feed(const std::string& lines) {
    for (const TraceEvent& ev : parse_trace("#vbi-trace v1\n" + lines).events) core.step(ev);
  }
  Stats stats() const {
    Stats s;
    machine->report(s);
    return s;
  }
  VbiMachine& vbi() { return static_cast<VbiMachine&>(*machine); }
  const PageMapping* page(const Vbuid& vb, uint64_t p) { return vbi().memory().space(vb)->ts.find(p); }
};

const Vbuid kSmallA{1, 0, 0};
const Vbuid kSmallB{1, 0, 1};
const Vbuid kLarge{2, 0, 0};

}  // namespace

TEST_CASE("clone shares frames until a write diverges them") {
  for (Scenario s : {Scenario::vbi1, Scenario::vbi2, Scenario::vbifull}) {
    CAPTURE(scenario_name(s));
    Driver d(s);
    d.feed("REQVB 1 128K -\nREQVB 1 128K -\nMEM w 1 0 0 0\nMEM w 1 0 4096 0\nMEM w 1 0 4160 0\n");
    const uint64_t dirty = d.vbi().caches().count_dirty_owner(kSmallA.key());
    CHECK(dirty == 3);
    d.feed("CLONE 1:0 1:1\n");
    CHECK(d.stats().get("clone.flushed") == dirty);
    CHECK(d.vbi().caches().count_dirty_owner(kSmallA.key()) == 0);

    for (uint64_t p : {0, 1}) {
      REQUIRE(d.page(kSmallB, p) != nullptr);
      CHECK(d.page(kSmallA, p)->frame == d.page(kSmallB, p)->frame);
      CHECK(d.page(kSmallA, p)->cow);
      CHECK(d.page(kSmallB, p)->cow);
    }
    const uint64_t shared0 = d.page(kSmallA, 0)->frame;

    // Reads never copy.
    d.feed("MEM r 1 1 0 0\nMEM r 1 0 4096 0\n");
    d.machine->finish(d.core.now());
    CHECK(d.stats().get("cow.copies") == 0);

    d.feed("MEM w 1 1 0 0\n");
    d.machine->finish(d.core.now());
    CHECK(d.stats().get("cow.copies") == 1);
    CHECK(d.page(kSmallA, 0)->frame == shared0);
    CHECK(d.page(kSmallB, 0)->frame != shared0);
    CHECK_FALSE(d.page(kSmallB, 0)->cow);
    CHECK(d.page(kSmallA, 1)->frame == d.page(kSmallB, 1)->frame);
    std::string why;
    CHECK(d.vbi().memory().check_invariants(&why));
  }
}

TEST_CASE("clone needs an empty target of the same class") {
  Driver d(Scenario::vbi1);
  d.feed("REQVB 1 128K -\nREQVB 1 128K -\nREQVB 1 4M -\nMEM w 1 1 0 0\n");
  d.vbi().flush_vb(kSmallB, d.core.now());
  CHECK_THROWS_AS(d.feed("CLONE 1:0 1:1\n"), LifecycleError);
  CHECK_THROWS_AS(d.feed("CLONE 1:0 2:0\n"), LifecycleError);
  CHECK_THROWS_AS(d.feed("CLONE 1:0 1:0\n"), LifecycleError);
  CHECK_THROWS_AS(d.feed("CLONE 1:0 1:7\n"), LifecycleError);
}

TEST_CASE("promote keeps the old range and serves the new one lazily") {
  Driver d(Scenario::vbi2);
  d.feed("REQVB 1 128K -\nENABLE 2:0 -\nMEM w 1 0 0x1000 0\nMEM w 1 0 0x3040 0\n");
  CHECK(d.stats().get("fault.bounds") == 0);
  d.feed("MEM r 1 0 0x100000 0\n");
  CHECK(d.stats().get("fault.bounds") == 1);

  CHECK(d.vbi().flush_vb(kSmallA, d.core.now()) == 2);
  const uint64_t f1 = d.page(kSmallA, 1)->frame;
  const uint64_t f3 = d.page(kSmallA, 3)->frame;
  const uint64_t allocated = d.stats().get("frames.allocated");
  const uint64_t zero_reads = d.stats().get("zero_line.reads");

  d.feed("PROMOTE 1 1:0 2:0\n");
  CHECK(d.page(kLarge, 1)->frame == f1);
  CHECK(d.page(kLarge, 3)->frame == f3);
  CHECK(d.vbi().memory().space(kSmallA)->ts.mappings().empty());
  CHECK(d.machine->registry().find(kLarge)->ref_count == 1);
  CHECK(d.machine->registry().find(kSmallA)->ref_count == 0);

  // The same CVT index now names the larger VB.
  std::vector<DataAccess> log;
  d.machine->set_access_log(&log);
  d.feed("MEM r 1 0 0x1000 0\nMEM r 1 0 0x100000 0\n");
  REQUIRE(log.size() == 2);
  CHECK(log[0].vb == kLarge);
  CHECK(d.stats().get("fault.bounds") == 1);
  CHECK(d.stats().get("zero_line.reads") == zero_reads + 1);
  CHECK(d.stats().get("device.data_reads") == 1);
  CHECK(d.stats().get("frames.allocated") == allocated);

  d.feed("MEM w 1 0 0x200000 0\n");
  d.machine->finish(d.core.now());
  CHECK(d.stats().get("frames.allocated") == allocated + 1);
  CHECK(d.page(kLarge, 0x200)->state == RegionState::allocated);
}

TEST_CASE("promote preconditions") {
  Driver d(Scenario::vbi1);
  d.feed("REQVB 1 128K -\nREQVB 1 128K -\nENABLE 2:0 -\nENABLE 0:0 -\n");
  CHECK_THROWS_AS(d.feed("PROMOTE 1 1:0 0:0\n"), LifecycleError);  // not larger
  CHECK_THROWS_AS(d.feed("PROMOTE 2 1:0 2:0\n"), LifecycleError);  // client not attached
  d.feed("ATTACH 2 1:0 r\n");
  CHECK_THROWS_AS(d.feed("PROMOTE 1 1:0 2:0\n"), LifecycleError);  // shared by two clients
  d.feed("DETACH 2 1:0\n");
  CHECK_THROWS_AS(d.feed("PROMOTE 1 1:1 1:0\n"), LifecycleError);  // same class
}

TEST_CASE("promote refuses a VB that shares frames with a clone") {
  Driver d(Scenario::vbi1);
  d.feed("REQVB 1 128K -\nENABLE 1:1 -\nENABLE 2:0 -\nMEM w 1 0 0 0\nCLONE 1:0 1:1\n");
  CHECK_THROWS_AS(d.feed("PROMOTE 1 1:0 2:0\n"), LifecycleError);
}

TEST_CASE("the flush before clone writes exactly the dirty lines held") {
  Driver d(Scenario::vbi2);
  d.feed("REQVB 1 4M -\nENABLE 2:1 -\n");
  std::string lines;
  for (int i = 0; i < 500; ++i) {
    lines += "MEM " + std::string(i % 3 == 0 ? "r" : "w") + " 1 0 " + std::to_string(i * 4160) + " 1\n";
  }
  d.feed(lines);
  const uint64_t dirty = d.vbi().caches().count_dirty_owner(Vbuid{2, 0, 0}.key());
  const uint64_t before = d.stats().get("device.data_writes");
  d.feed("CLONE 2:0 2:1\n");
  CHECK(dirty > 0);
  CHECK(d.stats().get("clone.flushed") == dirty);
  CHECK(d.stats().get("device.data_writes") - before == dirty);
}

TEST_CASE("disable, scrub and re-enable serve no stale data") {
  Driver d(Scenario::vbi2);
  std::string writes;
  for (int i = 0; i < 64; ++i) writes += "MEM w 1 0 " + std::to_string(i * 64) + " 0\n";
  d.feed("REQVB 1 4K -\n" + writes);
  CHECK(d.vbi().caches().count_owner(Vbuid{0, 0, 0}.key()) == 64);
  d.feed("DETACH 1 0:0\nDISABLE 0:0\n");
  CHECK(d.machine->registry().scrub_pending(Vbuid{0, 0, 0}));
  CHECK(d.stats().get("invalidations") == 64);
  CHECK(d.vbi().caches().count_owner(Vbuid{0, 0, 0}.key()) == 0);
  CHECK(d.stats().get("frames.allocated") == 0);  // dead dirty lines are dropped

  // A new request skips the VBID still being scrubbed.
  d.feed("REQVB 1 4K -\n");
  CHECK(d.machine->registry().enabled(Vbuid{0, 0, 1}));
  d.feed("ENABLE 0:0 -\nATTACH 1 0:0 rw\n");
  CHECK(d.stats().get("scrub.stall_cycles") == 1);
  const uint64_t zero = d.stats().get("zero_line.reads");
  d.feed("MEM r 1 0 0 0\n");
  CHECK(d.stats().get("zero_line.reads") == zero + 1);
  CHECK(d.stats().get("device.data_reads") == 0);
}

TEST_CASE("disable requires every client to detach first") {
  for (Scenario s : {Scenario::vbi1, Scenario::native}) {
    Driver d(s);
    d.feed("REQVB 1 4K -\n");
    CHECK_THROWS_AS(d.feed("DISABLE 0:0\n"), LifecycleError);
    d.feed("DETACH 1 0:0\nDISABLE 0:0\n");
    CHECK_THROWS_AS(d.feed("DISABLE 0:0\n"), LifecycleError);
    CHECK_THROWS_AS(d.feed("ATTACH 1 0:0 rw\n"), LifecycleError);
  }
}

TEST_CASE("baseline clone copies on write and promote remaps") {
  Driver d(Scenario::native);
  d.feed("REQVB 1 128K -\nENABLE 1:1 -\nATTACH 1 1:1 rw\nMEM w 1 0 0 0\nMEM w 1 0 8192 0\n");
  d.feed("CLONE 1:0 1:1\nMEM r 1 1 0 0\n");
  CHECK(d.stats().get("cow.copies") == 0);
  d.feed("MEM w 1 1 0 0\n");
  CHECK(d.stats().get("cow.copies") == 1);
  d.feed("MEM w 1 0 8192 0\n");
  CHECK(d.stats().get("cow.copies") == 2);

  Driver p(Scenario::native);
  p.feed("REQVB 1 128K -\nENABLE 2:0 -\nMEM w 1 0 0 0\nMEM w 1 0 4096 0\nPROMOTE 1 1:0 2:0\n");
  CHECK(p.stats().get("promote.remapped") == 2);
  const uint64_t faults = p.stats().get("page_faults");
  p.feed("MEM r 1 0 4096 0\n");
  CHECK(p.stats().get("page_faults") == faults);
  p.feed("MEM r 1 0 0x100000 0\n");
  CHECK(p.stats().get("page_faults") == faults + 1);
}
