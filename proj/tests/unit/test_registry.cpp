#include <doctest.h>

#include "vbi/errors.hpp"
#include "vbi/registry.hpp"

using namespace vbi;

TEST_CASE("props parse by name, alias and mask") {
  CHECK(Props::parse("-").bits() == 0);
  CHECK(Props::parse("ro|lat").bits() == (Props::read_only | Props::latency_sensitive));
  CHECK(Props::parse("read_only|code").bits() == (Props::read_only | Props::code));
  CHECK(Props::parse("0x22").bits() == 0x22);
  CHECK(Props::parse("34").bits() == 34);
  CHECK_THROWS_AS(Props::parse("0x100"), ConfigError);
  CHECK_THROWS_AS(Props::parse("hot"), ConfigError);
  CHECK(Props::parse(Props{0xff}.to_string()).bits() == 0xff);
}

TEST_CASE("enable and query") {
  VbRegistry r;
  const Vbuid vb = r.pick_free(1);
  CHECK(vb == Vbuid{1, 0, 0});
  r.enable_vb(vb, Props{Props::persistent});
  REQUIRE(r.find(vb) != nullptr);
  CHECK(r.find(vb)->enabled);
  CHECK(r.find(vb)->ref_count == 0);
  CHECK(r.find(vb)->props.has(Props::persistent));
  CHECK(r.pick_free(1) == Vbuid{1, 0, 1});
  CHECK_THROWS_AS(r.enable_vb(vb, {}), LifecycleError);
}

TEST_CASE("per-class tables are independent") {
  VbRegistry r;
  r.enable_vb(Vbuid{7, 0, 0}, {});
  CHECK(r.table_length(7) == 1);
  for (unsigned c = 0; c < 7; ++c) CHECK(r.table_length(c) == 0);
  CHECK(r.pick_free(0) == Vbuid{0, 0, 0});
}

TEST_CASE("disable requires zero references and trims the table") {
  VbRegistry r;
  const Vbuid a{2, 0, 0}, b{2, 0, 1};
  r.enable_vb(a, {});
  r.enable_vb(b, {});
  r.acquire(b);
  CHECK_THROWS_AS(r.disable_vb(b, 0), LifecycleError);
  r.release(b);
  r.disable_vb(b, 0);
  CHECK(r.table_length(2) == 1);
  CHECK_FALSE(r.enabled(b));
  CHECK_THROWS_AS(r.disable_vb(b, 0), LifecycleError);
}

TEST_CASE("VBID range and VM checks") {
  VbRegistry r;
  CHECK_THROWS_AS(r.enable_vb(Vbuid{7, 0, uint64_t{1} << 14}, {}), LifecycleError);
  VbRegistry vm(AddressingMode{true}, 3);
  CHECK(vm.pick_free(4) == Vbuid{4, 3, 0});
  CHECK_THROWS_AS(vm.enable_vb(Vbuid{4, 2, 0}, {}), LifecycleError);
  CHECK_THROWS_AS(VbRegistry(AddressingMode{true}, 0), ConfigError);
  CHECK_THROWS_AS(VbRegistry(AddressingMode{false}, 1), ConfigError);
}

TEST_CASE("VIT entry addresses: one 1 GB window per class, 16 B entries") {
  VbRegistry r;
  const uint64_t base = uint64_t{4} << 30;
  CHECK(r.entry_address(Vbuid{0, 0, 0}, base) == base);
  CHECK(r.entry_address(Vbuid{0, 0, 3}, base) == base + 48);
  CHECK(r.entry_address(Vbuid{5, 0, 2}, base) == base + (uint64_t{5} << 30) + 32);
}

TEST_CASE("VIT cache is LRU over 64 entries") {
  VitCache c(64);
  for (uint64_t i = 0; i < 64; ++i) CHECK_FALSE(c.lookup(Vbuid{0, 0, i}));
  for (uint64_t i = 0; i < 64; ++i) CHECK(c.lookup(Vbuid{0, 0, i}));
  CHECK_FALSE(c.lookup(Vbuid{0, 0, 64}));  // evicts VBID 0
  CHECK_FALSE(c.lookup(Vbuid{0, 0, 0}));
  CHECK(c.lookup(Vbuid{0, 0, 2}));
  c.invalidate(Vbuid{0, 0, 2});
  CHECK_FALSE(c.lookup(Vbuid{0, 0, 2}));
}

TEST_CASE("scrub blocks reuse of a VBID until its lines are cleared") {
  VbRegistry r(AddressingMode{}, 0, 64, 64);
  const Vbuid vb{0, 0, 0};
  r.enable_vb(vb, {});
  r.disable_vb(vb, 130);
  CHECK(r.scrub_pending(vb));
  CHECK_THROWS_AS(r.enable_vb(vb, {}), LifecycleError);
  CHECK(r.pick_free(0) == Vbuid{0, 0, 1});
  CHECK(r.scrub_queue().cycles_until_done(vb) == 3);  // ceil(130 / 64)
  CHECK(r.scrub_queue().advance(2).empty());
  CHECK(r.scrub_queue().cycles_until_done(vb) == 1);
  const auto done = r.scrub_queue().advance(1);
  REQUIRE(done.size() == 1);
  CHECK(done[0] == vb);
  r.enable_vb(vb, {});
  CHECK(r.enabled(vb));
}

TEST_CASE("scrub jobs finish in FIFO order") {
  ScrubQueue q(10);
  q.push(Vbuid{0, 0, 1}, 15);
  q.push(Vbuid{0, 0, 2}, 5);
  CHECK(q.cycles_until_done(Vbuid{0, 0, 2}) == 2);
  auto d = q.advance(1);
  CHECK(d.empty());
  d = q.advance(1);
  CHECK(d.size() == 2);
  CHECK(q.empty());
}
