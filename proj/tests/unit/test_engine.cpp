#include <doctest.h>

#include "vbi/engine.hpp"
#include "vbi/errors.hpp"
#include "vbi/generator.hpp"
#include "vbi/x86_machine.hpp"

using namespace vbi;

namespace {

// Every access completes a fixed time after issue.
class FixedLatency : public Machine {
 public:
  FixedLatency(uint64_t latency, bool serialize = false)
      : Machine(SimConfig{}), latency_(latency), serialize_(serialize) {}

  AccessResult access(const TraceEvent&, uint64_t now) override {
    issued.push_back(now);
    return {now + latency_, serialize_, false};
  }
  uint64_t lifecycle(const TraceEvent&, uint64_t now) override { return now + 1000; }
  void finish(uint64_t) override {}

  std::vector<uint64_t> issued;

 private:
  uint64_t latency_;
  bool serialize_;
};

Trace mems(int n, uint64_t icount = 0) {
  Trace t;
  for (int i = 0; i < n; ++i) {
    TraceEvent ev;
    ev.icount = icount;
    t.events.push_back(ev);
  }
  return t;
}

SimConfig small_config() {
  SimConfig c;
  c.memory.pool_bytes = 256 << 20;
  return c;
}

bool all_zero(const Stats& s) {
  for (const auto& [k, v] : s.values()) {
    if (s.real(k) != 0.0) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("scenario names") {
  CHECK(all_scenarios().size() == 11);
  for (Scenario s : all_scenarios()) CHECK(parse_scenario(scenario_name(s)) == s);
  CHECK(parse_scenario("virtual") == Scenario::virtual4k);
  CHECK_THROWS_AS(parse_scenario("vbi3"), ConfigError);
  CHECK(scenario_label(Scenario::het_tldram, HetPolicy::ideal) == "het_tldram:ideal");
  CHECK(scenario_label(Scenario::vbi2, HetPolicy::ideal) == "vbi2");
}

TEST_CASE("core model: instructions only") {
  FixedLatency m(100);
  Trace t;
  TraceEvent ev;
  ev.kind = EventKind::instr;
  ev.icount = 1000;
  t.events.push_back(ev);
  const Replay r = replay(m, t, CoreConfig{});
  CHECK(r.cycles == 250);
  CHECK(r.instructions == 1000);
}

TEST_CASE("core model: eight accesses overlap, the ninth waits for the oldest") {
  FixedLatency m(100);
  const Replay r = replay(m, mems(16), CoreConfig{});
  CHECK(r.instructions == 16);
  CHECK(r.cycles == 203);
  CHECK(m.issued[7] == 2);
  CHECK(m.issued[8] == 100);
  CHECK(m.issued[9] == 101);

  FixedLatency wide(100);
  CHECK(replay(wide, mems(16), CoreConfig{4, 16}).cycles == 104);
}

TEST_CASE("core model: serializing accesses do not overlap") {
  FixedLatency m(100, true);
  const Replay r = replay(m, mems(3), CoreConfig{});
  // The stall absorbs the issue slot of the trapping access.
  CHECK(m.issued == std::vector<uint64_t>{0, 100, 200});
  CHECK(r.cycles == 300);
}

TEST_CASE("empty trace: zero cycles and zero counters in every scenario") {
  for (Scenario s : all_scenarios()) {
    CAPTURE(scenario_name(s));
    const RunResult r = run(Trace{}, small_config(), s);
    CHECK(r.stats.get("cycles") == 0);
    CHECK(all_zero(r.stats));
  }
}

TEST_CASE("1000 non-memory instructions take 250 cycles in every scenario") {
  const Trace t = parse_trace("#vbi-trace v1\nINSTR 1000\n");
  for (Scenario s : all_scenarios()) {
    CAPTURE(scenario_name(s));
    const RunResult r = run(t, small_config(), s);
    CHECK(r.stats.get("cycles") == 250);
    CHECK(r.stats.get("instructions") == 1000);
  }
}

TEST_CASE("cold reads: delayed allocation beats perfect TLB on device traffic") {
  const Trace t = generate_trace("touch:reads=2000,writes=50", 3);
  const RunResult v = run(t, small_config(), Scenario::vbi2);
  const RunResult p = run(t, small_config(), Scenario::perfect_tlb);
  CHECK(v.stats.get("frames.allocated") == 50);
  // Write misses to unbacked regions also fetch a zero line.
  CHECK(v.stats.get("zero_line.reads") == 2050);
  CHECK(v.stats.get("device.data_reads") == 0);
  CHECK(v.stats.get("device.accesses") < p.stats.get("device.accesses"));
}

TEST_CASE("no writes: delayed allocation allocates nothing") {
  const Trace t = generate_trace("uniform:vbs=8,accesses=20000,write=0", 5);
  for (Scenario s : {Scenario::vbi2, Scenario::vbifull}) {
    const RunResult r = run(t, small_config(), s);
    CHECK(r.stats.get("frames.allocated") == 0);
    CHECK(r.stats.get("device.data_reads") == 0);
  }
  CHECK(run(t, small_config(), Scenario::vbi1).stats.get("frames.allocated") > 0);
}

TEST_CASE("baseline layout packs VBs from 0x10000 in preamble order") {
  const Trace t = parse_trace("#vbi-trace v1\nREQVB 1 4K -\nREQVB 1 4K -\nREQVB 2 128K -\n");
  auto layout = [&](X86Mode mode) {
    X86Options o;
    o.mode = mode;
    X86Machine m(small_config(), o);
    replay(m, t, CoreConfig{});
    return std::vector<uint64_t>{m.range_base(1, Vbuid{0, 0, 0}), m.range_base(1, Vbuid{0, 0, 1}),
                                 m.range_base(2, Vbuid{1, 0, 0})};
  };
  CHECK(layout(X86Mode::native4k) == std::vector<uint64_t>{0x10000, 0x11000, 0x10000});
  CHECK(layout(X86Mode::native2m) == std::vector<uint64_t>{0x200000, 0x400000, 0x200000});
  CHECK(layout(X86Mode::nested2m)[1] % (2 << 20) == 0);
}

TEST_CASE("native and VBI replay the same data accesses") {
  const Trace t = generate_trace("skew:vbs=6,size=256K,accesses=20000,write=0.3", 7);
  auto log_of = [&](Scenario s) {
    auto m = make_machine(small_config(), s);
    std::vector<DataAccess> log;
    m->set_access_log(&log);
    replay(*m, t, CoreConfig{});
    return log;
  };
  const auto native = log_of(Scenario::native);
  CHECK(native.size() == 20000);
  CHECK(log_of(Scenario::vbi1) == native);
  CHECK(log_of(Scenario::vbifull) == native);
  CHECK(log_of(Scenario::virtual4k) == native);
}

TEST_CASE("native and perfect TLB move the same data") {
  const Trace t = generate_trace("uniform:vbs=4,size=4M,accesses=30000,write=0.3", 2);
  const RunResult n = run(t, small_config(), Scenario::native);
  const RunResult p = run(t, small_config(), Scenario::perfect_tlb);
  CHECK(n.stats.get("device.data_reads") == p.stats.get("device.data_reads"));
  CHECK(n.stats.get("device.data_writes") == p.stats.get("device.data_writes"));
  CHECK(p.stats.get("walk.accesses") == 0);
  CHECK(n.stats.get("walk.accesses") > 0);
}

TEST_CASE("scenario ordering on a skewed trace") {
  const Trace t = generate_trace("skew:vbs=10,accesses=30000,write=0.2", 1);
  const SimConfig c = small_config();
  const uint64_t perfect = run(t, c, Scenario::perfect_tlb).stats.get("cycles");
  const uint64_t native = run(t, c, Scenario::native).stats.get("cycles");
  const uint64_t virt = run(t, c, Scenario::virtual4k).stats.get("cycles");
  CHECK(perfect <= native);
  CHECK(native <= virt);
  const RunResult vivt = run(t, c, Scenario::vivt);
  CHECK(vivt.stats.get("translate.calls") <= vivt.stats.get("llc.misses"));
  CHECK(run(t, c, Scenario::vbifull).stats.get("walk.accesses") <=
        run(t, c, Scenario::vbi1).stats.get("walk.accesses"));
}

TEST_CASE("VBI translation happens only on LLC misses and writebacks") {
  const Trace t = generate_trace("skew:vbs=10,accesses=30000,write=0.2", 4);
  const RunResult r = run(t, small_config(), Scenario::vbi1);
  CHECK(r.stats.get("translate.calls") ==
        r.stats.get("llc.misses") + r.stats.get("writeback.translate_calls"));
}

TEST_CASE("runs are deterministic") {
  const Trace t = generate_trace("chase:vbs=3,accesses=5000,nodes=2000,write=0.1", 8);
  for (Scenario s : all_scenarios()) {
    CAPTURE(scenario_name(s));
    CHECK(run(t, small_config(), s).json() == run(t, small_config(), s).json());
  }
}

TEST_CASE("lifecycle violations name the offending event") {
  const Trace t = parse_trace("#vbi-trace v1\nREQVB 1 4K -\nINSTR 5\nDISABLE 0:0\n");
  for (Scenario s : {Scenario::vbi2, Scenario::native}) {
    CHECK_THROWS_WITH_AS(run(t, small_config(), s), doctest::Contains("event 2 (line 4) DISABLE"),
                         LifecycleError);
  }
  const Trace bad_index = parse_trace("#vbi-trace v1\nREQVB 1 4K -\nMEM r 1 0 4096 0\n");
  const RunResult r = run(bad_index, small_config(), Scenario::vbi1);
  CHECK(r.stats.get("fault.bounds") == 1);
}
