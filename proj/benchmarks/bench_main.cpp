#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "vbi/cache.hpp"
#include "vbi/engine.hpp"
#include "vbi/frame_pool.hpp"
#include "vbi/generator.hpp"
#include "vbi/translation.hpp"

using namespace vbi;

static void BM_FramePoolAllocFree(benchmark::State& state) {
  FramePool pool(uint64_t{1} << 18);
  std::mt19937_64 rng(1);
  std::vector<std::pair<uint64_t, unsigned>> live;
  for (auto _ : state) {
    if (live.size() < 4096 && (live.empty() || rng() % 2)) {
      const unsigned order = static_cast<unsigned>(rng() % 4);
      if (auto f = pool.alloc(order)) live.emplace_back(*f, order);
    } else {
      const std::size_t i = rng() % live.size();
      pool.free(live[i].first);
      live[i] = live.back();
      live.pop_back();
    }
  }
}
BENCHMARK(BM_FramePoolAllocFree);

static void BM_CacheProbeFill(benchmark::State& state) {
  CacheHierarchy caches;
  std::mt19937_64 rng(2);
  std::vector<Eviction> writebacks;
  const uint64_t lines = static_cast<uint64_t>(state.range(0));
  for (auto _ : state) {
    const uint64_t line = rng() % lines;
    const bool write = rng() % 4 == 0;
    if (!caches.probe(line, write, writebacks)) caches.fill(line, LineMeta{}, write, writebacks);
    writebacks.clear();
  }
}
BENCHMARK(BM_CacheProbeFill)->Arg(1 << 12)->Arg(1 << 20);

static void BM_ColdWalk(benchmark::State& state) {
  const unsigned size_id = static_cast<unsigned>(state.range(0));
  MetadataArena arena(uint64_t{1} << 40);
  TranslationStructure ts(size_class(size_id), choose_structure(size_class(size_id)), arena);
  std::mt19937_64 rng(3);
  const uint64_t pages = std::min<uint64_t>(size_class(size_id).size_bytes / kPageSize, uint64_t{1} << 20);
  for (uint64_t p = 0; p < pages; p += 97) ts.map(p, {RegionState::allocated, p, false});
  VbiTranslator t(TlbConfig{}, AddressingMode{});
  for (auto _ : state) {
    const uint64_t page = (rng() % pages) / 97 * 97;
    benchmark::DoNotOptimize(t.translate(Vbuid{size_id, 0, 1}, page * kPageSize, ts));
  }
}
BENCHMARK(BM_ColdWalk)->Arg(3)->Arg(5)->Arg(7);

static void BM_Replay(benchmark::State& state) {
  const Scenario s = static_cast<Scenario>(state.range(0));
  const Trace t = generate_trace("skew:vbs=10,accesses=50000,write=0.2", 1);
  SimConfig c;
  c.memory.pool_bytes = 256 << 20;
  for (auto _ : state) benchmark::DoNotOptimize(run(t, c, s));
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * t.events.size()));
  state.SetLabel(scenario_name(s));
}
BENCHMARK(BM_Replay)
    ->Arg(static_cast<int>(Scenario::native))
    ->Arg(static_cast<int>(Scenario::vbi1))
    ->Arg(static_cast<int>(Scenario::vbifull))
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
