#include <doctest.h>

#include "vbi/config.hpp"
#include "vbi/errors.hpp"

using namespace vbi;

TEST_CASE("defaults match the modeled machine") {
  const SimConfig c;
  CHECK(c.core.issue_width == 4);
  CHECK(c.core.max_outstanding == 8);
  CHECK(c.cache.levels[0].size_bytes == 32 * 1024);
  CHECK(c.cache.levels[0].ways == 8);
  CHECK(c.cache.levels[0].latency == 4);
  CHECK(c.cache.levels[1].size_bytes == 256 * 1024);
  CHECK(c.cache.levels[1].latency == 8);
  CHECK(c.cache.levels[2].size_bytes == 8 * 1024 * 1024);
  CHECK(c.cache.levels[2].ways == 16);
  CHECK(c.cache.levels[2].latency == 31);
  CHECK(c.tlb.l1_4k_entries == 64);
  CHECK(c.tlb.l1_2m_entries == 32);
  CHECK(c.tlb.l2_entries == 512);
  CHECK(c.tlb.l2_ways == 4);
  CHECK(c.tlb.pwc_entries == 32);
  CHECK(c.protection.cvt_cache_slots == 64);
  CHECK(c.memory.pool_bytes == uint64_t{2} << 30);
  CHECK(c.hetero.epoch_cycles == 10'000'000);
  CHECK(c.hetero.pcm_dram_fast_fraction == 0.25);
  CHECK(c.hetero.tldram_fast_fraction == 0.125);
  CHECK(c.pcm.tRP == 60);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("dump and parse round trip") {
  SimConfig c;
  c.seed = 77;
  c.memory.pool_bytes = 64 << 20;
  c.cache.levels[1].ways = 4;
  c.pcm.tRCD = 30;
  c.hetero.pcm_dram_fast_fraction = 0.5;
  c.memory.record_commands = true;
  const std::string text = dump_config(c);
  const SimConfig back = parse_config(text);
  CHECK(back.seed == 77);
  CHECK(back.memory.pool_bytes == 64 << 20);
  CHECK(back.cache.levels[1].ways == 4);
  CHECK(back.pcm.tRCD == 30);
  CHECK(back.hetero.pcm_dram_fast_fraction == 0.5);
  CHECK(back.memory.record_commands);
  CHECK(dump_config(back) == text);
}

TEST_CASE("partial files keep defaults") {
  const SimConfig c = parse_config("[memory]\npool_bytes = 1048576\n");
  CHECK(c.memory.pool_bytes == 1048576);
  CHECK(c.cache.levels[2].latency == 31);
}

TEST_CASE("unknown keys and sections are rejected") {
  CHECK_THROWS_AS(parse_config("[memory]\npool_size = 5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[gpu]\ncores = 5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("bogus = 1\n"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[memory]\npool_size = 5\n"), doctest::Contains("pool_size"),
                       ConfigError);
}

TEST_CASE("syntax errors carry a line number") {
  try {
    parse_config("seed = 1\n[memory\npool_bytes = 4096\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("validation") {
  CHECK_THROWS_AS(parse_config("vm_mode = true\n"), ConfigError);
  CHECK_NOTHROW(parse_config("vm_mode = true\nvm_id = 3\n"));
  CHECK_THROWS_AS(parse_config("vm_id = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[memory]\npool_bytes = 1000\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[cache.l1]\nways = 7\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[hetero]\ntldram_fast_fraction = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[core]\nissue_width = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[memory]\npool_bytes = \"big\"\n"), ConfigError);
}
