#include <doctest.h>

#include "vbi/errors.hpp"
#include "vbi/stats.hpp"

using namespace vbi;

TEST_CASE("counters accumulate and default to zero") {
  Stats s;
  s.add("a");
  s.add("a", 4);
  CHECK(s.get("a") == 5);
  CHECK(s.get("missing") == 0);
  CHECK_FALSE(s.has("missing"));
  s.set_real("r", 1.5);
  CHECK(s.real("r") == 1.5);
  CHECK(s.real("a") == 5.0);
  CHECK_THROWS_AS(s.add("r"), Error);
}

TEST_CASE("JSON output is sorted and round trips") {
  Stats s;
  s.set("zeta", 1);
  s.set("alpha", 18446744073709551615ULL);
  s.set_real("avg_access_latency", 123.25);
  const std::string json = s.to_json({{"scenario", "vbi2"}, {"seed", "1"}});
  CHECK(json.find("\"alpha\"") < json.find("\"zeta\""));
  CHECK(json.find("\"run\"") < json.find("\"stats\""));
  std::map<std::string, std::string> meta;
  const Stats back = Stats::from_json(json, &meta);
  CHECK(meta.at("scenario") == "vbi2");
  CHECK(back.get("alpha") == 18446744073709551615ULL);
  CHECK(back.real("avg_access_latency") == 123.25);
  CHECK(back.to_json(meta) == json);
  CHECK_THROWS_AS(Stats::from_json("{not json"), ParseError);
}

TEST_CASE("CSV header and rows") {
  CHECK(Stats::csv_header() ==
        "trace,scenario,cycles,instructions,mem.accesses,cache.l3.misses,tlb.l1_4k.miss,"
        "tlb.l2.miss,walk.accesses,walk.nested_accesses,device.reads,device.writes,"
        "frames.allocated,zero_line.reads,migrations,avg_access_latency,page_faults,"
        "translate.calls");
  Stats s;
  s.set("cycles", 250);
  s.set("instructions", 1000);
  s.set_real("avg_access_latency", 0.5);
  CHECK(s.csv_row("t", "native") == "t,native,250,1000,0,0,0,0,0,0,0,0,0,0,0,0.5,0,0");
}
