#include <doctest.h>

#include "vbi/errors.hpp"
#include "vbi/hotness.hpp"

using namespace vbi;

TEST_CASE("units are whole small VBs or 4 MB chunks") {
  CHECK(unit_of(Vbuid{1, 0, 3}, 20) == UnitId{Vbuid{1, 0, 3}.key(), 0});
  CHECK(unit_of(Vbuid{4, 0, 3}, 2048 + 5) == UnitId{Vbuid{4, 0, 3}.key(), 2});
  CHECK(unit_kb(Vbuid{1, 0, 0}) == 128);
  CHECK(unit_kb(Vbuid{5, 0, 0}) == 4096);
  CHECK(unit_pages(Vbuid{4, 0, 0}, UnitId{0, 3}) == std::pair<uint64_t, uint64_t>{3072, 1024});
  CHECK(unit_pages(Vbuid{0, 0, 0}, UnitId{0, 0}) == std::pair<uint64_t, uint64_t>{0, 1});
}

TEST_CASE("policy names") {
  CHECK(parse_policy("aware") == HetPolicy::aware);
  CHECK(std::string(policy_name(HetPolicy::ideal)) == "ideal");
  CHECK_THROWS_AS(parse_policy("smart"), ConfigError);
  CHECK_THROWS_AS(HotnessTracker(HetPolicy::aware, 0, 1, 0), ConfigError);
}

TEST_CASE("aware placement fills the fast zone, then spills") {
  HotnessTracker t(HetPolicy::aware, 0, 1, 100);
  CHECK(t.place({1, 0}, Props{}, 10) == 0);
  CHECK(t.place({2, 0}, Props{}, 0) == 1);
  CHECK(t.place({3, 0}, Props{Props::latency_sensitive}, 0) == 0);
  CHECK(t.place({2, 0}, Props{}, 99) == 1);  // fixed at first placement
  t.set_zone({2, 0}, 0);
  CHECK(t.zone_of({2, 0}) == 0u);
  t.forget(2);
  CHECK_FALSE(t.zone_of({2, 0}).has_value());
}

TEST_CASE("unaware placement alternates regardless of counts") {
  HotnessTracker t(HetPolicy::unaware, 0, 1, 100);
  for (int i = 0; i < 1000; ++i) t.record({1, 0});
  CHECK(t.place({1, 0}, Props{Props::latency_sensitive}, 100) == 0);
  CHECK(t.place({2, 0}, Props{}, 100) == 1);
  CHECK(t.place({3, 0}, Props{}, 100) == 0);
}

TEST_CASE("epochs rank by density and reset") {
  HotnessTracker t(HetPolicy::aware, 0, 1, 100);
  const Vbuid small{1, 0, 0}, big{2, 0, 0};
  for (int i = 0; i < 64; ++i) t.record(unit_of(small, 0));   // 0.5 per KB
  for (int i = 0; i < 1024; ++i) t.record(unit_of(big, 0));   // 0.25 per KB
  CHECK_FALSE(t.epoch_due(99));
  CHECK(t.epoch_due(100));
  const auto ranked = t.close_epoch(250);
  REQUIRE(ranked.size() == 2);
  CHECK(ranked[0].unit.vb_key == small.key());
  CHECK(ranked[0].density == doctest::Approx(0.5));
  CHECK(ranked[1].count == 1024);
  CHECK_FALSE(t.epoch_due(299));
  CHECK(t.epoch_due(300));
  CHECK(t.close_epoch(300).empty());  // a quiet epoch ranks nothing
  CHECK(t.epochs() == 2);
  CHECK(t.totals().at(unit_of(small, 0)) == 64);
}

TEST_CASE("ideal placement follows the whole-run profile within the fast budget") {
  HotnessTracker t(HetPolicy::ideal, 0, 1, 100);
  const UnitId hot{Vbuid{1, 0, 0}.key(), 0}, warm{Vbuid{1, 0, 1}.key(), 0},
      cold{Vbuid{1, 0, 2}.key(), 0};
  t.set_profile({{hot, 1000}, {warm, 500}, {cold, 1}}, {{hot, 20}, {warm, 20}, {cold, 1}}, 30);
  CHECK(t.place(hot, {}, 0) == 0);
  CHECK(t.place(warm, {}, 100) == 1);
  CHECK(t.place(cold, {}, 100) == 0);  // still fits after warm was skipped
}
