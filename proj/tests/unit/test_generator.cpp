#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include "vbi/errors.hpp"
#include "vbi/generator.hpp"

using namespace vbi;

namespace {

std::string text_of(const Trace& t) {
  std::ostringstream out;
  write_trace(out, t);
  return out.str();
}

std::map<uint32_t, uint64_t> per_vb(const Trace& t) {
  std::map<uint32_t, uint64_t> n;
  for (const TraceEvent& e : t.events) {
    if (e.kind == EventKind::mem) ++n[e.cvt_index];
  }
  return n;
}

}  // namespace

TEST_CASE("generator spec strings") {
  const GeneratorSpec s = GeneratorSpec::parse("skew:vbs=10,hot=0.9");
  CHECK(s.name == "skew");
  CHECK(s.params.at("vbs") == "10");
  CHECK(GeneratorSpec::parse(s.to_string()).params == s.params);
  CHECK(GeneratorSpec::parse("uniform").params.empty());
  CHECK_THROWS_AS(GeneratorSpec::parse(":x=1"), ConfigError);
  CHECK_THROWS_AS(GeneratorSpec::parse("skew:vbs"), ConfigError);
}

TEST_CASE("same generator spec and seed give byte-identical traces") {
  for (const char* spec : {"uniform:accesses=5000,write=0.3", "skew:accesses=5000",
                           "stream:accesses=5000,write=0.5", "chase:accesses=5000,nodes=500",
                           "touch:reads=500,writes=50"}) {
    INFO(std::string(spec));
    CHECK(text_of(generate_trace(spec, 4)) == text_of(generate_trace(spec, 4)));
    CHECK(text_of(generate_trace(spec, 4)) != text_of(generate_trace(spec, 5)));
  }
}

TEST_CASE("90/10 skew over 10 VBs puts at least 89% of accesses on the hot VB") {
  const Trace t = generate_trace("skew:vbs=10,hot=0.9,hot_vbs=0.1,accesses=1000000", 1);
  const auto n = per_vb(t);
  uint64_t top = 0, total = 0;
  for (const auto& [vb, c] : n) {
    top = std::max(top, c);
    total += c;
  }
  CHECK(total == 1000000);
  CHECK(static_cast<double>(top) / static_cast<double>(total) >= 0.89);
}

TEST_CASE("preamble requests one VB per index before any access") {
  const Trace t = generate_trace("uniform:vbs=7,accesses=100,size=128K", 2);
  for (int i = 0; i < 7; ++i) {
    CHECK(t.events[static_cast<std::size_t>(i)].kind == EventKind::reqvb);
    CHECK(t.events[static_cast<std::size_t>(i)].size == 128 * 1024);
  }
  for (std::size_t i = 7; i < t.events.size(); ++i) {
    CHECK(t.events[i].kind == EventKind::mem);
    CHECK(t.events[i].cvt_index < 7);
    CHECK(t.events[i].offset < 128 * 1024);
    CHECK(t.events[i].offset % 64 == 0);
  }
}

TEST_CASE("write fraction") {
  auto writes = [](const char* spec) {
    uint64_t w = 0;
    for (const TraceEvent& e : generate_trace(spec, 3).events) w += e.kind == EventKind::mem && e.write;
    return w;
  };
  CHECK(writes("uniform:accesses=10000,write=0") == 0);
  CHECK(writes("uniform:accesses=10000,write=1") == 10000);
  const uint64_t quarter = writes("uniform:accesses=10000,write=0.25");
  CHECK(quarter > 2300);
  CHECK(quarter < 2700);
}

TEST_CASE("touch reads distinct regions and writes distinct regions") {
  const Trace t = generate_trace("touch:reads=1000,writes=100", 9);
  std::set<uint64_t> read_pages, write_pages;
  for (const TraceEvent& e : t.events) {
    if (e.kind != EventKind::mem) continue;
    (e.write ? write_pages : read_pages).insert(e.offset >> 12);
    CHECK(e.cvt_index == (e.write ? 1u : 0u));
  }
  CHECK(read_pages.size() == 1000);
  CHECK(write_pages.size() == 100);
}

TEST_CASE("stream and chase patterns") {
  const Trace s = generate_trace("stream:vbs=2,accesses=6,size=128,stride=64", 1);
  std::vector<uint64_t> offsets;
  for (const TraceEvent& e : s.events) {
    if (e.kind == EventKind::mem) offsets.push_back(e.offset);
  }
  CHECK(offsets == std::vector<uint64_t>{0, 0, 64, 64, 0, 0});

  const Trace c = generate_trace("chase:vbs=1,nodes=10,accesses=30,size=64K", 1);
  std::vector<uint64_t> seq;
  for (const TraceEvent& e : c.events) {
    if (e.kind == EventKind::mem) seq.push_back(e.offset);
  }
  for (std::size_t i = 10; i < seq.size(); ++i) CHECK(seq[i] == seq[i - 10]);
  CHECK(std::set<uint64_t>(seq.begin(), seq.end()).size() == 10);
}

TEST_CASE("bad parameters are rejected") {
  CHECK_THROWS_AS(generate_trace("skew:hot=1.5", 1), ConfigError);
  CHECK_THROWS_AS(generate_trace("uniform:write=-0.1", 1), ConfigError);
  CHECK_THROWS_AS(generate_trace("uniform:vbs=0", 1), ConfigError);
  CHECK_THROWS_AS(generate_trace("uniform:vbs=abc", 1), ConfigError);
  CHECK_THROWS_AS(generate_trace("uniform:colour=red", 1), ConfigError);
  CHECK_THROWS_AS(generate_trace("zipf", 1), ConfigError);
  CHECK_THROWS_AS(generate_trace("touch:lines=65", 1), ConfigError);
}
