#include "vbi/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include "toml.hpp"

#include "vbi/errors.hpp"

namespace vbi {

namespace {

class Section {
 public:
  Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (table_ == nullptr) return;
    const toml::node* node = table_->get(key);
    if (node == nullptr) return;
    if constexpr (std::is_same_v<T, bool>) {
      auto v = node->value<bool>();
      if (!v) fail(key, "expected a boolean");
      out = *v;
    } else if constexpr (std::is_floating_point_v<T>) {
      auto v = node->value<double>();
      if (!v) fail(key, "expected a number");
      out = static_cast<T>(*v);
    } else {
      auto v = node->value<int64_t>();
      if (!v || *v < 0) fail(key, "expected a non-negative integer");
      out = static_cast<T>(*v);
    }
  }

  void mark(const char* key) { seen_.insert(key); }

  void finish() const {
    if (table_ == nullptr) return;
    for (const auto& [k, v] : *table_) {
      if (!seen_.count(std::string(k.str()))) fail(std::string(k.str()).c_str(), "unknown key");
    }
  }

 private:
  [[noreturn]] void fail(const char* key, const char* what) const {
    throw ConfigError(name_ + "." + key + ": " + what);
  }

  const toml::table* table_;
  std::string name_;
  std::set<std::string> seen_;
};

const toml::table* sub(const toml::table& root, const char* name) {
  const toml::node* n = root.get(name);
  if (n == nullptr) return nullptr;
  if (!n->is_table()) throw ConfigError(std::string(name) + ": expected a table");
  return n->as_table();
}

void read_timing(const toml::table& root, const char* name, DeviceTiming& t) {
  Section s(sub(root, name), name);
  s.get("tRCD", t.tRCD);
  s.get("tRP", t.tRP);
  s.get("tRRDact", t.tRRDact);
  s.get("tRRDpre", t.tRRDpre);
  s.get("tCL", t.tCL);
  s.get("tBL", t.tBL);
  s.get("banks", t.banks);
  s.get("row_bytes", t.row_bytes);
  s.finish();
}

void read_level(const toml::table* cache, const char* name, CacheLevelConfig& c) {
  const toml::table* t = nullptr;
  if (cache != nullptr) {
    if (const toml::node* n = cache->get(name)) {
      if (!n->is_table()) throw ConfigError(std::string("cache.") + name + ": expected a table");
      t = n->as_table();
    }
  }
  Section s(t, std::string("cache.") + name);
  s.get("size_bytes", c.size_bytes);
  s.get("ways", c.ways);
  s.get("latency", c.latency);
  s.finish();
}

bool power_of_two(uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

}  // namespace

void SimConfig::validate() const {
  if (vm_mode && (vm_id < 1 || vm_id > 31)) throw ConfigError("vm_id must be 1..31 in VM mode");
  if (!vm_mode && vm_id != 0) throw ConfigError("vm_id requires vm_mode");
  if (core.issue_width == 0 || core.max_outstanding == 0) throw ConfigError("core widths must be positive");
  if (memory.pool_bytes < 4096 || memory.pool_bytes % 4096 != 0) {
    throw ConfigError("memory.pool_bytes must be a positive multiple of 4096");
  }
  if (memory.cpu_cycles_per_mem_cycle == 0) throw ConfigError("memory.cpu_cycles_per_mem_cycle must be positive");
  for (const auto& l : cache.levels) {
    if (l.ways == 0 || l.size_bytes % (64 * l.ways) != 0) throw ConfigError("cache geometry must divide into sets");
  }
  for (const DeviceTiming* t : {&dram, &pcm, &tl_fast, &tl_slow}) {
    if (t->banks == 0 || !power_of_two(t->row_bytes)) throw ConfigError("device banks and row size must be valid");
  }
  if (tlb.l2_ways == 0 || tlb.l2_entries % tlb.l2_ways != 0) throw ConfigError("tlb.l2 geometry invalid");
  auto frac_ok = [](double f) { return f > 0.0 && f < 1.0; };
  if (!frac_ok(hetero.pcm_dram_fast_fraction) || !frac_ok(hetero.tldram_fast_fraction)) {
    throw ConfigError("hetero fractions must lie in (0, 1)");
  }
  if (hetero.epoch_cycles == 0) throw ConfigError("hetero.epoch_cycles must be positive");
}

SimConfig parse_config(const std::string& text, const std::string& source) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    throw ParseError(e.source().begin.line, std::string(e.description()));
  }

  SimConfig c;
  Section top(&root, source);
  top.get("seed", c.seed);
  top.get("vm_mode", c.vm_mode);
  top.get("vm_id", c.vm_id);
  for (const char* name : {"core", "cache", "tlb", "protection", "registry", "memory", "dram", "pcm",
                           "tl_fast", "tl_slow", "hetero"}) {
    top.mark(name);
  }
  top.finish();

  {
    Section s(sub(root, "core"), "core");
    s.get("issue_width", c.core.issue_width);
    s.get("max_outstanding", c.core.max_outstanding);
    s.finish();
  }
  {
    const toml::table* cache = sub(root, "cache");
    Section s(cache, "cache");
    s.mark("l1");
    s.mark("l2");
    s.mark("l3");
    s.finish();
    read_level(cache, "l1", c.cache.levels[0]);
    read_level(cache, "l2", c.cache.levels[1]);
    read_level(cache, "l3", c.cache.levels[2]);
  }
  {
    Section s(sub(root, "tlb"), "tlb");
    s.get("l1_4k_entries", c.tlb.l1_4k_entries);
    s.get("l1_2m_entries", c.tlb.l1_2m_entries);
    s.get("l2_entries", c.tlb.l2_entries);
    s.get("l2_ways", c.tlb.l2_ways);
    s.get("l2_latency", c.tlb.l2_latency);
    s.get("vb_direct_entries", c.tlb.vb_direct_entries);
    s.get("pwc_entries", c.tlb.pwc_entries);
    s.finish();
  }
  {
    Section s(sub(root, "protection"), "protection");
    s.get("cvt_cache_slots", c.protection.cvt_cache_slots);
    s.get("max_entries", c.protection.max_entries);
    s.get("cvt_miss_cycles", c.protection.cvt_miss_cycles);
    s.finish();
  }
  {
    Section s(sub(root, "registry"), "registry");
    s.get("vit_cache_entries", c.registry.vit_cache_entries);
    s.get("scrub_lines_per_cycle", c.registry.scrub_lines_per_cycle);
    s.finish();
  }
  {
    Section s(sub(root, "memory"), "memory");
    s.get("pool_bytes", c.memory.pool_bytes);
    s.get("cpu_cycles_per_mem_cycle", c.memory.cpu_cycles_per_mem_cycle);
    s.get("page_fault_cycles", c.memory.page_fault_cycles);
    s.get("swap_cycles", c.memory.swap_cycles);
    s.get("mtl_tlb_hit_cycles", c.memory.mtl_tlb_hit_cycles);
    s.get("drain_at_end", c.memory.drain_at_end);
    s.get("record_commands", c.memory.record_commands);
    s.finish();
  }
  read_timing(root, "dram", c.dram);
  read_timing(root, "pcm", c.pcm);
  read_timing(root, "tl_fast", c.tl_fast);
  read_timing(root, "tl_slow", c.tl_slow);
  {
    Section s(sub(root, "hetero"), "hetero");
    s.get("pcm_dram_fast_fraction", c.hetero.pcm_dram_fast_fraction);
    s.get("tldram_fast_fraction", c.hetero.tldram_fast_fraction);
    s.get("epoch_cycles", c.hetero.epoch_cycles);
    s.finish();
  }
  c.validate();
  return c;
}

SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string dump_config(const SimConfig& c) {
  toml::table root;
  root.insert("seed", static_cast<int64_t>(c.seed));
  root.insert("vm_mode", c.vm_mode);
  root.insert("vm_id", static_cast<int64_t>(c.vm_id));
  auto i64 = [](auto v) { return static_cast<int64_t>(v); };
  root.insert("core", toml::table{{"issue_width", i64(c.core.issue_width)},
                                  {"max_outstanding", i64(c.core.max_outstanding)}});
  toml::table cache;
  const char* names[] = {"l1", "l2", "l3"};
  for (int l = 0; l < 3; ++l) {
    const auto& lv = c.cache.levels[l];
    cache.insert(names[l], toml::table{{"size_bytes", i64(lv.size_bytes)},
                                       {"ways", i64(lv.ways)},
                                       {"latency", i64(lv.latency)}});
  }
  root.insert("cache", std::move(cache));
  root.insert("tlb", toml::table{{"l1_4k_entries", i64(c.tlb.l1_4k_entries)},
                                 {"l1_2m_entries", i64(c.tlb.l1_2m_entries)},
                                 {"l2_entries", i64(c.tlb.l2_entries)},
                                 {"l2_ways", i64(c.tlb.l2_ways)},
                                 {"l2_latency", i64(c.tlb.l2_latency)},
                                 {"vb_direct_entries", i64(c.tlb.vb_direct_entries)},
                                 {"pwc_entries", i64(c.tlb.pwc_entries)}});
  root.insert("protection", toml::table{{"cvt_cache_slots", i64(c.protection.cvt_cache_slots)},
                                        {"max_entries", i64(c.protection.max_entries)},
                                        {"cvt_miss_cycles", i64(c.protection.cvt_miss_cycles)}});
  root.insert("registry", toml::table{{"vit_cache_entries", i64(c.registry.vit_cache_entries)},
                                      {"scrub_lines_per_cycle", i64(c.registry.scrub_lines_per_cycle)}});
  root.insert("memory", toml::table{{"pool_bytes", i64(c.memory.pool_bytes)},
                                    {"cpu_cycles_per_mem_cycle", i64(c.memory.cpu_cycles_per_mem_cycle)},
                                    {"page_fault_cycles", i64(c.memory.page_fault_cycles)},
                                    {"swap_cycles", i64(c.memory.swap_cycles)},
                                    {"mtl_tlb_hit_cycles", i64(c.memory.mtl_tlb_hit_cycles)},
                                    {"drain_at_end", c.memory.drain_at_end},
                                    {"record_commands", c.memory.record_commands}});
  auto timing = [&](const DeviceTiming& t) {
    return toml::table{{"tRCD", i64(t.tRCD)},       {"tRP", i64(t.tRP)}, {"tRRDact", i64(t.tRRDact)},
                       {"tRRDpre", i64(t.tRRDpre)}, {"tCL", i64(t.tCL)}, {"tBL", i64(t.tBL)},
                       {"banks", i64(t.banks)},     {"row_bytes", i64(t.row_bytes)}};
  };
  root.insert("dram", timing(c.dram));
  root.insert("pcm", timing(c.pcm));
  root.insert("tl_fast", timing(c.tl_fast));
  root.insert("tl_slow", timing(c.tl_slow));
  root.insert("hetero", toml::table{{"pcm_dram_fast_fraction", c.hetero.pcm_dram_fast_fraction},
                                    {"tldram_fast_fraction", c.hetero.tldram_fast_fraction},
                                    {"epoch_cycles", i64(c.hetero.epoch_cycles)}});
  std::ostringstream out;
  out << root << "\n";
  return out.str();
}

}  // namespace vbi
