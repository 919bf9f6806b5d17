#include "vbi/machine.hpp"

#include "vbi/errors.hpp"

namespace vbi {

void report_memory(const MemorySystem& mem, bool audit, Stats& s) {
  uint64_t reads = 0, writes = 0;
  for (unsigned d = 0; d < mem.device_count(); ++d) {
    const MemoryDevice& dev = mem.device(d);
    const std::string p = std::string("device.") + device_name(dev.kind()) + ".";
    const DeviceStats& ds = dev.stats();
    s.set(p + "reads", ds.reads);
    s.set(p + "writes", ds.writes);
    s.set(p + "row_hits", ds.row_hits);
    s.set(p + "row_conflicts", ds.row_conflicts);
    s.set(p + "row_empty", ds.row_empty);
    if (audit) s.set(p + "timing_violations", audit_commands(dev.commands(), dev.timing()).size());
    reads += ds.reads;
    writes += ds.writes;
  }
  s.set("device.reads", reads);
  s.set("device.writes", writes);
  s.set("device.accesses", reads + writes);
}

Machine::Machine(const SimConfig& cfg)
    : cfg_(cfg),
      registry_(AddressingMode{cfg.vm_mode}, static_cast<uint8_t>(cfg.vm_id), cfg.registry.vit_cache_entries,
                cfg.registry.scrub_lines_per_cycle),
      protection_(registry_, cfg.protection.cvt_cache_slots, cfg.protection.max_entries) {}

void Machine::advance(uint64_t cycles) {
  if (cycles == 0 || registry_.scrub_queue().empty()) return;
  counters_.add("scrub.completed", registry_.scrub_queue().advance(cycles).size());
}

Vbuid Machine::request_vb(const TraceEvent& ev) {
  const SizeClass cls = class_for_request(ev.size);
  const Vbuid vb = registry_.pick_free(cls.size_id);
  registry_.enable_vb(vb, ev.props);
  return vb;
}

void Machine::check_disable(const Vbuid& vb) const {
  const VitEntry* e = registry_.find(vb);
  if (e == nullptr || !e->enabled) throw LifecycleError("DISABLE of VB " + vb.to_string() + " that is not enabled");
  if (e->ref_count != 0) {
    throw LifecycleError("DISABLE of VB " + vb.to_string() + " with ref_count " + std::to_string(e->ref_count));
  }
}

void Machine::check_clone(const TraceEvent& ev) const {
  if (!registry_.enabled(ev.vb) || !registry_.enabled(ev.vb2)) throw LifecycleError("CLONE needs both VBs enabled");
  if (ev.vb.size_id != ev.vb2.size_id) throw LifecycleError("CLONE across size classes");
  if (ev.vb == ev.vb2) throw LifecycleError("CLONE of a VB onto itself");
}

void Machine::check_promote(const TraceEvent& ev) const {
  const Vbuid& src = ev.vb;
  const Vbuid& dst = ev.vb2;
  if (!registry_.enabled(src) || !registry_.enabled(dst)) throw LifecycleError("PROMOTE needs both VBs enabled");
  if (dst.size_id <= src.size_id) throw LifecycleError("PROMOTE target class is not larger");
  const ClientTable* table = protection_.table(ev.client);
  if (table == nullptr || !table->index_of(src)) {
    throw LifecycleError("PROMOTE by a client not attached to " + src.to_string());
  }
  if (registry_.find(src)->ref_count != 1) throw LifecycleError("PROMOTE of a VB shared across clients");
  if (registry_.find(dst)->ref_count != 0) throw LifecycleError("PROMOTE target is attached");
}

void Machine::report(Stats& s) const {
  for (const auto& [k, v] : counters_.values()) {
    if (const auto* u = std::get_if<uint64_t>(&v)) {
      s.add(k, *u);
    } else {
      s.set_real(k, std::get<double>(v));
    }
  }
  // Counters every report carries, even when they stayed zero.
  for (const char* key : {"mem.accesses", "mem.reads", "mem.writes", "llc.misses", "device.data_reads",
                          "device.data_writes", "device.meta_reads", "zero_line.reads", "page_faults",
                          "translate.calls", "walk.accesses", "walk.nested_accesses", "frames.allocated"}) {
    if (!s.has(key)) s.set(key, 0);
  }
  const auto& cvt = protection_.cvt_cache().stats();
  s.set("cvt_cache.hit", cvt.hits);
  s.set("cvt_cache.miss", cvt.misses);
}

}  // namespace vbi
