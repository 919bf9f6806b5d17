#include "vbi/vbi_machine.hpp"

#include <algorithm>
#include <cmath>

#include "vbi/errors.hpp"

namespace vbi {

namespace {

std::vector<uint64_t> zone_sizes(const SimConfig& cfg, HeteroKind kind) {
  const uint64_t total = cfg.memory.pool_bytes >> kPageBits;
  if (kind == HeteroKind::none) return {total};
  const double frac = kind == HeteroKind::pcm_dram ? cfg.hetero.pcm_dram_fast_fraction
                                                   : cfg.hetero.tldram_fast_fraction;
  const uint64_t fast = std::clamp<uint64_t>(static_cast<uint64_t>(std::floor(total * frac)), 1, total - 1);
  return {fast, total - fast};
}

MemorySystem build_memory(const SimConfig& cfg, HeteroKind kind, const std::vector<uint64_t>& zones) {
  const bool rec = cfg.memory.record_commands;
  std::vector<MemoryDevice> devices;
  switch (kind) {
    case HeteroKind::none:
      devices.emplace_back(DeviceKind::dram, cfg.dram, rec);
      break;
    case HeteroKind::pcm_dram:
      devices.emplace_back(DeviceKind::dram, cfg.dram, rec);
      devices.emplace_back(DeviceKind::pcm, cfg.pcm, rec);
      break;
    case HeteroKind::tl_dram:
      devices.emplace_back(DeviceKind::tl_fast, cfg.tl_fast, rec);
      devices.emplace_back(DeviceKind::tl_slow, cfg.tl_slow, rec);
      break;
  }
  std::vector<MemoryRegion> regions;
  uint64_t base = 0;
  for (unsigned z = 0; z < zones.size(); ++z) {
    regions.push_back({base, zones[z] << kPageBits, z});
    base += zones[z] << kPageBits;
  }
  // Translation metadata lives with the capacity tier.
  const unsigned home = static_cast<unsigned>(devices.size() - 1);
  return MemorySystem(std::move(devices), std::move(regions), home, cfg.memory.cpu_cycles_per_mem_cycle);
}

}  // namespace

VbiMachine::VbiMachine(const SimConfig& cfg, const VbiOptions& opts)
    : Machine(cfg),
      opts_(opts),
      phys_(zone_sizes(cfg, opts.hetero), opts.alloc),
      translator_(cfg.tlb, AddressingMode{cfg.vm_mode}),
      caches_(cfg.cache),
      mem_(build_memory(cfg, opts.hetero, zone_sizes(cfg, opts.hetero))) {
  if (opts.hetero != HeteroKind::none) hot_.emplace(opts.policy, 0, 1, cfg.hetero.epoch_cycles);
}

void VbiMachine::set_profile(const UnitProfile& profile) {
  if (!hot_) return;
  hot_->set_profile(profile.counts, profile.pages, phys_.pool(hot_->fast_zone()).total_frames());
}

UnitProfile VbiMachine::profile() const {
  UnitProfile p;
  if (hot_) p.counts = hot_->totals();
  p.pages = unit_pages_;
  return p;
}

uint64_t VbiMachine::demand_read(uint64_t addr, uint64_t at) {
  const uint64_t done = mem_.access(addr, false, at);
  counters_.add("device.data_reads");
  demand_latency_ += done - at;
  ++demand_reads_;
  return done;
}

VbiMachine::MissPath VbiMachine::translate(const Vbuid& vb, uint64_t offset, uint64_t start) {
  const VbSpace* space = phys_.space(vb);
  if (space == nullptr) throw Error("translation for VB " + vb.to_string() + " without a physical space");
  MissPath out;
  out.tr = translator_.translate(vb, offset, space->ts);
  uint64_t t = start;
  switch (out.tr.level) {
    case TlbLevel::vb_direct:
    case TlbLevel::l1:
      t += cfg_.memory.mtl_tlb_hit_cycles;
      break;
    case TlbLevel::l2:
    case TlbLevel::walk:
      t += translator_.l2_latency();
      break;
  }
  if (out.tr.tlb_miss && !registry_.vit_cache().lookup(vb)) {
    t = mem_.access(registry_.entry_address(vb, phys_.vit_base()), false, t);
    counters_.add("device.meta_reads");
  }
  for (uint64_t addr : out.tr.walk_reads) {
    t = mem_.access(addr, false, t);
    counters_.add("device.meta_reads");
  }
  out.done = t;
  return out;
}

void VbiMachine::after_alloc(const Vbuid& vb, uint64_t page, const AllocResult& r) {
  for (const Vbuid& lost : r.lost_direct) translator_.invalidate_vb(lost);
  if (hot_) ++unit_pages_[unit_of(vb, page)];
  if (VbSpace* s = phys_.space(vb)) {
    VitEntry& e = registry_.entry(vb);
    e.ts_kind = s->ts.kind();
    e.ts_root = s->ts.root();
  }
}

AllocResult VbiMachine::allocate(const Vbuid& vb, uint64_t page, AllocReason reason) {
  std::optional<unsigned> zone;
  if (hot_) {
    const VitEntry& e = registry_.entry(vb);
    zone = hot_->place(unit_of(vb, page), e.props, phys_.free_frames(hot_->fast_zone()));
  }
  for (;;) {
    try {
      AllocResult r = phys_.ensure_backed(vb, page, reason, zone);
      after_alloc(vb, page, r);
      return r;
    } catch (const OutOfMemory&) {
      auto victim = phys_.pick_swap_victim();
      if (!victim) throw;
      phys_.swap_out(victim->vb, victim->page);
      translator_.invalidate_page(victim->vb, victim->page);
    }
  }
}

AccessResult VbiMachine::access(const TraceEvent& ev, uint64_t now) {
  AccessResult res;
  counters_.add("mem.accesses");
  counters_.add(ev.write ? "mem.writes" : "mem.reads");
  FormedAddress fa;
  try {
    fa = protection_.check_and_form_address(ev.client, ev.cvt_index, ev.offset,
                                            ev.write ? AccessKind::write : AccessKind::read);
  } catch (const ProtectionFault& f) {
    counters_.add(std::string("fault.") + fault_name(f.code()));
    res.done = now;
    res.faulted = true;
    return res;
  }
  uint64_t t = now;
  if (!fa.cvt_hit) {
    t += cfg_.protection.cvt_miss_cycles;
    counters_.add("cvt_cache.miss_cycles", cfg_.protection.cvt_miss_cycles);
  }

  const Vbuid vb = fa.vbuid;
  log_access(vb, ev.offset, ev.write);
  const uint64_t line = fa.address.raw >> kLineBits;
  std::vector<Eviction> evicted;
  if (auto level = caches_.probe(line, ev.write, evicted)) {
    res.done = t + caches_.lookup_latency(*level);
    writebacks(evicted, t);
    return res;
  }

  counters_.add("llc.misses");
  const uint64_t t_llc = t + caches_.lookup_latency(2);
  // Translation starts once L2 has missed and overlaps the L3 lookup.
  const uint64_t t_start = t + caches_.lookup_latency(1);
  MissPath mp = translate(vb, ev.offset, t_start);
  const uint64_t page = ev.offset >> kPageBits;
  uint64_t issue = std::max(t_llc, mp.done);

  LineMeta meta;
  meta.owner = vb.key();
  meta.vb_offset = ev.offset & ~(kLineSize - 1);

  switch (mp.tr.outcome) {
    case TranslationOutcome::mapped: {
      const uint64_t addr = line_address(mp.tr.frame, ev.offset);
      meta.phys = addr;
      res.done = demand_read(addr, issue);
      break;
    }
    case TranslationOutcome::unbacked:
      if (opts_.delayed_allocation) {
        meta.zero_filled = true;
        counters_.add("zero_line.reads");
        res.done = issue;
      } else {
        const AllocResult r = allocate(vb, page, AllocReason::dirty_writeback);
        const uint64_t addr = line_address(r.frame, ev.offset);
        meta.phys = addr;
        res.done = demand_read(addr, issue);
      }
      break;
    case TranslationOutcome::swapped_out: {
      const AllocResult r = allocate(vb, page, AllocReason::swap_in);
      const uint64_t addr = line_address(r.frame, ev.offset);
      meta.phys = addr;
      res.done = demand_read(addr, issue + cfg_.memory.swap_cycles);
      break;
    }
  }
  if (hot_) hot_->record(unit_of(vb, page));
  caches_.fill(line, meta, ev.write, evicted);
  writebacks(evicted, t);
  if (hot_ && hot_->policy() == HetPolicy::aware && hot_->epoch_due(now)) run_epoch(now);
  return res;
}

void VbiMachine::writebacks(const std::vector<Eviction>& evs, uint64_t now) {
  for (const Eviction& e : evs) writeback(e, now);
}

void VbiMachine::writeback(const Eviction& ev, uint64_t now) {
  const Vbuid vb = Vbuid::from_key(ev.meta.owner);
  VbSpace* space = phys_.space(vb);
  if (space == nullptr || !registry_.enabled(vb)) {
    counters_.add("writeback.dropped");
    return;
  }
  const uint64_t page = ev.meta.vb_offset >> kPageBits;
  const PageMapping* m = space->ts.find(page);
  if (ev.meta.phys && m != nullptr && m->state == RegionState::allocated && !m->cow &&
      m->frame == (*ev.meta.phys >> kPageBits)) {
    mem_.access(*ev.meta.phys, true, now);
    counters_.add("device.data_writes");
    return;
  }

  counters_.add("writeback.translate_calls");
  MissPath mp = translate(vb, ev.meta.vb_offset, now);
  uint64_t t = mp.done;
  uint64_t frame = 0;
  switch (mp.tr.outcome) {
    case TranslationOutcome::unbacked:
      frame = allocate(vb, page, AllocReason::dirty_writeback).frame;
      break;
    case TranslationOutcome::swapped_out:
      frame = allocate(vb, page, AllocReason::swap_in).frame;
      t += cfg_.memory.swap_cycles;
      break;
    case TranslationOutcome::mapped:
      frame = mp.tr.frame;
      if (mp.tr.cow) {
        AllocResult r;
        if (auto old = phys_.resolve_cow(vb, page, &r)) {
          after_alloc(vb, page, r);
          t = mem_.access(line_address(*old, ev.meta.vb_offset), false, t);
          t = mem_.access(line_address(r.frame, ev.meta.vb_offset), true, t);
          counters_.add("device.copy_accesses", 2);
          frame = r.frame;
        }
        translator_.invalidate_page(vb, page);
      }
      break;
  }
  mem_.access(line_address(frame, ev.meta.vb_offset), true, t);
  counters_.add("device.data_writes");
}

uint64_t VbiMachine::flush_vb(const Vbuid& vb, uint64_t now) {
  const std::vector<Eviction> dirty = caches_.invalidate_owner(vb.key(), true);
  writebacks(dirty, now);
  return dirty.size();
}

void VbiMachine::run_epoch(uint64_t now) {
  const std::vector<RankedUnit> ranked = hot_->close_epoch(now);
  if (ranked.empty()) return;
  counters_.add("hetero.epochs");
  const unsigned fast = hot_->fast_zone();
  const unsigned slow = hot_->slow_zone();
  const uint64_t capacity = phys_.pool(fast).total_frames();

  // Allocated pages of every unit, split by zone.
  struct Resident {
    Vbuid vb;
    std::vector<uint64_t> fast_pages;
    std::vector<uint64_t> slow_pages;
  };
  std::map<UnitId, Resident> units;
  for (const Vbuid& vb : registry_.enabled_vbs()) {
    const VbSpace* s = phys_.space(vb);
    if (s == nullptr) continue;
    for (const auto& [page, m] : s->ts.mappings()) {
      if (m.state != RegionState::allocated || m.cow) continue;
      Resident& r = units[unit_of(vb, page)];
      r.vb = vb;
      (phys_.zone_of(m.frame) == fast ? r.fast_pages : r.slow_pages).push_back(page);
    }
  }

  std::map<UnitId, double> density;
  for (const RankedUnit& r : ranked) density[r.unit] = r.density;
  std::map<UnitId, bool> desired;
  uint64_t used = 0;
  for (const RankedUnit& r : ranked) {
    auto it = units.find(r.unit);
    if (it == units.end()) continue;
    const uint64_t need = it->second.fast_pages.size() + it->second.slow_pages.size();
    if (used + need > capacity) continue;
    used += need;
    desired[r.unit] = true;
  }
  // Demotion candidates: resident in fast, not desired, coldest first.
  std::vector<UnitId> victims;
  for (const auto& [unit, r] : units) {
    if (!r.fast_pages.empty() && !desired.count(unit)) victims.push_back(unit);
  }
  std::stable_sort(victims.begin(), victims.end(), [&](const UnitId& a, const UnitId& b) {
    return density[a] < density[b];
  });

  auto move = [&](const Vbuid& vb, uint64_t page, unsigned zone) {
    auto moved = phys_.migrate(vb, page, zone);
    if (!moved) return false;
    mem_.access(moved->first << kPageBits, false, now);
    mem_.access(moved->second << kPageBits, true, now);
    counters_.add("migration.device_accesses", 2);
    translator_.invalidate_page(vb, page);
    return true;
  };

  std::size_t victim_index = 0;
  for (const RankedUnit& r : ranked) {
    if (!desired.count(r.unit)) continue;
    Resident& res = units[r.unit];
    hot_->set_zone(r.unit, fast);
    for (uint64_t page : res.slow_pages) {
      while (phys_.free_frames(fast) == 0 && victim_index < victims.size()) {
        Resident& v = units[victims[victim_index]];
        if (v.fast_pages.empty()) {
          hot_->set_zone(victims[victim_index], slow);
          ++victim_index;
          continue;
        }
        const uint64_t vp = v.fast_pages.back();
        v.fast_pages.pop_back();
        if (move(v.vb, vp, slow)) counters_.add("demotions");
      }
      if (phys_.free_frames(fast) == 0) break;
      if (move(res.vb, page, fast)) counters_.add("migrations");
    }
  }
}

uint64_t VbiMachine::lifecycle(const TraceEvent& ev, uint64_t now) {
  uint64_t t = now;
  switch (ev.kind) {
    case EventKind::reqvb: {
      const Vbuid vb = request_vb(ev);
      phys_.create_space(vb);
      protection_.attach(ev.client, vb, Perms::from_props(ev.props));
      break;
    }
    case EventKind::enable: {
      if (registry_.scrub_pending(ev.vb)) {
        const uint64_t wait = registry_.scrub_queue().cycles_until_done(ev.vb);
        counters_.add("scrub.stall_cycles", wait);
        advance(wait);
        t += wait;
      }
      registry_.enable_vb(ev.vb, ev.props);
      phys_.create_space(ev.vb);
      break;
    }
    case EventKind::attach:
      protection_.attach(ev.client, ev.vb, ev.perms);
      break;
    case EventKind::detach:
      protection_.detach(ev.client, ev.vb);
      break;
    case EventKind::disable: {
      check_disable(ev.vb);
      const uint64_t lines = caches_.count_owner(ev.vb.key());
      caches_.invalidate_owner(ev.vb.key(), false);
      phys_.destroy_space(ev.vb);
      translator_.invalidate_vb(ev.vb);
      registry_.vit_cache().invalidate(ev.vb);
      if (hot_) hot_->forget(ev.vb.key());
      registry_.disable_vb(ev.vb, lines);
      counters_.add("scrub.lines", lines);
      break;
    }
    case EventKind::clone: {
      check_clone(ev);
      const VbSpace* dst = phys_.space(ev.vb2);
      if (dst == nullptr || !dst->ts.mappings().empty()) {
        throw LifecycleError("CLONE target " + ev.vb2.to_string() + " already has memory");
      }
      counters_.add("clone.flushed", flush_vb(ev.vb, now));
      phys_.clone(ev.vb, ev.vb2);
      counters_.add("clones");
      break;
    }
    case EventKind::promote: {
      const Vbuid& src = ev.vb;
      const Vbuid& dst = ev.vb2;
      check_promote(ev);
      const VbSpace* target = phys_.space(dst);
      if (target == nullptr || !target->ts.mappings().empty()) throw LifecycleError("PROMOTE target is not empty");
      for (const auto& [page, m] : phys_.space(src)->ts.mappings()) {
        if (m.cow) throw LifecycleError("PROMOTE of a VB sharing frames with a clone");
      }
      counters_.add("promote.flushed", flush_vb(src, now));
      phys_.promote(src, dst);
      translator_.invalidate_vb(src);
      translator_.invalidate_vb(dst);
      registry_.vit_cache().invalidate(src);
      protection_.repoint(src, dst);
      counters_.add("promotions");
      break;
    }
    case EventKind::mem:
    case EventKind::instr:
      throw Error(std::string(event_name(ev.kind)) + " record passed to lifecycle");
  }
  return t;
}

void VbiMachine::finish(uint64_t now) {
  if (!cfg_.memory.drain_at_end) return;
  const std::vector<Eviction> dirty = caches_.drain_dirty();
  counters_.add("drain.writebacks", dirty.size());
  writebacks(dirty, now);
}

void VbiMachine::report(Stats& s) const {
  Machine::report(s);
  const CacheStats& cs = caches_.stats();
  const char* names[] = {"l1", "l2", "l3"};
  for (int l = 0; l < 3; ++l) {
    s.set(std::string("cache.") + names[l] + ".hits", cs.level[l].hits);
    s.set(std::string("cache.") + names[l] + ".misses", cs.level[l].misses);
  }
  s.set("writebacks.dirty", cs.dirty_writebacks);
  s.set("invalidations", cs.invalidations);
  s.set("tlb.l1_4k.miss", translator_.l1_tlb().stats().misses);
  s.set("tlb.l1_4k.hit", translator_.l1_tlb().stats().hits);
  s.set("tlb.l2.miss", translator_.l2_tlb().stats().misses);
  s.set("tlb.l2.hit", translator_.l2_tlb().stats().hits);
  s.set("tlb.vb_direct.miss", translator_.vb_direct_tlb().stats().misses);
  s.set("tlb.vb_direct.hit", translator_.vb_direct_tlb().stats().hits);
  s.set("pwc.hit", translator_.pwc().stats().hits);
  s.set("pwc.miss", translator_.pwc().stats().misses);
  s.set("walk.accesses", translator_.stats().walk_accesses);
  s.set("walk.nested_accesses", 0);
  s.set("walks", translator_.stats().walks);
  s.set("translate.calls", translator_.stats().calls);
  s.set("vit_cache.hit", registry_.vit_cache().stats().hits);
  s.set("vit_cache.miss", registry_.vit_cache().stats().misses);

  const PhysStats& ps = phys_.stats();
  s.set("frames.allocated", ps.frames_allocated);
  s.set("frames.freed", ps.frames_freed);
  s.set("frames.in_use", phys_.allocated_frames());
  s.set("frames.reserved", phys_.reserved_frames());
  s.set("alloc.priority1", ps.priority[1]);
  s.set("alloc.priority2", ps.priority[2]);
  s.set("alloc.priority3", ps.priority[3]);
  s.set("reservations.full", ps.reservations_full);
  s.set("reservations.sparse", ps.reservations_sparse);
  s.set("direct_lost", ps.direct_lost);
  s.set("cow.copies", ps.cow_copies);
  s.set("cow.reuse", ps.cow_reuse);
  s.set("swap.in", ps.swap_in);
  s.set("swap.out", ps.swap_out);
  s.set("migrations", ps.migrations);

  report_memory(mem_, cfg_.memory.record_commands, s);
  s.set("demand.reads", demand_reads_);
  s.set("demand.latency_sum", demand_latency_);
  s.set_real("avg_access_latency",
             demand_reads_ == 0 ? 0.0 : static_cast<double>(demand_latency_) / static_cast<double>(demand_reads_));
  if (hot_) s.set("hetero.epochs_closed", hot_->epochs());
}

}  // namespace vbi
