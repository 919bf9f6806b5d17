#include "vbi/x86_machine.hpp"

#include <algorithm>

#include "vbi/errors.hpp"

namespace vbi {

namespace {

constexpr uint64_t kGiB = uint64_t{1} << 30;
constexpr uint64_t kFirstRange = 0x10000;
constexpr uint64_t kUserSpaceTop = uint64_t{1} << 47;

uint64_t round_up(uint64_t v, uint64_t align) { return (v + align - 1) / align * align; }

MemorySystem single_dram(const SimConfig& cfg) {
  std::vector<MemoryDevice> devices;
  devices.emplace_back(DeviceKind::dram, cfg.dram, cfg.memory.record_commands);
  std::vector<MemoryRegion> regions{{0, cfg.memory.pool_bytes, 0}};
  return MemorySystem(std::move(devices), std::move(regions), 0, cfg.memory.cpu_cycles_per_mem_cycle);
}

}  // namespace

X86Machine::X86Machine(const SimConfig& cfg, const X86Options& opts)
    : Machine(cfg),
      opts_(opts),
      pool_(cfg.memory.pool_bytes >> kPageBits),
      // Page tables sit above the pool, past the window a VBI system reserves
      // for its own tables, so both layouts place metadata alike.
      host_arena_(round_up(cfg.memory.pool_bytes, kGiB) + 8 * kGiB),
      caches_(cfg.cache),
      mem_(single_dram(cfg)) {
  if (x86_nested(opts_.mode)) guest_pool_.emplace(cfg.memory.pool_bytes >> kPageBits);
  X86Backing backing;
  backing.native_fault = [this](uint16_t, uint64_t) { return page_base_fault(); };
  backing.guest_fault = [this](uint16_t, uint64_t) { return page_base_fault(); };
  backing.host_fault = [this](uint64_t gpn, bool table_page) -> uint64_t {
    if (table_page) return host_arena_.alloc(uint64_t{1} << page_bits());
    auto it = host_map_.find(gpn);
    if (it != host_map_.end()) return it->second;
    const uint64_t base = alloc_page(pool_);
    host_map_[gpn] = base;
    return base;
  };
  mmu_ = std::make_unique<X86Mmu>(opts_.mode, cfg.tlb, host_arena_, std::move(backing), opts_.perfect_tlb);
}

uint64_t X86Machine::alloc_page(FramePool& pool) {
  const auto frame = pool.alloc(page_order());
  if (!frame) throw OutOfMemory("physical memory exhausted");
  if (&pool == &pool_) counters_.add("frames.allocated", uint64_t{1} << page_order());
  return *frame << kPageBits;
}

uint64_t X86Machine::page_base_fault() {
  auto& pages = backing_[fault_vb_.key()];
  auto it = pages.find(fault_page_);
  if (it != pages.end()) return it->second;
  const uint64_t base = alloc_page(guest_pool_ ? *guest_pool_ : pool_);
  pages[fault_page_] = base;
  refs_[base] = 1;
  return base;
}

uint64_t X86Machine::range_base(ClientId client, const Vbuid& vb) {
  const auto key = std::make_pair(client, vb.key());
  auto it = ranges_.find(key);
  if (it != ranges_.end()) return it->second;
  const uint64_t page = uint64_t{1} << page_bits();
  auto next = next_range_.try_emplace(client, kFirstRange).first;
  const uint64_t base = round_up(next->second, page);
  const uint64_t size = round_up(vb.size_class().size_bytes, page);
  if (base + size > kUserSpaceTop) {
    throw CapacityError("address space of client " + std::to_string(client) + " cannot hold VB " + vb.to_string());
  }
  next->second = base + size;
  ranges_.emplace(key, base);
  return base;
}

uint64_t X86Machine::owner_id(ClientId client, const Vbuid& vb) {
  auto [it, fresh] = owner_ids_.try_emplace({client, vb.key()}, owners_.size());
  if (fresh) owners_.push_back({client, vb});
  return it->second;
}

std::optional<uint64_t> X86Machine::phys_of(const Vbuid& vb, uint64_t offset) const {
  auto v = backing_.find(vb.key());
  if (v == backing_.end()) return std::nullopt;
  auto p = v->second.find(offset >> page_bits());
  if (p == v->second.end()) return std::nullopt;
  uint64_t base = p->second;
  if (guest_pool_) {
    auto h = host_map_.find(base >> page_bits());
    if (h == host_map_.end()) return std::nullopt;
    base = h->second;
  }
  return base + (offset & ((uint64_t{1} << page_bits()) - 1));
}

uint64_t X86Machine::translate(ClientId client, const Vbuid& vb, uint64_t vaddr, uint64_t start,
                               X86Translation& tr) {
  fault_vb_ = vb;
  fault_page_ = (vaddr - range_base(client, vb)) >> page_bits();
  counters_.add("translate.calls");
  tr = mmu_->translate(client, vaddr);
  uint64_t t = start;
  if (tr.level == TlbLevel::l2 || tr.level == TlbLevel::walk) t += mmu_->l2_latency();
  for (uint64_t addr : tr.reads) t = mem_.access(addr, false, t);
  counters_.add("device.meta_reads", tr.reads.size());
  counters_.add("walk.accesses", tr.walk_accesses);
  counters_.add("walk.nested_accesses", tr.nested_accesses);
  const uint64_t faults = tr.faults + tr.host_faults;
  if (faults != 0) {
    counters_.add("page_faults", faults);
    counters_.add("page_faults.host", tr.host_faults);
    t += faults * cfg_.memory.page_fault_cycles;
  }
  return t;
}

uint64_t X86Machine::resolve_cow(const Vbuid& vb, uint64_t page, uint64_t start) {
  auto& pages = backing_.at(vb.key());
  const uint64_t old_base = pages.at(page);
  const uint64_t bits = page_bits();
  const std::optional<uint64_t> old_phys = phys_of(vb, page << bits);
  const uint64_t base = alloc_page(guest_pool_ ? *guest_pool_ : pool_);
  uint64_t machine_base = base;
  if (guest_pool_) {
    machine_base = alloc_page(pool_);
    host_map_[base >> bits] = machine_base;
    mmu_->map_host(base >> bits, machine_base);
  }
  --refs_[old_base];
  pages[page] = base;
  refs_[base] = 1;

  uint64_t t = start + cfg_.memory.page_fault_cycles;
  counters_.add("page_faults");
  if (old_phys) t = mem_.access(*old_phys, false, t);
  t = mem_.access(machine_base, true, t);
  counters_.add("device.copy_accesses", old_phys ? 2 : 1);
  counters_.add("cow.copies");
  for (ClientId c : protection_.clients_attached(vb)) {
    auto r = ranges_.find({c, vb.key()});
    if (r == ranges_.end()) continue;
    const uint64_t vpn = (r->second >> bits) + page;
    if (mmu_->lookup(c, vpn)) mmu_->remap(c, vpn, base);
  }
  return t;
}

AccessResult X86Machine::access(const TraceEvent& ev, uint64_t now) {
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
  const Vbuid vb = fa.vbuid;
  log_access(vb, ev.offset, ev.write);
  const uint64_t vaddr = range_base(ev.client, vb) + ev.offset;
  const uint64_t page = ev.offset >> page_bits();
  auto shared = [&] {
    auto v = backing_.find(vb.key());
    if (v == backing_.end()) return false;
    auto p = v->second.find(page);
    return p != v->second.end() && refs_[p->second] > 1;
  };

  std::vector<Eviction> evicted;
  LineMeta meta;
  meta.vb_offset = ev.offset & ~(kLineSize - 1);
  uint64_t t = now;

  if (!opts_.vivt) {
    X86Translation tr;
    t = translate(ev.client, vb, vaddr, t, tr);
    res.serialize = tr.faults + tr.host_faults != 0;
    uint64_t paddr = tr.paddr;
    if (ev.write && shared()) {
      t = resolve_cow(vb, page, t);
      res.serialize = true;
      paddr = *phys_of(vb, ev.offset);
    }
    const uint64_t line = paddr >> kLineBits;
    if (auto level = caches_.probe(line, ev.write, evicted)) {
      res.done = t + caches_.lookup_latency(*level);
    } else {
      counters_.add("llc.misses");
      meta.owner = vb.key();
      meta.phys = line << kLineBits;
      res.done = mem_.access(*meta.phys, false, t + caches_.lookup_latency(2));
      demand_latency_ += res.done - (t + caches_.lookup_latency(2));
      ++demand_reads_;
      counters_.add("device.data_reads");
      caches_.fill(line, meta, ev.write, evicted);
    }
  } else {
    if (ev.write && shared()) {
      t = resolve_cow(vb, page, t);
      res.serialize = true;
    }
    const uint64_t line = (uint64_t{ev.client} << 42) | (vaddr >> kLineBits);
    if (auto level = caches_.probe(line, ev.write, evicted)) {
      res.done = t + caches_.lookup_latency(*level);
    } else {
      counters_.add("llc.misses");
      X86Translation tr;
      const uint64_t tr_done = translate(ev.client, vb, vaddr, t + caches_.lookup_latency(1), tr);
      res.serialize = res.serialize || tr.faults + tr.host_faults != 0;
      const uint64_t issue = std::max(t + caches_.lookup_latency(2), tr_done);
      meta.owner = owner_id(ev.client, vb);
      meta.phys = tr.paddr & ~(kLineSize - 1);
      res.done = mem_.access(*meta.phys, false, issue);
      demand_latency_ += res.done - issue;
      ++demand_reads_;
      counters_.add("device.data_reads");
      caches_.fill(line, meta, ev.write, evicted);
    }
  }
  writebacks(evicted, now);
  return res;
}

void X86Machine::writebacks(const std::vector<Eviction>& evs, uint64_t now) {
  for (const Eviction& e : evs) {
    std::optional<uint64_t> addr = e.meta.phys;
    if (opts_.vivt) {
      // Virtually tagged lines are translated on the way out.
      const Owner& o = owners_.at(e.meta.owner);
      addr = phys_of(o.vb, e.meta.vb_offset);
    }
    if (!addr) {
      counters_.add("writeback.dropped");
      continue;
    }
    mem_.access(*addr, true, now);
    counters_.add("device.data_writes");
  }
}

void X86Machine::flush_owner(uint64_t owner, uint64_t now) {
  const std::vector<Eviction> dirty = caches_.invalidate_owner(owner, true);
  counters_.add("flush.writebacks", dirty.size());
  writebacks(dirty, now);
}

void X86Machine::unmap_client(ClientId client, const Vbuid& vb) {
  auto r = ranges_.find({client, vb.key()});
  auto v = backing_.find(vb.key());
  if (r == ranges_.end() || v == backing_.end()) return;
  const uint64_t first = r->second >> page_bits();
  for (const auto& [page, base] : v->second) mmu_->unmap(client, first + page);
}

void X86Machine::free_backing(const Vbuid& vb) {
  auto v = backing_.find(vb.key());
  if (v == backing_.end()) return;
  FramePool& pool = guest_pool_ ? *guest_pool_ : pool_;
  for (const auto& [page, base] : v->second) {
    if (--refs_[base] != 0) continue;
    refs_.erase(base);
    pool.free(base >> kPageBits);
    if (!guest_pool_) counters_.add("frames.freed", uint64_t{1} << page_order());
  }
  backing_.erase(v);
}

uint64_t X86Machine::lifecycle(const TraceEvent& ev, uint64_t now) {
  switch (ev.kind) {
    case EventKind::reqvb: {
      const Vbuid vb = request_vb(ev);
      protection_.attach(ev.client, vb, Perms::from_props(ev.props));
      range_base(ev.client, vb);
      break;
    }
    case EventKind::enable:
      registry_.enable_vb(ev.vb, ev.props);
      break;
    case EventKind::attach:
      protection_.attach(ev.client, ev.vb, ev.perms);
      range_base(ev.client, ev.vb);
      break;
    case EventKind::detach:
      protection_.detach(ev.client, ev.vb);
      if (opts_.vivt) flush_owner(owner_id(ev.client, ev.vb), now);
      unmap_client(ev.client, ev.vb);
      break;
    case EventKind::disable:
      check_disable(ev.vb);
      if (!opts_.vivt) caches_.invalidate_owner(ev.vb.key(), false);
      free_backing(ev.vb);
      registry_.disable_vb(ev.vb, 0);
      break;
    case EventKind::clone: {
      check_clone(ev);
      if (backing_.count(ev.vb2.key()) && !backing_[ev.vb2.key()].empty()) {
        throw LifecycleError("CLONE target " + ev.vb2.to_string() + " already has memory");
      }
      auto src = backing_.find(ev.vb.key());
      if (src != backing_.end()) {
        for (const auto& [page, base] : src->second) ++refs_[base];
        backing_[ev.vb2.key()] = src->second;
      }
      counters_.add("clones");
      break;
    }
    case EventKind::promote: {
      check_promote(ev);
      const Vbuid& src = ev.vb;
      const Vbuid& dst = ev.vb2;
      if (backing_.count(dst.key()) && !backing_[dst.key()].empty()) {
        throw LifecycleError("PROMOTE target is not empty");
      }
      if (opts_.vivt) flush_owner(owner_id(ev.client, src), now);
      unmap_client(ev.client, src);
      auto moved = backing_.extract(src.key());
      if (!moved.empty()) {
        moved.key() = dst.key();
        backing_.insert(std::move(moved));
        // The OS maps the new range eagerly from the old pages.
        const uint64_t first = range_base(ev.client, dst) >> page_bits();
        for (const auto& [page, base] : backing_[dst.key()]) {
          mmu_->remap(ev.client, first + page, base);
          counters_.add("promote.remapped");
        }
      }
      protection_.repoint(src, dst);
      counters_.add("promotions");
      break;
    }
    case EventKind::mem:
    case EventKind::instr:
      throw Error(std::string(event_name(ev.kind)) + " record passed to lifecycle");
  }
  return now;
}

void X86Machine::finish(uint64_t now) {
  if (!cfg_.memory.drain_at_end) return;
  const std::vector<Eviction> dirty = caches_.drain_dirty();
  counters_.add("drain.writebacks", dirty.size());
  writebacks(dirty, now);
}

void X86Machine::report(Stats& s) const {
  Machine::report(s);
  const CacheStats& cs = caches_.stats();
  const char* names[] = {"l1", "l2", "l3"};
  for (int l = 0; l < 3; ++l) {
    s.set(std::string("cache.") + names[l] + ".hits", cs.level[l].hits);
    s.set(std::string("cache.") + names[l] + ".misses", cs.level[l].misses);
  }
  s.set("writebacks.dirty", cs.dirty_writebacks);
  s.set("invalidations", cs.invalidations);
  s.set("tlb.l1_4k.miss", mmu_->l1_4k_tlb().stats().misses);
  s.set("tlb.l1_4k.hit", mmu_->l1_4k_tlb().stats().hits);
  s.set("tlb.l1_2m.miss", mmu_->l1_2m_tlb().stats().misses);
  s.set("tlb.l1_2m.hit", mmu_->l1_2m_tlb().stats().hits);
  s.set("tlb.l2.miss", mmu_->l2_tlb().stats().misses);
  s.set("tlb.l2.hit", mmu_->l2_tlb().stats().hits);
  s.set("pwc.hit", mmu_->pwc().stats().hits);
  s.set("pwc.miss", mmu_->pwc().stats().misses);
  s.set("walks", mmu_->walks());
  s.set("frames.in_use", pool_.allocated_frames());
  s.set("page_tables.bytes", host_arena_.used());

  report_memory(mem_, cfg_.memory.record_commands, s);
  s.set("demand.reads", demand_reads_);
  s.set("demand.latency_sum", demand_latency_);
  s.set_real("avg_access_latency",
             demand_reads_ == 0 ? 0.0 : static_cast<double>(demand_latency_) / static_cast<double>(demand_reads_));
}

}  // namespace vbi
