#pragma once

#include <map>
#include <memory>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vbi/cache.hpp"
#include "vbi/device.hpp"
#include "vbi/frame_pool.hpp"
#include "vbi/machine.hpp"
#include "vbi/radix_table.hpp"
#include "vbi/x86_translation.hpp"

namespace vbi {

struct X86Options {
  X86Mode mode = X86Mode::native4k;
  bool perfect_tlb = false;
  bool vivt = false;  // virtually indexed, virtually tagged caches
};

// Conventional virtual memory behind the same trace: each client is an address
// space, each attached VB a range in it, backed on demand by the OS.
class X86Machine : public Machine {
 public:
  X86Machine(const SimConfig& cfg, const X86Options& opts);

  AccessResult access(const TraceEvent& ev, uint64_t now) override;
  uint64_t lifecycle(const TraceEvent& ev, uint64_t now) override;
  void finish(uint64_t now) override;
  void report(Stats& s) const override;

  X86Mmu& mmu() { return *mmu_; }
  CacheHierarchy& caches() { return caches_; }
  MemorySystem& devices() { return mem_; }
  const FramePool& pool() const { return pool_; }

  // Base of the range `vb` occupies in `client`'s address space.
  uint64_t range_base(ClientId client, const Vbuid& vb);

 private:
  struct Owner {
    ClientId client = 0;
    Vbuid vb;
  };

  unsigned page_bits() const { return mmu_->page_bits(); }
  unsigned page_order() const { return page_bits() - kPageBits; }
  uint64_t page_base_fault();
  uint64_t alloc_page(FramePool& pool);
  uint64_t owner_id(ClientId client, const Vbuid& vb);
  // Machine-physical address of `offset` in `vb`, if backed.
  std::optional<uint64_t> phys_of(const Vbuid& vb, uint64_t offset) const;
  // Translation on behalf of an access; returns the cycle it completes.
  uint64_t translate(ClientId client, const Vbuid& vb, uint64_t vaddr, uint64_t start, X86Translation& tr);
  // Gives `vb` a private copy of `page` if it shares it; returns the cycle done.
  uint64_t resolve_cow(const Vbuid& vb, uint64_t page, uint64_t start);
  void unmap_client(ClientId client, const Vbuid& vb);
  void free_backing(const Vbuid& vb);
  void flush_owner(uint64_t owner, uint64_t now);
  void writebacks(const std::vector<Eviction>& evs, uint64_t now);

  X86Options opts_;
  FramePool pool_;
  std::optional<FramePool> guest_pool_;
  MetadataArena host_arena_;
  CacheHierarchy caches_;
  MemorySystem mem_;
  std::unique_ptr<X86Mmu> mmu_;

  // VB key -> page -> base (guest-physical when nested).
  std::map<uint64_t, std::map<uint64_t, uint64_t>> backing_;
  std::unordered_map<uint64_t, uint32_t> refs_;  // VBs mapping each base
  std::unordered_map<uint64_t, uint64_t> host_map_;  // guest page -> machine base
  std::map<std::pair<ClientId, uint64_t>, uint64_t> ranges_;
  std::map<ClientId, uint64_t> next_range_;
  std::map<std::pair<ClientId, uint64_t>, uint64_t> owner_ids_;
  std::vector<Owner> owners_;
  // Page being touched, read by the fault hooks.
  Vbuid fault_vb_;
  uint64_t fault_page_ = 0;

  uint64_t demand_latency_ = 0;
  uint64_t demand_reads_ = 0;
};

}  // namespace vbi
