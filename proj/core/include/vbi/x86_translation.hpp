#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "vbi/radix_table.hpp"
#include "vbi/tlb.hpp"
#include "vbi/translation.hpp"

namespace vbi {

enum class X86Mode : uint8_t { native4k, native2m, nested4k, nested2m };

inline constexpr unsigned kVirtualAddressBits = 48;
inline constexpr unsigned kLargePageBits = 21;

inline bool x86_large_pages(X86Mode m) { return m == X86Mode::native2m || m == X86Mode::nested2m; }
inline bool x86_nested(X86Mode m) { return m == X86Mode::nested4k || m == X86Mode::nested2m; }

// A radix page table over a 48-bit space: 4 levels for 4 KB pages, 3 for 2 MB.
// Leaves hold the base address of the mapped page.
class X86PageTable {
 public:
  X86PageTable(unsigned page_bits, MetadataArena& arena);

  unsigned page_bits() const { return page_bits_; }
  std::optional<uint64_t> lookup(uint64_t vpn) const;
  void map(uint64_t vpn, uint64_t page_base);
  bool unmap(uint64_t vpn);
  const RadixTable& radix() const { return table_; }

 private:
  unsigned page_bits_;
  RadixTable table_;
  std::unordered_map<uint64_t, uint64_t> leaves_;
};

struct X86Translation {
  uint64_t paddr = 0;
  unsigned walk_accesses = 0;    // every table entry read, guest and host
  unsigned nested_accesses = 0;  // host-table reads made on behalf of a nested walk
  unsigned faults = 0;           // native or guest page faults
  unsigned host_faults = 0;
  TlbLevel level = TlbLevel::walk;
  bool pwc_hit = false;
  std::vector<uint64_t> reads;  // machine-physical addresses of the entries read
};

// Fault hooks supply backing on first touch. Each returns the base address of
// the page chosen for the faulting page number.
struct X86Backing {
  std::function<uint64_t(uint16_t asid, uint64_t vpn)> native_fault;
  std::function<uint64_t(uint16_t asid, uint64_t gvpn)> guest_fault;
  // `table_page` marks guest page-table pages, which live outside the data pool.
  std::function<uint64_t(uint64_t gpn, bool table_page)> host_fault;
};

// Core-side MMU of the baselines: split L1 TLBs, a unified L2 TLB, a page walk
// cache for non-leaf entries, and native or nested page tables.
class X86Mmu {
 public:
  X86Mmu(X86Mode mode, const TlbConfig& cfg, MetadataArena& host_arena, X86Backing backing,
         bool perfect_tlb = false);

  X86Mode mode() const { return mode_; }
  unsigned page_bits() const { return x86_large_pages(mode_) ? kLargePageBits : kPageBits; }

  X86Translation translate(uint16_t asid, uint64_t vaddr);

  // Drops the mapping of `vpn` (and its TLB entries). Returns the backing page
  // base it had.
  std::optional<uint64_t> unmap(uint16_t asid, uint64_t vpn);
  std::optional<uint64_t> lookup(uint16_t asid, uint64_t vpn) const;
  // Replaces the leaf of an existing mapping.
  void remap(uint16_t asid, uint64_t vpn, uint64_t page_base);
  // Installs a host mapping for guest page `gpn` ahead of its first use.
  void map_host(uint64_t gpn, uint64_t page_base);

  const Tlb& l1_4k_tlb() const { return l1_4k_; }
  const Tlb& l1_2m_tlb() const { return l1_2m_; }
  const Tlb& l2_tlb() const { return l2_; }
  const PageWalkCache& pwc() const { return pwc_; }
  unsigned l2_latency() const { return l2_latency_; }
  uint64_t walks() const { return walks_; }

 private:
  X86PageTable& table_for(uint16_t asid);
  const X86PageTable* find_table(uint16_t asid) const;
  uint64_t tlb_key(uint16_t asid, uint64_t vpn) const;
  Tlb& l1() { return x86_large_pages(mode_) ? l1_2m_ : l1_4k_; }

  // Walks `table`, first consulting the PWC for space `space`. Appends the
  // entry addresses (as stored in the table's address space) to `entries`.
  void walk(const X86PageTable& table, uint16_t space, uint64_t vpn, std::vector<uint64_t>& entries,
            bool& pwc_hit);
  // Machine-physical address for guest-physical `gpa`, walking the host table.
  uint64_t host_translate(uint64_t gpa, bool table_page, X86Translation& out);

  X86Mode mode_;
  MetadataArena* host_arena_;
  MetadataArena guest_arena_;
  X86Backing backing_;
  bool perfect_;
  Tlb l1_4k_;
  Tlb l1_2m_;
  Tlb l2_;
  PageWalkCache pwc_;
  unsigned l2_latency_;
  uint64_t walks_ = 0;
  std::unordered_map<uint16_t, std::unique_ptr<X86PageTable>> tables_;
  std::unique_ptr<X86PageTable> host_table_;
  std::vector<std::pair<uint64_t, uint64_t>> pending_pwc_;
};

}  // namespace vbi
