#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <map>
#include <vector>

#include "vbi/address.hpp"
#include "vbi/radix_table.hpp"
#include "vbi/registry.hpp"
#include "vbi/tlb.hpp"

namespace vbi {

enum class RegionState : uint8_t { unallocated, reserved, allocated, swapped_out };

struct PageMapping {
  RegionState state = RegionState::unallocated;
  uint64_t frame = 0;
  bool cow = false;
};

// Static structure choice: 4 KB VBs are direct, 128 KB and 4 MB VBs use a flat
// table, larger VBs a multi-level table. A whole-VB reservation forces direct.
StructureKind choose_structure(const SizeClass& cls, bool reserved_contiguous = false);
// Number of levels of the multi-level table for `cls` with 9-bit fanout.
unsigned multi_level_depth(const SizeClass& cls);

// Per-VB VBI-to-physical mapping at 4 KB granularity.
class TranslationStructure {
 public:
  TranslationStructure(const SizeClass& cls, StructureKind kind, MetadataArena& arena);

  StructureKind kind() const { return kind_; }
  const SizeClass& size_class() const { return cls_; }
  // Structure accesses a cold walk needs: 0 direct, 1 flat, depth otherwise.
  unsigned depth() const;

  std::optional<uint64_t> direct_base() const { return direct_base_; }
  void make_direct(uint64_t base_frame);
  // Falls back to the static table kind, building nodes for existing mappings.
  void make_table();

  const PageMapping* find(uint64_t page) const;
  void map(uint64_t page, const PageMapping& m);
  void set_cow(uint64_t page, bool cow);
  bool unmap(uint64_t page);
  const std::map<uint64_t, PageMapping>& mappings() const { return pages_; }
  std::size_t allocated_pages() const { return allocated_; }

  // Root address for the VIT (table root, or direct base address).
  std::optional<uint64_t> root() const;
  const RadixTable* table() const { return table_.get(); }

 private:
  void build_table();

  SizeClass cls_;
  StructureKind kind_;
  MetadataArena* arena_;
  std::optional<uint64_t> direct_base_;
  std::unique_ptr<RadixTable> table_;
  std::map<uint64_t, PageMapping> pages_;
  std::size_t allocated_ = 0;
};

enum class TranslationOutcome : uint8_t { mapped, unbacked, swapped_out };
enum class TlbLevel : uint8_t { vb_direct, l1, l2, walk };

struct VbiTranslation {
  TranslationOutcome outcome = TranslationOutcome::unbacked;
  uint64_t frame = 0;
  bool cow = false;
  TlbLevel level = TlbLevel::walk;
  bool pwc_hit = false;
  bool tlb_miss = false;  // every TLB missed; the VB's VIT entry is needed
  std::vector<uint64_t> walk_reads;  // structure entries fetched, in order
};

struct VbiTranslatorStats {
  uint64_t calls = 0;
  uint64_t walks = 0;
  uint64_t walk_accesses = 0;
};

// Memory-controller-side translation: VB-direct TLB for directly mapped VBs,
// 4 KB TLBs otherwise, then a walk of the VB's structure.
class VbiTranslator {
 public:
  VbiTranslator(const TlbConfig& cfg, AddressingMode mode);

  VbiTranslation translate(const Vbuid& vb, uint64_t offset, const TranslationStructure& ts);

  void invalidate_vb(const Vbuid& vb);
  void invalidate_page(const Vbuid& vb, uint64_t page);

  const Tlb& l1_tlb() const { return l1_; }
  const Tlb& l2_tlb() const { return l2_; }
  const Tlb& vb_direct_tlb() const { return direct_; }
  const PageWalkCache& pwc() const { return pwc_; }
  const VbiTranslatorStats& stats() const { return stats_; }
  unsigned l2_latency() const { return l2_latency_; }

 private:
  uint64_t page_key(const Vbuid& vb, uint64_t page) const;

  AddressingMode mode_;
  Tlb l1_;
  Tlb l2_;
  Tlb direct_;
  PageWalkCache pwc_;
  unsigned l2_latency_;
  VbiTranslatorStats stats_;
};

}  // namespace vbi
