#include "vbi/x86_translation.hpp"

#include "vbi/address.hpp"
#include "vbi/errors.hpp"

namespace vbi {

namespace {

constexpr uint16_t kHostSpace = 0xffff;
// Guest page-table pages are placed high in guest-physical space, away from data.
constexpr uint64_t kGuestTableBase = uint64_t{1} << 46;

uint64_t pwc_tag(uint16_t space, unsigned level, uint64_t vpn) {
  return (uint64_t{space} << 44) | (uint64_t{level} << 40) | (vpn >> (RadixTable::kFanoutBits * level));
}

}  // namespace

X86PageTable::X86PageTable(unsigned page_bits, MetadataArena& arena)
    : page_bits_(page_bits),
      table_(kVirtualAddressBits - page_bits, RadixTable::levels_for(kVirtualAddressBits - page_bits),
             arena) {}

std::optional<uint64_t> X86PageTable::lookup(uint64_t vpn) const {
  auto it = leaves_.find(vpn);
  if (it == leaves_.end()) return std::nullopt;
  return it->second;
}

void X86PageTable::map(uint64_t vpn, uint64_t page_base) {
  if (vpn >> table_.index_bits()) throw CapacityError("virtual address beyond 48 bits");
  table_.ensure_path(vpn);
  leaves_[vpn] = page_base;
}

bool X86PageTable::unmap(uint64_t vpn) { return leaves_.erase(vpn) != 0; }

X86Mmu::X86Mmu(X86Mode mode, const TlbConfig& cfg, MetadataArena& host_arena, X86Backing backing,
               bool perfect_tlb)
    : mode_(mode),
      host_arena_(&host_arena),
      guest_arena_(kGuestTableBase),
      backing_(std::move(backing)),
      perfect_(perfect_tlb),
      l1_4k_(cfg.l1_4k_entries, 0),
      l1_2m_(cfg.l1_2m_entries, 0),
      l2_(cfg.l2_entries, cfg.l2_ways),
      pwc_(cfg.pwc_entries),
      l2_latency_(cfg.l2_latency) {
  if (x86_nested(mode_)) host_table_ = std::make_unique<X86PageTable>(page_bits(), *host_arena_);
}

X86PageTable& X86Mmu::table_for(uint16_t asid) {
  auto& slot = tables_[asid];
  if (!slot) {
    MetadataArena& arena = x86_nested(mode_) ? guest_arena_ : *host_arena_;
    slot = std::make_unique<X86PageTable>(page_bits(), arena);
  }
  return *slot;
}

const X86PageTable* X86Mmu::find_table(uint16_t asid) const {
  auto it = tables_.find(asid);
  return it == tables_.end() ? nullptr : it->second.get();
}

uint64_t X86Mmu::tlb_key(uint16_t asid, uint64_t vpn) const {
  const uint64_t large = x86_large_pages(mode_) ? uint64_t{1} << 63 : 0;
  return large | (uint64_t{asid} << 40) | vpn;
}

void X86Mmu::walk(const X86PageTable& table, uint16_t space, uint64_t vpn,
                  std::vector<uint64_t>& entries, bool& pwc_hit) {
  const RadixTable& radix = table.radix();
  const unsigned levels = radix.levels();
  unsigned start = levels - 1;
  bool hit = false;
  for (unsigned l = 1; l < levels; ++l) {
    const uint64_t tag = pwc_tag(space, l, vpn);
    if (pwc_.probe(tag)) {
      pwc_.touch(tag);
      start = l - 1;
      hit = true;
      break;
    }
  }
  pwc_.record(hit);
  pwc_hit = pwc_hit || hit;
  const std::vector<uint64_t> reads = radix.walk(vpn, start);
  for (unsigned i = 0; i < reads.size(); ++i) {
    const unsigned l = start - i;
    if (l >= 1) pending_pwc_.push_back({pwc_tag(space, l, vpn), space});
  }
  entries.insert(entries.end(), reads.begin(), reads.end());
}

uint64_t X86Mmu::host_translate(uint64_t gpa, bool table_page, X86Translation& out) {
  const unsigned bits = page_bits();
  const uint64_t gpn = gpa >> bits;
  std::optional<uint64_t> base = host_table_->lookup(gpn);
  if (!base) {
    base = backing_.host_fault(gpn, table_page);
    host_table_->map(gpn, *base);
    ++out.host_faults;
  }
  std::vector<uint64_t> entries;
  walk(*host_table_, kHostSpace, gpn, entries, out.pwc_hit);
  out.nested_accesses += static_cast<unsigned>(entries.size());
  out.walk_accesses += static_cast<unsigned>(entries.size());
  out.reads.insert(out.reads.end(), entries.begin(), entries.end());
  return *base + (gpa & ((uint64_t{1} << bits) - 1));
}

X86Translation X86Mmu::translate(uint16_t asid, uint64_t vaddr) {
  X86Translation out;
  const unsigned bits = page_bits();
  const uint64_t vpn = vaddr >> bits;
  const uint64_t in_page = vaddr & ((uint64_t{1} << bits) - 1);
  X86PageTable& table = table_for(asid);

  if (perfect_) {
    std::optional<uint64_t> base = table.lookup(vpn);
    if (!base) {
      base = backing_.native_fault(asid, vpn);
      table.map(vpn, *base);
      ++out.faults;
    }
    out.level = TlbLevel::l1;
    out.paddr = *base + in_page;
    return out;
  }

  const uint64_t key = tlb_key(asid, vpn);
  if (auto base = l1().lookup(key)) {
    out.level = TlbLevel::l1;
    out.paddr = *base + in_page;
    return out;
  }
  if (auto base = l2_.lookup(key)) {
    out.level = TlbLevel::l2;
    out.paddr = *base + in_page;
    l1().insert(key, *base, asid);
    return out;
  }

  ++walks_;
  pending_pwc_.clear();
  out.level = TlbLevel::walk;
  std::optional<uint64_t> base = table.lookup(vpn);
  if (!base) {
    base = x86_nested(mode_) ? backing_.guest_fault(asid, vpn) : backing_.native_fault(asid, vpn);
    table.map(vpn, *base);
    ++out.faults;
  }

  std::vector<uint64_t> entries;
  walk(table, asid, vpn, entries, out.pwc_hit);
  uint64_t page_base = *base;
  if (x86_nested(mode_)) {
    for (uint64_t gpa : entries) {
      const uint64_t hpa = host_translate(gpa, true, out);
      out.reads.push_back(hpa);
      ++out.walk_accesses;
    }
    page_base = host_translate(*base, false, out);
  } else {
    out.reads = entries;
    out.walk_accesses = static_cast<unsigned>(entries.size());
  }

  // The walk's non-leaf entries become visible to the PWC once it completes.
  for (const auto& [tag, owner] : pending_pwc_) pwc_.insert(tag, owner);
  pending_pwc_.clear();

  l2_.insert(key, page_base, asid);
  l1().insert(key, page_base, asid);
  out.paddr = page_base + in_page;
  return out;
}

std::optional<uint64_t> X86Mmu::lookup(uint16_t asid, uint64_t vpn) const {
  const X86PageTable* t = find_table(asid);
  return t ? t->lookup(vpn) : std::nullopt;
}

std::optional<uint64_t> X86Mmu::unmap(uint16_t asid, uint64_t vpn) {
  auto it = tables_.find(asid);
  if (it == tables_.end()) return std::nullopt;
  std::optional<uint64_t> base = it->second->lookup(vpn);
  if (!base) return std::nullopt;
  it->second->unmap(vpn);
  const uint64_t key = tlb_key(asid, vpn);
  l1().invalidate(key);
  l2_.invalidate(key);
  return base;
}

void X86Mmu::remap(uint16_t asid, uint64_t vpn, uint64_t page_base) {
  table_for(asid).map(vpn, page_base);
  const uint64_t key = tlb_key(asid, vpn);
  l1().invalidate(key);
  l2_.invalidate(key);
}

void X86Mmu::map_host(uint64_t gpn, uint64_t page_base) {
  if (!host_table_) throw Error("host mapping outside a nested configuration");
  host_table_->map(gpn, page_base);
}

}  // namespace vbi
