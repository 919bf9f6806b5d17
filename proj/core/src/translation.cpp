#include "vbi/translation.hpp"

#include "vbi/errors.hpp"

namespace vbi {

StructureKind choose_structure(const SizeClass& cls, bool reserved_contiguous) {
  if (reserved_contiguous || cls.size_id == 0) return StructureKind::direct;
  if (cls.size_id <= 2) return StructureKind::single_level;
  return StructureKind::multi_level;
}

unsigned multi_level_depth(const SizeClass& cls) {
  return RadixTable::levels_for(cls.offset_bits - kPageBits);
}

TranslationStructure::TranslationStructure(const SizeClass& cls, StructureKind kind,
                                           MetadataArena& arena)
    : cls_(cls), kind_(kind), arena_(&arena) {
  if (kind_ != StructureKind::direct) build_table();
}

unsigned TranslationStructure::depth() const {
  switch (kind_) {
    case StructureKind::direct:
      return 0;
    case StructureKind::single_level:
      return 1;
    case StructureKind::multi_level:
      return table_->levels();
  }
  return 0;
}

void TranslationStructure::build_table() {
  const unsigned bits = cls_.offset_bits - kPageBits;
  const unsigned levels = kind_ == StructureKind::single_level ? 1 : RadixTable::levels_for(bits);
  table_ = std::make_unique<RadixTable>(bits, levels, *arena_);
  for (const auto& [page, m] : pages_) {
    if (m.state != RegionState::unallocated) table_->ensure_path(page);
  }
}

void TranslationStructure::make_direct(uint64_t base_frame) {
  kind_ = StructureKind::direct;
  direct_base_ = base_frame;
  table_.reset();
}

void TranslationStructure::make_table() {
  direct_base_.reset();
  if (cls_.size_id == 0 || kind_ != StructureKind::direct) return;
  kind_ = choose_structure(cls_);
  build_table();
}

const PageMapping* TranslationStructure::find(uint64_t page) const {
  auto it = pages_.find(page);
  return it == pages_.end() ? nullptr : &it->second;
}

void TranslationStructure::map(uint64_t page, const PageMapping& m) {
  if (page >= cls_.pages()) throw Error("page beyond VB size");
  auto [it, inserted] = pages_.try_emplace(page, m);
  if (!inserted) {
    if (it->second.state == RegionState::allocated) --allocated_;
    it->second = m;
  }
  if (m.state == RegionState::allocated) ++allocated_;
  if (table_ && m.state != RegionState::unallocated) table_->ensure_path(page);
}

void TranslationStructure::set_cow(uint64_t page, bool cow) {
  auto it = pages_.find(page);
  if (it != pages_.end()) it->second.cow = cow;
}

bool TranslationStructure::unmap(uint64_t page) {
  auto it = pages_.find(page);
  if (it == pages_.end()) return false;
  if (it->second.state == RegionState::allocated) --allocated_;
  pages_.erase(it);
  return true;
}

std::optional<uint64_t> TranslationStructure::root() const {
  if (table_) return table_->root_address();
  if (direct_base_) return *direct_base_ << kPageBits;
  if (const PageMapping* m = find(0); m && m->state == RegionState::allocated) {
    return m->frame << kPageBits;
  }
  return std::nullopt;
}

VbiTranslator::VbiTranslator(const TlbConfig& cfg, AddressingMode mode)
    : mode_(mode),
      l1_(cfg.l1_4k_entries, 0),
      l2_(cfg.l2_entries, cfg.l2_ways),
      direct_(cfg.vb_direct_entries, 0),
      pwc_(cfg.pwc_entries),
      l2_latency_(cfg.l2_latency) {}

uint64_t VbiTranslator::page_key(const Vbuid& vb, uint64_t page) const {
  return make_address(vb, page << kPageBits, mode_).raw >> kPageBits;
}

namespace {

uint64_t pwc_tag(uint64_t page_key, unsigned level) {
  return (uint64_t{level} << 60) | (page_key >> (RadixTable::kFanoutBits * level));
}

void fill_from_mapping(VbiTranslation& out, const PageMapping* m) {
  if (m == nullptr || m->state == RegionState::unallocated || m->state == RegionState::reserved) {
    out.outcome = TranslationOutcome::unbacked;
  } else if (m->state == RegionState::swapped_out) {
    out.outcome = TranslationOutcome::swapped_out;
  } else {
    out.outcome = TranslationOutcome::mapped;
    out.frame = m->frame;
    out.cow = m->cow;
  }
}

}  // namespace

VbiTranslation VbiTranslator::translate(const Vbuid& vb, uint64_t offset,
                                        const TranslationStructure& ts) {
  ++stats_.calls;
  VbiTranslation out;
  const uint64_t page = offset >> kPageBits;
  const PageMapping* m = ts.find(page);

  if (ts.kind() == StructureKind::direct) {
    // One entry covers the whole VB; page state still decides the outcome.
    out.level = TlbLevel::vb_direct;
    if (!direct_.lookup(vb.key())) {
      out.tlb_miss = true;
      direct_.insert(vb.key(), 0, vb.key());
    }
    fill_from_mapping(out, m);
    return out;
  }

  const uint64_t key = page_key(vb, page);
  if (auto f = l1_.lookup(key)) {
    out.level = TlbLevel::l1;
    fill_from_mapping(out, m);
    return out;
  }
  if (auto f = l2_.lookup(key)) {
    out.level = TlbLevel::l2;
    fill_from_mapping(out, m);
    if (out.outcome == TranslationOutcome::mapped) l1_.insert(key, out.frame, vb.key());
    return out;
  }

  const RadixTable* table = ts.table();
  const unsigned levels = table->levels();
  unsigned start = levels - 1;
  bool pwc_hit = false;
  for (unsigned l = 1; l < levels; ++l) {
    if (pwc_.probe(pwc_tag(key, l))) {
      pwc_.touch(pwc_tag(key, l));
      start = l - 1;
      pwc_hit = true;
      break;
    }
  }
  if (levels > 1) pwc_.record(pwc_hit);
  out.pwc_hit = pwc_hit;
  out.walk_reads = table->walk(page, start);
  for (unsigned i = 0; i < out.walk_reads.size(); ++i) {
    const unsigned l = start - i;
    if (l >= 1) pwc_.insert(pwc_tag(key, l), vb.key());
  }
  ++stats_.walks;
  stats_.walk_accesses += out.walk_reads.size();
  out.level = TlbLevel::walk;
  out.tlb_miss = true;
  fill_from_mapping(out, m);
  if (out.outcome == TranslationOutcome::mapped) {
    l2_.insert(key, out.frame, vb.key());
    l1_.insert(key, out.frame, vb.key());
  }
  return out;
}

void VbiTranslator::invalidate_vb(const Vbuid& vb) {
  l1_.invalidate_owner(vb.key());
  l2_.invalidate_owner(vb.key());
  direct_.invalidate_owner(vb.key());
  pwc_.invalidate_owner(vb.key());
}

void VbiTranslator::invalidate_page(const Vbuid& vb, uint64_t page) {
  const uint64_t key = page_key(vb, page);
  l1_.invalidate(key);
  l2_.invalidate(key);
}

}  // namespace vbi
