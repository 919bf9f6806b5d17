#include "vbi/registry.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "vbi/errors.hpp"

namespace vbi {

namespace {

struct FlagName {
  std::string_view name;
  std::string_view alias;
  Props::Flag flag;
};

constexpr FlagName kFlagNames[] = {
    {"code", "x", Props::code},
    {"read_only", "ro", Props::read_only},
    {"kernel", "k", Props::kernel},
    {"compressible", "cmp", Props::compressible},
    {"persistent", "pers", Props::persistent},
    {"latency_sensitive", "lat", Props::latency_sensitive},
    {"bandwidth_sensitive", "bw", Props::bandwidth_sensitive},
    {"error_tolerant", "et", Props::error_tolerant},
};

}  // namespace

Props Props::parse(std::string_view text) {
  if (text.empty() || text == "-" || text == "none") return Props{};
  if (std::isdigit(static_cast<unsigned char>(text.front()))) {
    int base = 10;
    if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
      text.remove_prefix(2);
      base = 16;
    }
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value, base);
    if (ec != std::errc{} || ptr != text.data() + text.size() || value > 0xffff) {
      throw ConfigError("malformed props mask");
    }
    if (value & ~kKnownMask) throw ConfigError("props mask uses reserved bits");
    return Props{static_cast<uint16_t>(value)};
  }
  uint16_t bits = 0;
  while (!text.empty()) {
    const auto bar = text.find('|');
    const std::string_view word = text.substr(0, bar);
    const auto it = std::find_if(std::begin(kFlagNames), std::end(kFlagNames),
                                 [&](const FlagName& f) { return f.name == word || f.alias == word; });
    if (it == std::end(kFlagNames)) throw ConfigError("unknown property '" + std::string(word) + "'");
    bits |= it->flag;
    text = bar == std::string_view::npos ? std::string_view{} : text.substr(bar + 1);
  }
  return Props{bits};
}

std::string Props::to_string() const {
  if (bits_ == 0) return "-";
  std::string out;
  for (const auto& f : kFlagNames) {
    if (bits_ & f.flag) {
      if (!out.empty()) out += '|';
      out += f.alias;
    }
  }
  return out;
}

const char* structure_name(StructureKind kind) {
  switch (kind) {
    case StructureKind::direct: return "direct";
    case StructureKind::single_level: return "single_level";
    case StructureKind::multi_level: return "multi_level";
  }
  return "unknown";
}

bool VitCache::lookup(const Vbuid& vb) {
  if (array_.find(vb.key()) != nullptr) {
    ++stats_.hits;
    return true;
  }
  ++stats_.misses;
  array_.insert(vb.key(), 0);
  return false;
}

bool ScrubQueue::pending(const Vbuid& vb) const {
  return std::any_of(jobs_.begin(), jobs_.end(), [&](const ScrubJob& j) { return j.vb == vb; });
}

std::vector<Vbuid> ScrubQueue::advance(uint64_t cycles) {
  std::vector<Vbuid> done;
  if (jobs_.empty()) {
    credit_ = 0;
    return done;
  }
  credit_ += cycles * rate_;
  while (!jobs_.empty() && jobs_.front().lines_remaining <= credit_) {
    credit_ -= jobs_.front().lines_remaining;
    done.push_back(jobs_.front().vb);
    jobs_.pop_front();
  }
  if (!jobs_.empty()) {
    jobs_.front().lines_remaining -= credit_;
    credit_ = 0;
  } else {
    credit_ = 0;
  }
  return done;
}

uint64_t ScrubQueue::cycles_until_done(const Vbuid& vb) const {
  uint64_t lines = 0;
  for (const auto& job : jobs_) {
    lines += job.lines_remaining;
    if (job.vb == vb) {
      const uint64_t need = lines > credit_ ? lines - credit_ : 0;
      return (need + rate_ - 1) / rate_;
    }
  }
  return 0;
}

VbRegistry::VbRegistry(AddressingMode mode, uint8_t vm_id, std::size_t vit_cache_entries,
                       uint64_t scrub_rate)
    : mode_(mode),
      vm_id_(vm_id),
      tables_(kNumSizeClasses),
      vit_cache_(vit_cache_entries),
      scrub_(scrub_rate) {
  if (!mode.vm_mode && vm_id != 0) throw ConfigError("vm_id set outside VM mode");
  if (mode.vm_mode && (vm_id == 0 || vm_id >= (1u << kVmIdBits))) {
    throw ConfigError("vm_id must be in 1..31 (0 is the host)");
  }
}

void VbRegistry::check_vb(const Vbuid& vb) const {
  if (vb.size_id >= kNumSizeClasses) throw LifecycleError("bad size class in " + vb.to_string());
  if (vb.vm_id != vm_id_) throw LifecycleError("VB " + vb.to_string() + " belongs to another VM");
  if (vb.vbid >> mode_.vbid_bits(vb.size_id)) throw LifecycleError("VBID out of range");
}

Vbuid VbRegistry::pick_free(unsigned size_id) const {
  const auto& table = tables_.at(size_id);
  const uint64_t limit = uint64_t{1} << mode_.vbid_bits(size_id);
  for (uint64_t v = 0; v < limit; ++v) {
    if (v < table.size() && table[v].enabled) continue;
    const Vbuid vb{static_cast<uint8_t>(size_id), vm_id_, v};
    if (scrub_.pending(vb)) continue;
    return vb;
  }
  throw CapacityError("size class " + std::to_string(size_id) + " exhausted");
}

void VbRegistry::enable_vb(const Vbuid& vb, Props props) {
  check_vb(vb);
  if (enabled(vb)) throw LifecycleError("VB " + vb.to_string() + " already enabled");
  if (scrub_.pending(vb)) {
    throw LifecycleError("VB " + vb.to_string() + " awaits cache scrub");
  }
  auto& table = tables_[vb.size_id];
  if (table.size() <= vb.vbid) table.resize(vb.vbid + 1);
  VitEntry& e = table[vb.vbid];
  e = VitEntry{};
  e.enabled = true;
  e.props = props;
  e.ref_count = 0;
}

void VbRegistry::disable_vb(const Vbuid& vb, uint64_t cached_lines) {
  VitEntry& e = entry(vb);
  if (e.ref_count != 0) {
    throw LifecycleError("VB " + vb.to_string() + " still attached (ref_count " +
                         std::to_string(e.ref_count) + ")");
  }
  e = VitEntry{};
  vit_cache_.invalidate(vb);
  if (cached_lines > 0) scrub_.push(vb, cached_lines);
  trim(vb.size_id);
}

void VbRegistry::trim(unsigned size_id) {
  auto& table = tables_[size_id];
  while (!table.empty() && !table.back().enabled) table.pop_back();
}

void VbRegistry::acquire(const Vbuid& vb) { ++entry(vb).ref_count; }

void VbRegistry::release(const Vbuid& vb) {
  VitEntry& e = entry(vb);
  if (e.ref_count == 0) throw LifecycleError("reference count underflow on " + vb.to_string());
  --e.ref_count;
}

bool VbRegistry::enabled(const Vbuid& vb) const {
  const VitEntry* e = find(vb);
  return e != nullptr && e->enabled;
}

const VitEntry* VbRegistry::find(const Vbuid& vb) const {
  if (vb.size_id >= kNumSizeClasses || vb.vm_id != vm_id_) return nullptr;
  const auto& table = tables_[vb.size_id];
  if (vb.vbid >= table.size()) return nullptr;
  return &table[vb.vbid];
}

VitEntry& VbRegistry::entry(const Vbuid& vb) {
  check_vb(vb);
  auto& table = tables_[vb.size_id];
  if (vb.vbid >= table.size() || !table[vb.vbid].enabled) {
    throw LifecycleError("VB " + vb.to_string() + " is not enabled");
  }
  return table[vb.vbid];
}

uint64_t VbRegistry::entry_address(const Vbuid& vb, uint64_t base) const {
  // 16-byte entries; each class gets a 1 GB window of the metadata region.
  constexpr uint64_t kWindow = uint64_t{1} << 30;
  return base + vb.size_id * kWindow + (vb.vbid % (kWindow / 16)) * 16;
}

std::vector<Vbuid> VbRegistry::enabled_vbs() const {
  std::vector<Vbuid> out;
  for (unsigned s = 0; s < kNumSizeClasses; ++s) {
    for (uint64_t v = 0; v < tables_[s].size(); ++v) {
      if (tables_[s][v].enabled) out.push_back(Vbuid{static_cast<uint8_t>(s), vm_id_, v});
    }
  }
  return out;
}

}  // namespace vbi
