#include "vbi/hotness.hpp"

#include <algorithm>

#include "vbi/errors.hpp"

namespace vbi {

namespace {

constexpr unsigned kChunkClass = 2;  // 4 MB

std::vector<RankedUnit> rank(const std::map<UnitId, uint64_t>& counts) {
  std::vector<RankedUnit> out;
  for (const auto& [unit, count] : counts) {
    if (count == 0) continue;
    const double kb = static_cast<double>(unit_kb(Vbuid::from_key(unit.vb_key)));
    out.push_back({unit, count, static_cast<double>(count) / kb});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const RankedUnit& a, const RankedUnit& b) { return a.density > b.density; });
  return out;
}

}  // namespace

const char* policy_name(HetPolicy p) {
  switch (p) {
    case HetPolicy::aware: return "aware";
    case HetPolicy::unaware: return "unaware";
    case HetPolicy::ideal: return "ideal";
  }
  return "?";
}

HetPolicy parse_policy(std::string_view text) {
  if (text == "aware") return HetPolicy::aware;
  if (text == "unaware") return HetPolicy::unaware;
  if (text == "ideal") return HetPolicy::ideal;
  throw ConfigError("unknown policy '" + std::string(text) + "'");
}

UnitId unit_of(const Vbuid& vb, uint64_t page) {
  if (vb.size_id <= kChunkClass) return {vb.key(), 0};
  return {vb.key(), page >> kChunkPageBits};
}

uint64_t unit_kb(const Vbuid& vb) {
  const uint64_t bytes = std::min(vb.size_class().size_bytes, size_class(kChunkClass).size_bytes);
  return bytes >> 10;
}

std::pair<uint64_t, uint64_t> unit_pages(const Vbuid& vb, const UnitId& unit) {
  if (vb.size_id <= kChunkClass) return {0, vb.size_class().pages()};
  return {unit.chunk << kChunkPageBits, uint64_t{1} << kChunkPageBits};
}

HotnessTracker::HotnessTracker(HetPolicy policy, unsigned fast_zone, unsigned slow_zone,
                               uint64_t epoch_cycles)
    : policy_(policy), fast_(fast_zone), slow_(slow_zone), epoch_(epoch_cycles), next_epoch_(epoch_cycles) {
  if (epoch_cycles == 0) throw ConfigError("epoch length must be positive");
}

unsigned HotnessTracker::place(const UnitId& unit, Props props, uint64_t fast_free_frames) {
  if (auto it = zones_.find(unit); it != zones_.end()) return it->second;
  unsigned zone = slow_;
  switch (policy_) {
    case HetPolicy::aware:
      if (props.has(Props::latency_sensitive) || fast_free_frames > 0) zone = fast_;
      break;
    case HetPolicy::unaware:
      zone = (round_robin_++ % 2 == 0) ? fast_ : slow_;
      break;
    case HetPolicy::ideal:
      zone = oracle_fast_.count(unit) ? fast_ : slow_;
      break;
  }
  zones_[unit] = zone;
  return zone;
}

std::optional<unsigned> HotnessTracker::zone_of(const UnitId& unit) const {
  auto it = zones_.find(unit);
  if (it == zones_.end()) return std::nullopt;
  return it->second;
}

void HotnessTracker::forget(uint64_t vb_key) {
  std::erase_if(zones_, [&](const auto& kv) { return kv.first.vb_key == vb_key; });
  std::erase_if(epoch_counts_, [&](const auto& kv) { return kv.first.vb_key == vb_key; });
}

std::vector<RankedUnit> HotnessTracker::close_epoch(uint64_t now) {
  std::vector<RankedUnit> out = rank(epoch_counts_);
  epoch_counts_.clear();
  ++epochs_;
  while (next_epoch_ <= now) next_epoch_ += epoch_;
  return out;
}

void HotnessTracker::set_profile(const std::map<UnitId, uint64_t>& counts,
                                 const std::map<UnitId, uint64_t>& pages, uint64_t fast_frames) {
  oracle_fast_.clear();
  uint64_t used = 0;
  for (const RankedUnit& r : rank(counts)) {
    auto it = pages.find(r.unit);
    const uint64_t need = it == pages.end() ? 0 : it->second;
    if (used + need > fast_frames) continue;
    used += need;
    oracle_fast_[r.unit] = true;
  }
}

}  // namespace vbi
