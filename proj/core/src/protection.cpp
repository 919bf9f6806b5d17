#include "vbi/protection.hpp"

#include <algorithm>

#include "vbi/errors.hpp"

namespace vbi {

Perms Perms::parse(std::string_view text) {
  if (text == "-") return Perms{};
  uint8_t bits = 0;
  for (char c : text) {
    switch (c) {
      case 'r': bits |= r; break;
      case 'w': bits |= w; break;
      case 'x': bits |= x; break;
      default: throw ConfigError("bad permission letter '" + std::string(1, c) + "'");
    }
  }
  if (text.empty()) throw ConfigError("empty permission string");
  return Perms{bits};
}

Perms Perms::from_props(Props props) {
  uint8_t bits = r;
  if (!props.has(Props::read_only)) bits |= w;
  if (props.has(Props::code)) bits |= x;
  return Perms{bits};
}

std::string Perms::to_string() const {
  if (bits_ == 0) return "-";
  std::string s;
  if (bits_ & r) s += 'r';
  if (bits_ & w) s += 'w';
  if (bits_ & x) s += 'x';
  return s;
}

std::optional<uint32_t> ClientTable::index_of(const Vbuid& vb) const {
  for (uint32_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].valid && entries_[i].vbuid == vb) return i;
  }
  return std::nullopt;
}

uint32_t ClientTable::insert(const Vbuid& vb, Perms perms) {
  for (uint32_t i = 0; i < entries_.size(); ++i) {
    if (!entries_[i].valid) {
      entries_[i] = CvtEntry{true, vb, perms};
      return i;
    }
  }
  entries_.push_back(CvtEntry{true, vb, perms});
  return static_cast<uint32_t>(entries_.size() - 1);
}

bool CvtCache::lookup(ClientId client, uint32_t index) {
  Slot& s = slots_[index % slots_.size()];
  if (s.valid && s.client == client && s.index == index) {
    ++stats_.hits;
    return true;
  }
  ++stats_.misses;
  s.valid = true;
  s.client = client;
  s.index = index;
  return false;
}

void CvtCache::update(ClientId client, uint32_t index, const CvtEntry& entry) {
  Slot& s = slots_[index % slots_.size()];
  if (s.valid && s.client == client && s.index == index) s.entry = entry;
}

Protection::Protection(VbRegistry& registry, std::size_t cvt_cache_slots,
                       std::size_t max_entries_per_client)
    : registry_(registry), cache_(cvt_cache_slots), max_entries_(max_entries_per_client) {}

uint32_t Protection::attach(ClientId client, const Vbuid& vb, Perms perms) {
  if (!registry_.enabled(vb)) {
    throw LifecycleError("attach of VB " + vb.to_string() + " which is not enabled");
  }
  auto [it, inserted] = tables_.try_emplace(client, client);
  ClientTable& table = it->second;
  if (table.index_of(vb)) {
    throw LifecycleError("VB " + vb.to_string() + " already attached to client " +
                         std::to_string(client));
  }
  const auto& entries = table.entries();
  const bool has_hole =
      std::any_of(entries.begin(), entries.end(), [](const CvtEntry& e) { return !e.valid; });
  if (!has_hole && entries.size() >= max_entries_) {
    throw CapacityError("CVT of client " + std::to_string(client) + " is full");
  }
  const uint32_t index = table.insert(vb, perms);
  registry_.acquire(vb);
  cache_.update(client, index, table.at(index));
  return index;
}

void Protection::detach(ClientId client, const Vbuid& vb) {
  auto it = tables_.find(client);
  const auto index = it == tables_.end() ? std::nullopt : it->second.index_of(vb);
  if (!index) {
    throw LifecycleError("client " + std::to_string(client) + " has no entry for VB " +
                         vb.to_string());
  }
  it->second.invalidate(*index);
  registry_.release(vb);
  cache_.update(client, *index, it->second.at(*index));
}

FormedAddress Protection::check_and_form_address(ClientId client, uint32_t index,
                                                 uint64_t offset, AccessKind kind) {
  auto it = tables_.find(client);
  if (it == tables_.end() || index >= it->second.entries().size()) {
    throw ProtectionFault(FaultCode::index_range, "CVT index out of range");
  }
  const bool hit = cache_.lookup(client, index);
  const CvtEntry& e = it->second.entries()[index];
  if (!e.valid) throw ProtectionFault(FaultCode::invalid_entry, "invalid CVT entry");
  if (!e.perms.allows(kind)) throw ProtectionFault(FaultCode::perm, "permission denied");
  if (offset >= e.vbuid.size_class().size_bytes) {
    throw ProtectionFault(FaultCode::bounds, "offset beyond VB size");
  }
  return FormedAddress{make_address(e.vbuid, offset, registry_.mode()), e.vbuid, hit};
}

void Protection::repoint(const Vbuid& from, const Vbuid& to) {
  for (auto& [client, table] : tables_) {
    if (auto index = table.index_of(from)) {
      registry_.acquire(to);
      registry_.release(from);
      table.at(*index).vbuid = to;
      cache_.update(client, *index, table.at(*index));
    }
  }
}

std::vector<ClientId> Protection::clients_attached(const Vbuid& vb) const {
  std::vector<ClientId> out;
  for (const auto& [client, table] : tables_) {
    if (table.index_of(vb)) out.push_back(client);
  }
  return out;
}

const ClientTable* Protection::table(ClientId client) const {
  auto it = tables_.find(client);
  return it == tables_.end() ? nullptr : &it->second;
}

const CvtEntry* Protection::entry(ClientId client, uint32_t index) const {
  const ClientTable* t = table(client);
  if (t == nullptr || index >= t->entries().size()) return nullptr;
  return &t->entries()[index];
}

}  // namespace vbi
