#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "vbi/address.hpp"
#include "vbi/registry.hpp"

namespace vbi {

using ClientId = uint16_t;

enum class AccessKind : uint8_t { read, write, execute };

class Perms {
 public:
  static constexpr uint8_t r = 4, w = 2, x = 1;

  constexpr Perms() = default;
  constexpr explicit Perms(uint8_t bits) : bits_(bits & 7) {}

  // "rwx" letters in any order, or "-" for none.
  static Perms parse(std::string_view text);
  // RW by default; read_only drops W, code adds X.
  static Perms from_props(Props props);

  constexpr uint8_t bits() const { return bits_; }
  constexpr bool allows(AccessKind kind) const {
    switch (kind) {
      case AccessKind::read: return bits_ & r;
      case AccessKind::write: return bits_ & w;
      case AccessKind::execute: return bits_ & x;
    }
    return false;
  }
  std::string to_string() const;
  friend constexpr bool operator==(Perms, Perms) = default;

 private:
  uint8_t bits_ = 0;
};

struct CvtEntry {
  bool valid = false;
  Vbuid vbuid;
  Perms perms;
};

// Client-VB Table. Indices are stable for the lifetime of an attachment.
class ClientTable {
 public:
  explicit ClientTable(ClientId client = 0) : client_(client) {}

  ClientId client() const { return client_; }
  const std::vector<CvtEntry>& entries() const { return entries_; }
  std::optional<uint32_t> index_of(const Vbuid& vb) const;

  uint32_t insert(const Vbuid& vb, Perms perms);  // lowest invalid slot, else append
  void invalidate(uint32_t index) { entries_.at(index).valid = false; }
  CvtEntry& at(uint32_t index) { return entries_.at(index); }

 private:
  ClientId client_;
  std::vector<CvtEntry> entries_;
};

struct CvtCacheStats {
  uint64_t hits = 0;
  uint64_t misses = 0;
};

// Per-core direct-mapped cache of CVT entries, slot = index mod size. Slots are
// tagged with the client so switching clients cannot alias.
class CvtCache {
 public:
  explicit CvtCache(std::size_t slots = 64) : slots_(slots) {}

  bool lookup(ClientId client, uint32_t index);  // fills on miss
  void update(ClientId client, uint32_t index, const CvtEntry& entry);
  const CvtCacheStats& stats() const { return stats_; }
  std::size_t size() const { return slots_.size(); }

 private:
  struct Slot {
    bool valid = false;
    ClientId client = 0;
    uint32_t index = 0;
    CvtEntry entry;
  };
  std::vector<Slot> slots_;
  CvtCacheStats stats_;
};

struct FormedAddress {
  VbiAddress address;
  Vbuid vbuid;
  bool cvt_hit = false;
};

class Protection {
 public:
  Protection(VbRegistry& registry, std::size_t cvt_cache_slots = 64,
             std::size_t max_entries_per_client = 4096);

  uint32_t attach(ClientId client, const Vbuid& vb, Perms perms);
  void detach(ClientId client, const Vbuid& vb);

  // Throws ProtectionFault with a code naming the failed check.
  FormedAddress check_and_form_address(ClientId client, uint32_t index, uint64_t offset,
                                       AccessKind kind);

  // Retargets every valid entry naming `from` to `to`, moving references.
  void repoint(const Vbuid& from, const Vbuid& to);
  std::vector<ClientId> clients_attached(const Vbuid& vb) const;

  const ClientTable* table(ClientId client) const;
  const CvtEntry* entry(ClientId client, uint32_t index) const;
  CvtCache& cvt_cache() { return cache_; }
  const CvtCache& cvt_cache() const { return cache_; }

 private:
  VbRegistry& registry_;
  CvtCache cache_;
  std::size_t max_entries_;
  std::map<ClientId, ClientTable> tables_;
};

}  // namespace vbi
