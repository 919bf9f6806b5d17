#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace vbi {

// Set-associative array with true LRU replacement inside each set. A fully
// associative structure is one set; a direct-mapped one has one way.
template <typename Payload>
class LruArray {
 public:
  struct Entry {
    uint64_t key = 0;
    Payload payload{};
    uint64_t stamp = 0;
    bool valid = false;
  };

  LruArray(std::size_t entries, std::size_t ways)
      : ways_(ways == 0 ? entries : ways),
        sets_(entries / ways_),
        slots_(sets_ * ways_) {}

  std::size_t sets() const { return sets_; }
  std::size_t ways() const { return ways_; }
  std::size_t capacity() const { return slots_.size(); }

  // Lookup that promotes the entry to MRU.
  Payload* find(uint64_t key) {
    Entry* e = locate(key);
    if (e == nullptr) return nullptr;
    e->stamp = ++clock_;
    return &e->payload;
  }

  // Lookup without touching replacement state.
  const Payload* peek(uint64_t key) const {
    const std::size_t base = set_of(key) * ways_;
    for (std::size_t w = 0; w < ways_; ++w) {
      const Entry& e = slots_[base + w];
      if (e.valid && e.key == key) return &e.payload;
    }
    return nullptr;
  }

  // Inserts (or overwrites) `key` as MRU. Returns the evicted entry, if any.
  std::optional<std::pair<uint64_t, Payload>> insert(uint64_t key, Payload payload) {
    if (Entry* e = locate(key)) {
      e->payload = std::move(payload);
      e->stamp = ++clock_;
      return std::nullopt;
    }
    const std::size_t base = set_of(key) * ways_;
    Entry* victim = &slots_[base];
    for (std::size_t w = 0; w < ways_; ++w) {
      Entry& e = slots_[base + w];
      if (!e.valid) {
        victim = &e;
        break;
      }
      if (e.stamp < victim->stamp) victim = &e;
    }
    std::optional<std::pair<uint64_t, Payload>> evicted;
    if (victim->valid) evicted.emplace(victim->key, std::move(victim->payload));
    *victim = Entry{key, std::move(payload), ++clock_, true};
    return evicted;
  }

  std::optional<Payload> erase(uint64_t key) {
    Entry* e = locate(key);
    if (e == nullptr) return std::nullopt;
    e->valid = false;
    return std::move(e->payload);
  }

  template <typename Pred>
  std::size_t erase_if(Pred pred) {
    std::size_t n = 0;
    for (Entry& e : slots_) {
      if (e.valid && pred(e.key, e.payload)) {
        e.valid = false;
        ++n;
      }
    }
    return n;
  }

  template <typename Fn>
  void for_each(Fn fn) {
    for (Entry& e : slots_) {
      if (e.valid) fn(e.key, e.payload);
    }
  }

  template <typename Fn>
  void for_each(Fn fn) const {
    for (const Entry& e : slots_) {
      if (e.valid) fn(e.key, e.payload);
    }
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (const Entry& e : slots_) n += e.valid ? 1 : 0;
    return n;
  }

  void clear() {
    for (Entry& e : slots_) e.valid = false;
  }

 private:
  std::size_t set_of(uint64_t key) const { return sets_ == 1 ? 0 : key % sets_; }

  Entry* locate(uint64_t key) {
    const std::size_t base = set_of(key) * ways_;
    for (std::size_t w = 0; w < ways_; ++w) {
      Entry& e = slots_[base + w];
      if (e.valid && e.key == key) return &e;
    }
    return nullptr;
  }

  std::size_t ways_;
  std::size_t sets_;
  std::vector<Entry> slots_;
  uint64_t clock_ = 0;
};

// Small mixing function for composite keys (splitmix64 finalizer).
constexpr uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr uint64_t combine_key(uint64_t a, uint64_t b) { return mix64(a * 0x100000001b3ULL ^ mix64(b)); }

}  // namespace vbi
