#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace vbi {

// Tag of a free block that is not reserved for any VB.
inline constexpr uint64_t kUnreserved = ~uint64_t{0};

struct BlockInfo {
  uint64_t start = 0;
  unsigned order = 0;
  bool allocated = false;
  // Free block: reservation owner or kUnreserved. Allocated block: allocating owner.
  uint64_t tag = kUnreserved;

  uint64_t frames() const { return uint64_t{1} << order; }
};

// Buddy allocator over 4 KB frames [0, total). Free blocks carry a reservation
// tag, and only buddies with equal tags coalesce. Allocation is deterministic:
// the lowest-address block of the smallest sufficient order.
class FramePool {
 public:
  static constexpr unsigned kMaxOrder = 40;

  explicit FramePool(uint64_t total_frames);

  uint64_t total_frames() const { return total_; }
  unsigned max_order() const { return max_order_; }
  uint64_t free_frames() const { return free_frames_; }
  uint64_t allocated_frames() const { return total_ - free_frames_; }
  uint64_t free_frames_tagged(uint64_t tag) const;
  uint64_t reserved_frames() const { return free_frames_ - free_frames_tagged(kUnreserved); }

  // From unreserved blocks.
  std::optional<uint64_t> alloc(unsigned order, uint64_t owner = kUnreserved);
  // From blocks reserved for `reservation`.
  std::optional<uint64_t> alloc_reserved(uint64_t reservation, unsigned order, uint64_t owner);
  // From blocks reserved for anyone other than `exclude`; returns (start, reservation owner).
  std::optional<std::pair<uint64_t, uint64_t>> alloc_foreign(uint64_t exclude, unsigned order,
                                                             uint64_t owner);
  // Allocates exactly [start, start + 2^order) if it lies inside one free block.
  bool alloc_at(uint64_t start, unsigned order, uint64_t owner);

  // Returns an allocated block to the free lists under `tag`.
  void free(uint64_t start, uint64_t tag = kUnreserved);

  // Retags an unreserved block of exactly 2^order frames (split from a larger one
  // if needed) as reserved for `owner`.
  std::optional<uint64_t> reserve(unsigned order, uint64_t owner);
  // Retags every free block reserved for `owner` as unreserved.
  void release(uint64_t owner);

  // Largest order among unreserved free blocks.
  std::optional<unsigned> largest_free_order() const;
  // Tag of the free block covering `frame`, or nullopt when it is allocated.
  std::optional<uint64_t> free_tag_at(uint64_t frame) const;
  std::optional<BlockInfo> allocated_block(uint64_t start) const;

  std::vector<BlockInfo> blocks() const;  // every block, ordered by start
  // Structural audit: overlap, conservation, maximal coalescing.
  bool check_invariants(std::string* why = nullptr) const;

 private:
  struct FreeInfo {
    unsigned order;
    uint64_t tag;
  };
  struct AllocInfo {
    unsigned order;
    uint64_t owner;
  };
  using OrderLists = std::array<std::set<uint64_t>, kMaxOrder + 1>;

  void insert_raw(uint64_t start, unsigned order, uint64_t tag);
  void insert_coalesce(uint64_t start, unsigned order, uint64_t tag);
  void remove_free(uint64_t start);
  uint64_t take_and_split(uint64_t start, unsigned target_order, uint64_t owner);
  std::optional<uint64_t> alloc_tagged(uint64_t tag, unsigned order, uint64_t owner);

  uint64_t total_;
  unsigned max_order_ = 0;
  uint64_t free_frames_ = 0;
  std::map<uint64_t, OrderLists> by_tag_;
  std::map<uint64_t, FreeInfo> free_;
  std::map<uint64_t, AllocInfo> allocated_;
};

}  // namespace vbi
