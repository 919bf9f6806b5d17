#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>

namespace vbi {

inline constexpr unsigned kNumSizeClasses = 8;
inline constexpr unsigned kSizeIdBits = 3;
inline constexpr unsigned kVmIdBits = 5;
inline constexpr unsigned kPageBits = 12;
inline constexpr uint64_t kPageSize = uint64_t{1} << kPageBits;
inline constexpr unsigned kLineBits = 6;
inline constexpr uint64_t kLineSize = uint64_t{1} << kLineBits;

struct SizeClass {
  uint8_t size_id = 0;
  uint64_t size_bytes = 0;
  unsigned offset_bits = 0;

  uint64_t pages() const { return size_bytes >> kPageBits; }
  friend bool operator==(const SizeClass&, const SizeClass&) = default;
};

// 4 KB, 128 KB, 4 MB, ... 128 TB: each class is 32x the previous one.
constexpr SizeClass size_class(unsigned size_id) {
  const unsigned bits = kPageBits + 5 * size_id;
  return SizeClass{static_cast<uint8_t>(size_id), uint64_t{1} << bits, bits};
}

inline constexpr std::array<SizeClass, kNumSizeClasses> kSizeClasses = {
    size_class(0), size_class(1), size_class(2), size_class(3),
    size_class(4), size_class(5), size_class(6), size_class(7)};

// Smallest class holding `requested_size` bytes. Throws CapacityError above 128 TB
// and for a zero-byte request.
SizeClass class_for_request(uint64_t requested_size);

// VM mode is a run-wide flag: when set, 5 bits after SizeID carry the VM ID and
// are taken out of the VBID field.
struct AddressingMode {
  bool vm_mode = false;

  unsigned vm_id_bits() const { return vm_mode ? kVmIdBits : 0; }
  unsigned vbid_bits(unsigned size_id) const {
    return 64 - kSizeIdBits - vm_id_bits() - size_class(size_id).offset_bits;
  }
  friend bool operator==(const AddressingMode&, const AddressingMode&) = default;
};

// System-wide VB name: SizeID ++ (VM ID) ++ VBID.
struct Vbuid {
  uint8_t size_id = 0;
  uint8_t vm_id = 0;
  uint64_t vbid = 0;

  SizeClass size_class() const { return vbi::size_class(size_id); }
  // Packed form, unique across classes and modes; used as a map key.
  uint64_t key() const {
    return (uint64_t{size_id} << 61) | (uint64_t{vm_id} << 56) | vbid;
  }
  static Vbuid from_key(uint64_t key) {
    return Vbuid{static_cast<uint8_t>(key >> 61), static_cast<uint8_t>((key >> 56) & 31),
                 key & ((uint64_t{1} << 56) - 1)};
  }
  std::string to_string() const;

  friend auto operator<=>(const Vbuid&, const Vbuid&) = default;
};

struct VbiAddress {
  uint64_t raw = 0;
  friend auto operator<=>(const VbiAddress&, const VbiAddress&) = default;
};

struct DecodedAddress {
  uint8_t size_id = 0;
  std::optional<uint8_t> vm_id;
  uint64_t vbid = 0;
  uint64_t offset = 0;

  friend bool operator==(const DecodedAddress&, const DecodedAddress&) = default;
};

// Packs the fields; throws EncodingError when any field overflows its width or a
// VM ID is supplied (or missing) for the wrong mode.
VbiAddress encode(const DecodedAddress& fields, AddressingMode mode);
DecodedAddress decode(VbiAddress addr, AddressingMode mode);

Vbuid vbuid_of(VbiAddress addr, AddressingMode mode);
VbiAddress make_address(const Vbuid& vb, uint64_t offset, AddressingMode mode);

}  // namespace vbi

template <>
struct std::hash<vbi::Vbuid> {
  std::size_t operator()(const vbi::Vbuid& v) const noexcept {
    return std::hash<uint64_t>{}(v.key());
  }
};
