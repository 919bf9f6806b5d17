#include "vbi/address.hpp"

#include "vbi/errors.hpp"

namespace vbi {

const char* fault_name(FaultCode code) {
  switch (code) {
    case FaultCode::index_range: return "index_range";
    case FaultCode::invalid_entry: return "invalid_entry";
    case FaultCode::perm: return "perm";
    case FaultCode::bounds: return "bounds";
  }
  return "unknown";
}

SizeClass class_for_request(uint64_t requested_size) {
  if (requested_size == 0) throw CapacityError("request of 0 bytes");
  for (const auto& cls : kSizeClasses) {
    if (cls.size_bytes >= requested_size) return cls;
  }
  throw CapacityError("request of " + std::to_string(requested_size) +
                      " bytes exceeds the largest size class");
}

std::string Vbuid::to_string() const {
  std::string s = std::to_string(size_id) + ":";
  if (vm_id != 0) s += std::to_string(vm_id) + ":";
  return s + std::to_string(vbid);
}

VbiAddress encode(const DecodedAddress& f, AddressingMode mode) {
  if (f.size_id >= kNumSizeClasses) throw EncodingError("size_id out of range");
  if (f.vm_id.has_value() != mode.vm_mode) {
    throw EncodingError(mode.vm_mode ? "VM mode requires a VM ID"
                                     : "VM ID given outside VM mode");
  }
  const SizeClass cls = size_class(f.size_id);
  const unsigned vbid_bits = mode.vbid_bits(f.size_id);
  if (f.offset >= cls.size_bytes) throw EncodingError("offset exceeds class size");
  if (f.vbid >> vbid_bits) throw EncodingError("vbid exceeds field width");

  uint64_t raw = uint64_t{f.size_id} << (64 - kSizeIdBits);
  if (mode.vm_mode) {
    if (*f.vm_id >> kVmIdBits) throw EncodingError("vm_id exceeds 5 bits");
    raw |= uint64_t{*f.vm_id} << (64 - kSizeIdBits - kVmIdBits);
  }
  raw |= f.vbid << cls.offset_bits;
  raw |= f.offset;
  return VbiAddress{raw};
}

DecodedAddress decode(VbiAddress addr, AddressingMode mode) {
  DecodedAddress f;
  f.size_id = static_cast<uint8_t>(addr.raw >> (64 - kSizeIdBits));
  const SizeClass cls = size_class(f.size_id);
  if (mode.vm_mode) {
    f.vm_id = static_cast<uint8_t>((addr.raw >> (64 - kSizeIdBits - kVmIdBits)) &
                                   ((1u << kVmIdBits) - 1));
  }
  const unsigned vbid_bits = mode.vbid_bits(f.size_id);
  f.vbid = (addr.raw >> cls.offset_bits) & ((uint64_t{1} << vbid_bits) - 1);
  f.offset = addr.raw & (cls.size_bytes - 1);
  return f;
}

Vbuid vbuid_of(VbiAddress addr, AddressingMode mode) {
  const DecodedAddress f = decode(addr, mode);
  return Vbuid{f.size_id, f.vm_id.value_or(0), f.vbid};
}

VbiAddress make_address(const Vbuid& vb, uint64_t offset, AddressingMode mode) {
  DecodedAddress f{vb.size_id, std::nullopt, vb.vbid, offset};
  if (mode.vm_mode) f.vm_id = vb.vm_id;
  return encode(f, mode);
}

}  // namespace vbi
