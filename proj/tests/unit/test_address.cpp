#include <doctest.h>

#include <random>

#include "vbi/address.hpp"
#include "vbi/errors.hpp"

using namespace vbi;

TEST_CASE("eight size classes from 4 KB to 128 TB, each 32x the previous") {
  const uint64_t KB = 1024;
  const uint64_t expected[8] = {4 * KB,
                                128 * KB,
                                4 * KB * KB,
                                128 * KB * KB,
                                4 * KB * KB * KB,
                                128 * KB * KB * KB,
                                4 * KB * KB * KB * KB,
                                128 * KB * KB * KB * KB};
  for (unsigned i = 0; i < kNumSizeClasses; ++i) {
    CHECK(kSizeClasses[i].size_bytes == expected[i]);
    CHECK(kSizeClasses[i].size_id == i);
    CHECK((uint64_t{1} << kSizeClasses[i].offset_bits) == expected[i]);
    CHECK(kSizeClasses[i].offset_bits + AddressingMode{}.vbid_bits(i) + 3 == 64);
  }
  CHECK(size_class(4).size_bytes == (uint64_t{4} << 30));
}

TEST_CASE("class_for_request picks the smallest class that fits") {
  CHECK(class_for_request(4096).size_id == 0);
  CHECK(class_for_request(5000).size_id == 1);
  CHECK(class_for_request(uint64_t{1} << 38).size_bytes == (uint64_t{4} << 40));
  CHECK(class_for_request(100 * 1024).size_id == 1);
  CHECK(class_for_request(1).size_id == 0);
  CHECK_THROWS_AS(class_for_request(0), CapacityError);
  CHECK_THROWS_AS(class_for_request((uint64_t{128} << 40) + 1), CapacityError);
}

TEST_CASE("field widths") {
  const AddressingMode plain;
  CHECK(plain.vbid_bits(0) == 49);
  CHECK(plain.vbid_bits(7) == 14);
  const AddressingMode vm{true};
  CHECK(vm.vbid_bits(4) == 24);
  CHECK(size_class(4).offset_bits == 32);
}

TEST_CASE("encode known values") {
  CHECK(encode({0, std::nullopt, 0, 0}, {}).raw == 0);
  // 4 KB class: vbid sits just above the 12 offset bits.
  CHECK(encode({0, std::nullopt, 5, 100}, {}).raw == ((uint64_t{5} << 12) | 100));
  // size_id 7 occupies the top three bits.
  CHECK(encode({7, std::nullopt, 1, 0}, {}).raw == ((uint64_t{7} << 61) | (uint64_t{1} << 47)));
  // VM mode, 4 GB class: 3 | 5 | 24 | 32.
  const uint64_t raw = (uint64_t{4} << 61) | (uint64_t{3} << 56) | (uint64_t{0xabcdef} << 32) | 0x12345678;
  CHECK(encode({4, uint8_t{3}, 0xabcdef, 0x12345678}, {true}).raw == raw);
}

TEST_CASE("decode known values") {
  const uint64_t raw = (uint64_t{7} << 61) | (uint64_t{0x3fff} << 47) | 12345;
  const DecodedAddress d = decode({raw}, {});
  CHECK(d.size_id == 7);
  CHECK(d.vbid == 0x3fff);
  CHECK(d.offset == 12345);
  CHECK_FALSE(d.vm_id.has_value());

  // Bits 3..7 from the top hold the VM ID.
  const uint64_t vm_raw = (uint64_t{2} << 61) | (uint64_t{0b00011} << 56) | (uint64_t{9} << 22) | 77;
  const DecodedAddress v = decode({vm_raw}, {true});
  REQUIRE(v.vm_id.has_value());
  CHECK(*v.vm_id == 3);
  CHECK(v.vbid == 9);
  CHECK(v.offset == 77);
}

TEST_CASE("encode rejects overflowing fields and mode mismatches") {
  CHECK_THROWS_AS(encode({0, std::nullopt, 0, 4096}, {}), EncodingError);
  CHECK_THROWS_AS(encode({0, std::nullopt, uint64_t{1} << 49, 0}, {}), EncodingError);
  CHECK_THROWS_AS(encode({8, std::nullopt, 0, 0}, {}), EncodingError);
  CHECK_THROWS_AS(encode({4, std::nullopt, 0, 0}, {true}), EncodingError);
  CHECK_THROWS_AS(encode({4, uint8_t{1}, 0, 0}, {}), EncodingError);
  CHECK_THROWS_AS(encode({4, uint8_t{32}, 0, 0}, {true}), EncodingError);
  CHECK_THROWS_AS(encode({4, uint8_t{1}, uint64_t{1} << 24, 0}, {true}), EncodingError);
}

TEST_CASE("random round trip in both modes") {
  std::mt19937_64 rng(42);
  for (bool vm : {false, true}) {
    const AddressingMode mode{vm};
    for (int i = 0; i < 100000; ++i) {
      DecodedAddress f;
      f.size_id = static_cast<uint8_t>(rng() % 8);
      const unsigned vb_bits = mode.vbid_bits(f.size_id);
      f.vbid = rng() & ((uint64_t{1} << vb_bits) - 1);
      f.offset = rng() & (size_class(f.size_id).size_bytes - 1);
      if (vm) f.vm_id = static_cast<uint8_t>(rng() % 32);
      const VbiAddress a = encode(f, mode);
      REQUIRE(decode(a, mode) == f);
      REQUIRE(encode(decode(a, mode), mode) == a);
    }
  }
}

TEST_CASE("VBUID and key") {
  const Vbuid vb{3, 0, 17};
  const VbiAddress a = make_address(vb, 0x1234, {});
  CHECK(vbuid_of(a, {}) == vb);
  CHECK(Vbuid::from_key(vb.key()) == vb);
  const Vbuid vm_vb{5, 31, 1000};
  CHECK(Vbuid::from_key(vm_vb.key()) == vm_vb);
  CHECK(Vbuid{0, 0, 1}.key() != Vbuid{1, 0, 1}.key());
}
