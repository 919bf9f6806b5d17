#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "vbi/trace.hpp"

namespace vbi {

// Parsed "name:key=value,..." generator description.
struct GeneratorSpec {
  std::string name;
  std::map<std::string, std::string> params;

  static GeneratorSpec parse(std::string_view text);
  std::string to_string() const;
};

// Generators: uniform, skew, stream, chase, touch. Every generator emits a
// REQVB preamble (client 1, one VB per CVT index in order) followed by MEM
// records. Output depends only on (spec, seed).
Trace generate_trace(const GeneratorSpec& spec, uint64_t seed);
Trace generate_trace(std::string_view spec, uint64_t seed);

}  // namespace vbi
