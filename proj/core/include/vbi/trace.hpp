#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "vbi/address.hpp"
#include "vbi/protection.hpp"
#include "vbi/registry.hpp"

namespace vbi {

inline constexpr std::string_view kTraceHeader = "#vbi-trace v1";

enum class EventKind : uint8_t { mem, instr, reqvb, attach, detach, enable, disable, clone, promote };

const char* event_name(EventKind kind);

struct TraceEvent {
  EventKind kind = EventKind::mem;
  std::size_t line = 0;  // source line, 0 for generated events
  // MEM
  bool write = false;
  uint32_t cvt_index = 0;
  uint64_t offset = 0;
  uint64_t icount = 0;  // non-memory instructions before this event (MEM, INSTR)
  // MEM, REQVB, ATTACH, DETACH, PROMOTE
  ClientId client = 0;
  // REQVB
  uint64_t size = 0;
  // REQVB, ENABLE
  Props props;
  // ATTACH
  Perms perms;
  // ATTACH, DETACH, ENABLE, DISABLE, CLONE (src), PROMOTE (src)
  Vbuid vb;
  // CLONE (dst), PROMOTE (larger)
  Vbuid vb2;
};

struct Trace {
  std::vector<TraceEvent> events;
};

struct TraceFormat {
  AddressingMode mode;
  uint8_t vm_id = 0;
};

// Parses a trace body; throws ParseError with the 1-based line number.
Trace parse_trace(std::string_view text, const TraceFormat& fmt = {});
// Reads a plain or gzip-compressed trace file.
Trace read_trace(const std::string& path, const TraceFormat& fmt = {});

std::string format_vbuid(const Vbuid& vb, const TraceFormat& fmt);
std::string format_event(const TraceEvent& ev, const TraceFormat& fmt = {});
void write_trace(std::ostream& out, const Trace& trace, const TraceFormat& fmt = {});
// Writes to `path`, gzip-compressed when it ends in ".gz".
void save_trace(const std::string& path, const Trace& trace, const TraceFormat& fmt = {});

}  // namespace vbi
