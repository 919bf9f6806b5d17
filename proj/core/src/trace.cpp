#include "vbi/trace.hpp"

#include <zlib.h>

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

#include "vbi/errors.hpp"

namespace vbi {

const char* event_name(EventKind kind) {
  switch (kind) {
    case EventKind::mem: return "MEM";
    case EventKind::instr: return "INSTR";
    case EventKind::reqvb: return "REQVB";
    case EventKind::attach: return "ATTACH";
    case EventKind::detach: return "DETACH";
    case EventKind::enable: return "ENABLE";
    case EventKind::disable: return "DISABLE";
    case EventKind::clone: return "CLONE";
    case EventKind::promote: return "PROMOTE";
  }
  return "?";
}

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

class LineParser {
 public:
  LineParser(std::size_t line, const TraceFormat& fmt) : line_(line), fmt_(fmt) {}

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(line_, what); }

  uint64_t number(std::string_view s, const char* what) const {
    uint64_t v = 0;
    int base = 10;
    if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
      s.remove_prefix(2);
      base = 16;
    }
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty()) fail(std::string("bad ") + what);
    return v;
  }

  uint64_t size(std::string_view s) const {
    unsigned shift = 0;
    if (!s.empty()) {
      switch (s.back()) {
        case 'K': case 'k': shift = 10; break;
        case 'M': case 'm': shift = 20; break;
        case 'G': case 'g': shift = 30; break;
        case 'T': case 't': shift = 40; break;
        default: break;
      }
      if (shift != 0) s.remove_suffix(1);
    }
    const uint64_t v = number(s, "size");
    if (shift != 0 && (v >> (64 - shift)) != 0) fail("size overflows 64 bits");
    return v << shift;
  }

  ClientId client(std::string_view s) const {
    const uint64_t v = number(s, "client");
    if (v > 0xffff) fail("client id exceeds 16 bits");
    return static_cast<ClientId>(v);
  }

  Vbuid vbuid(std::string_view s) const {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
      if (i == s.size() || s[i] == ':') {
        parts.push_back(s.substr(start, i - start));
        start = i + 1;
      }
    }
    if (parts.size() != 2 && parts.size() != 3) fail("VBUID must be S:V or S:M:V");
    Vbuid vb;
    const uint64_t sid = number(parts[0], "size id");
    if (sid >= kNumSizeClasses) fail("size id out of range");
    vb.size_id = static_cast<uint8_t>(sid);
    if (parts.size() == 3) {
      if (!fmt_.mode.vm_mode) fail("VM id given outside VM mode");
      const uint64_t vm = number(parts[1], "VM id");
      if (vm != fmt_.vm_id) fail("VM id " + std::to_string(vm) + " does not match the run");
    }
    vb.vm_id = fmt_.mode.vm_mode ? fmt_.vm_id : 0;
    vb.vbid = number(parts.back(), "VBID");
    const unsigned bits = fmt_.mode.vbid_bits(vb.size_id);
    if (bits < 64 && (vb.vbid >> bits) != 0) fail("VBID exceeds its field width");
    return vb;
  }

  Props props(std::string_view s) const {
    try {
      return Props::parse(s);
    } catch (const Error& e) {
      fail(e.what());
    }
  }

  Perms perms(std::string_view s) const {
    try {
      return Perms::parse(s);
    } catch (const Error& e) {
      fail(e.what());
    }
  }

 private:
  std::size_t line_;
  const TraceFormat& fmt_;
};

void expect_fields(const LineParser& p, const std::vector<std::string_view>& f, std::size_t n) {
  if (f.size() != n) {
    p.fail(std::string(f[0]) + " expects " + std::to_string(n - 1) + " fields, got " +
           std::to_string(f.size() - 1));
  }
}

TraceEvent parse_event(const std::vector<std::string_view>& f, std::size_t line, const TraceFormat& fmt) {
  LineParser p(line, fmt);
  TraceEvent ev;
  ev.line = line;
  const std::string_view op = f[0];
  if (op == "MEM") {
    expect_fields(p, f, 6);
    ev.kind = EventKind::mem;
    if (f[1] == "r") {
      ev.write = false;
    } else if (f[1] == "w") {
      ev.write = true;
    } else {
      p.fail("MEM kind must be r or w");
    }
    ev.client = p.client(f[2]);
    const uint64_t idx = p.number(f[3], "CVT index");
    if (idx > 0xffffffffULL) p.fail("CVT index too large");
    ev.cvt_index = static_cast<uint32_t>(idx);
    ev.offset = p.number(f[4], "offset");
    ev.icount = p.number(f[5], "instruction count");
  } else if (op == "INSTR") {
    expect_fields(p, f, 2);
    ev.kind = EventKind::instr;
    ev.icount = p.number(f[1], "instruction count");
  } else if (op == "REQVB") {
    expect_fields(p, f, 4);
    ev.kind = EventKind::reqvb;
    ev.client = p.client(f[1]);
    ev.size = p.size(f[2]);
    if (ev.size == 0) p.fail("REQVB size must be at least 1 byte");
    ev.props = p.props(f[3]);
  } else if (op == "ATTACH") {
    expect_fields(p, f, 4);
    ev.kind = EventKind::attach;
    ev.client = p.client(f[1]);
    ev.vb = p.vbuid(f[2]);
    ev.perms = p.perms(f[3]);
  } else if (op == "DETACH") {
    expect_fields(p, f, 3);
    ev.kind = EventKind::detach;
    ev.client = p.client(f[1]);
    ev.vb = p.vbuid(f[2]);
  } else if (op == "ENABLE") {
    expect_fields(p, f, 3);
    ev.kind = EventKind::enable;
    ev.vb = p.vbuid(f[1]);
    ev.props = p.props(f[2]);
  } else if (op == "DISABLE") {
    expect_fields(p, f, 2);
    ev.kind = EventKind::disable;
    ev.vb = p.vbuid(f[1]);
  } else if (op == "CLONE") {
    expect_fields(p, f, 3);
    ev.kind = EventKind::clone;
    ev.vb = p.vbuid(f[1]);
    ev.vb2 = p.vbuid(f[2]);
  } else if (op == "PROMOTE") {
    expect_fields(p, f, 4);
    ev.kind = EventKind::promote;
    ev.client = p.client(f[1]);
    ev.vb = p.vbuid(f[2]);
    ev.vb2 = p.vbuid(f[3]);
  } else {
    p.fail("unknown record '" + std::string(op) + "'");
  }
  return ev;
}

}  // namespace

Trace parse_trace(std::string_view text, const TraceFormat& fmt) {
  Trace trace;
  std::size_t line_no = 0;
  bool header = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!header) {
      if (line != kTraceHeader) throw ParseError(line_no, "missing '#vbi-trace v1' header");
      header = true;
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split(line);
    if (fields.empty()) continue;
    trace.events.push_back(parse_event(fields, line_no, fmt));
  }
  if (!header) throw ParseError(1, "missing '#vbi-trace v1' header");
  return trace;
}

Trace read_trace(const std::string& path, const TraceFormat& fmt) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (f == nullptr) throw ConfigError("cannot open trace " + path);
  std::string text;
  char buf[1 << 16];
  int n = 0;
  while ((n = gzread(f, buf, sizeof buf)) > 0) text.append(buf, static_cast<std::size_t>(n));
  int err = 0;
  const char* msg = gzerror(f, &err);
  const std::string why = (n < 0 && msg != nullptr) ? msg : "";
  gzclose(f);
  if (n < 0) throw ParseError(0, "cannot read trace " + path + ": " + why);
  return parse_trace(text, fmt);
}

std::string format_vbuid(const Vbuid& vb, const TraceFormat& fmt) {
  if (fmt.mode.vm_mode) {
    return std::to_string(vb.size_id) + ":" + std::to_string(vb.vm_id) + ":" + std::to_string(vb.vbid);
  }
  return std::to_string(vb.size_id) + ":" + std::to_string(vb.vbid);
}

std::string format_event(const TraceEvent& ev, const TraceFormat& fmt) {
  std::ostringstream out;
  out << event_name(ev.kind);
  switch (ev.kind) {
    case EventKind::mem:
      out << ' ' << (ev.write ? 'w' : 'r') << ' ' << ev.client << ' ' << ev.cvt_index << ' ' << ev.offset << ' '
          << ev.icount;
      break;
    case EventKind::instr:
      out << ' ' << ev.icount;
      break;
    case EventKind::reqvb:
      out << ' ' << ev.client << ' ' << ev.size << ' ' << ev.props.to_string();
      break;
    case EventKind::attach:
      out << ' ' << ev.client << ' ' << format_vbuid(ev.vb, fmt) << ' ' << ev.perms.to_string();
      break;
    case EventKind::detach:
      out << ' ' << ev.client << ' ' << format_vbuid(ev.vb, fmt);
      break;
    case EventKind::enable:
      out << ' ' << format_vbuid(ev.vb, fmt) << ' ' << ev.props.to_string();
      break;
    case EventKind::disable:
      out << ' ' << format_vbuid(ev.vb, fmt);
      break;
    case EventKind::clone:
      out << ' ' << format_vbuid(ev.vb, fmt) << ' ' << format_vbuid(ev.vb2, fmt);
      break;
    case EventKind::promote:
      out << ' ' << ev.client << ' ' << format_vbuid(ev.vb, fmt) << ' ' << format_vbuid(ev.vb2, fmt);
      break;
  }
  return out.str();
}

void write_trace(std::ostream& out, const Trace& trace, const TraceFormat& fmt) {
  out << kTraceHeader << '\n';
  for (const TraceEvent& ev : trace.events) out << format_event(ev, fmt) << '\n';
}

void save_trace(const std::string& path, const Trace& trace, const TraceFormat& fmt) {
  std::ostringstream body;
  write_trace(body, trace, fmt);
  const std::string text = body.str();
  if (path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0) {
    gzFile f = gzopen(path.c_str(), "wb9");
    if (f == nullptr) throw ConfigError("cannot write trace " + path);
    const bool ok = gzwrite(f, text.data(), static_cast<unsigned>(text.size())) == static_cast<int>(text.size());
    if (gzclose(f) != Z_OK || !ok) throw ConfigError("cannot write trace " + path);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw ConfigError("cannot write trace " + path);
}

}  // namespace vbi
