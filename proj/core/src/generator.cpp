#include "vbi/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "vbi/errors.hpp"

namespace vbi {

GeneratorSpec GeneratorSpec::parse(std::string_view text) {
  GeneratorSpec spec;
  const auto colon = text.find(':');
  spec.name = std::string(text.substr(0, colon));
  if (spec.name.empty()) throw ConfigError("generator spec needs a name");
  if (colon == std::string_view::npos) return spec;
  std::string_view rest = text.substr(colon + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = rest.substr(0, comma);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw ConfigError("generator parameter '" + std::string(item) + "' is not key=value");
    }
    spec.params[std::string(item.substr(0, eq))] = std::string(item.substr(eq + 1));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
  }
  return spec;
}

std::string GeneratorSpec::to_string() const {
  std::string out = name;
  char sep = ':';
  for (const auto& [k, v] : params) {
    out += sep + k + "=" + v;
    sep = ',';
  }
  return out;
}

namespace {

__extension__ typedef unsigned __int128 u128;

// Portable draws on top of mt19937_64 (whose output sequence is standardized).
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t below(uint64_t n) {
    return static_cast<uint64_t>((static_cast<u128>(gen_()) * n) >> 64);
  }
  double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return unit() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 gen_;
};

class Params {
 public:
  explicit Params(const GeneratorSpec& spec) : spec_(spec) {}

  uint64_t integer(const std::string& key, uint64_t def) {
    used_.insert(key);
    auto it = spec_.params.find(key);
    if (it == spec_.params.end()) return def;
    try {
      std::size_t pos = 0;
      const std::string& s = it->second;
      uint64_t v = 0;
      double d = std::stod(s, &pos);
      unsigned shift = 0;
      if (pos < s.size()) {
        const char suffix = s[pos];
        shift = suffix == 'K' ? 10 : suffix == 'M' ? 20 : suffix == 'G' ? 30 : 64;
        if (shift == 64 || pos + 1 != s.size()) throw ConfigError("");
      }
      if (d < 0 || d != std::floor(d)) throw ConfigError("");
      v = static_cast<uint64_t>(d) << shift;
      return v;
    } catch (const std::exception&) {
      throw ConfigError("generator parameter " + key + " must be a non-negative integer");
    }
  }

  double fraction(const std::string& key, double def) {
    used_.insert(key);
    auto it = spec_.params.find(key);
    if (it == spec_.params.end()) return def;
    double v = 0;
    try {
      std::size_t pos = 0;
      v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw ConfigError("");
    } catch (const std::exception&) {
      throw ConfigError("generator parameter " + key + " must be a number");
    }
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("generator parameter " + key + " must lie in [0, 1]");
    return v;
  }

  std::string text(const std::string& key, const std::string& def) {
    used_.insert(key);
    auto it = spec_.params.find(key);
    return it == spec_.params.end() ? def : it->second;
  }

  void finish() const {
    for (const auto& [k, v] : spec_.params) {
      if (!used_.count(k)) throw ConfigError("generator '" + spec_.name + "' has no parameter " + k);
    }
  }

 private:
  const GeneratorSpec& spec_;
  std::set<std::string> used_;
};

constexpr ClientId kClient = 1;

class Emitter {
 public:
  Emitter(Trace& t, uint64_t gap) : t_(t), gap_(gap) {}

  uint32_t request(uint64_t size, Props props) {
    TraceEvent ev;
    ev.kind = EventKind::reqvb;
    ev.client = kClient;
    ev.size = size;
    ev.props = props;
    t_.events.push_back(ev);
    return vbs_++;
  }

  void mem(uint32_t index, uint64_t offset, bool write) {
    TraceEvent ev;
    ev.kind = EventKind::mem;
    ev.client = kClient;
    ev.cvt_index = index;
    ev.offset = offset & ~(kLineSize - 1);
    ev.write = write;
    ev.icount = gap_;
    t_.events.push_back(ev);
  }

 private:
  Trace& t_;
  uint64_t gap_;
  uint32_t vbs_ = 0;
};

void check_positive(uint64_t v, const char* what) {
  if (v == 0) throw ConfigError(std::string("generator parameter ") + what + " must be positive");
}

}  // namespace

Trace generate_trace(const GeneratorSpec& spec, uint64_t seed) {
  Params p(spec);
  Rng rng(seed);
  Trace trace;
  const uint64_t gap = p.integer("gap", 4);
  const Props props = Props::parse(p.text("props", "-"));
  Emitter out(trace, gap);

  if (spec.name == "touch") {
    const uint64_t reads = p.integer("reads", 100000);
    const uint64_t writes = p.integer("writes", 1000);
    const uint64_t lines = p.integer("lines", 1);  // written lines per written region
    p.finish();
    check_positive(lines, "lines");
    if (lines > kPageSize / kLineSize) throw ConfigError("generator parameter lines exceeds a 4 KB region");
    const uint32_t rvb = reads ? out.request(reads * kPageSize, props) : 0;
    const uint32_t wvb = writes ? out.request(writes * kPageSize, props) : (reads ? 1 : 0);
    struct Op {
      bool write;
      uint64_t region;
    };
    std::vector<Op> ops;
    for (uint64_t i = 0; i < reads; ++i) ops.push_back({false, i});
    for (uint64_t i = 0; i < writes; ++i) ops.push_back({true, i});
    rng.shuffle(ops);
    for (const Op& op : ops) {
      if (op.write) {
        const uint64_t first = rng.below(kPageSize / kLineSize - lines + 1);
        for (uint64_t l = 0; l < lines; ++l) {
          out.mem(wvb, op.region * kPageSize + (first + l) * kLineSize, true);
        }
      } else {
        out.mem(rvb, op.region * kPageSize + rng.below(kPageSize / kLineSize) * kLineSize, false);
      }
    }
    return trace;
  }

  const uint64_t vbs = p.integer("vbs", 10);
  const uint64_t size = p.integer("size", uint64_t{4} << 20);
  const uint64_t accesses = p.integer("accesses", 100000);
  const double write = p.fraction("write", 0.0);
  check_positive(vbs, "vbs");
  check_positive(size, "size");
  if (vbs > 4096) throw ConfigError("generator parameter vbs exceeds the CVT capacity");
  const uint64_t lines_per_vb = std::max<uint64_t>(1, size / kLineSize);

  if (spec.name == "uniform") {
    p.finish();
    for (uint64_t i = 0; i < vbs; ++i) out.request(size, props);
    for (uint64_t a = 0; a < accesses; ++a) {
      const auto vb = static_cast<uint32_t>(rng.below(vbs));
      out.mem(vb, rng.below(lines_per_vb) * kLineSize, rng.chance(write));
    }
  } else if (spec.name == "skew") {
    const double hot = p.fraction("hot", 0.9);
    const double hot_vbs = p.fraction("hot_vbs", 0.1);
    p.finish();
    const uint64_t nhot = std::clamp<uint64_t>(static_cast<uint64_t>(std::llround(hot_vbs * vbs)), 1, vbs);
    for (uint64_t i = 0; i < vbs; ++i) out.request(size, props);
    std::vector<uint32_t> order(vbs);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    const std::vector<uint32_t> hot_set(order.begin(), order.begin() + nhot);
    const std::vector<uint32_t> cold_set(order.begin() + nhot, order.end());
    for (uint64_t a = 0; a < accesses; ++a) {
      const bool to_hot = cold_set.empty() || rng.chance(hot);
      const auto& set = to_hot ? hot_set : cold_set;
      const uint32_t vb = set[rng.below(set.size())];
      out.mem(vb, rng.below(lines_per_vb) * kLineSize, rng.chance(write));
    }
  } else if (spec.name == "stream") {
    const uint64_t stride = p.integer("stride", kLineSize);
    p.finish();
    check_positive(stride, "stride");
    for (uint64_t i = 0; i < vbs; ++i) out.request(size, props);
    std::vector<uint64_t> cursor(vbs, 0);
    for (uint64_t a = 0; a < accesses; ++a) {
      const auto vb = static_cast<uint32_t>(a % vbs);
      out.mem(vb, cursor[vb], rng.chance(write));
      cursor[vb] = (cursor[vb] + stride) % size;
    }
  } else if (spec.name == "chase") {
    const uint64_t nodes = p.integer("nodes", 65536);
    p.finish();
    check_positive(nodes, "nodes");
    for (uint64_t i = 0; i < vbs; ++i) out.request(size, props);
    // One random cycle through `nodes` lines spread over every VB.
    const uint64_t total_lines = vbs * lines_per_vb;
    const uint64_t n = std::min(nodes, total_lines);
    std::set<uint64_t> picked;
    while (picked.size() < n) picked.insert(rng.below(total_lines));
    std::vector<uint64_t> cycle(picked.begin(), picked.end());
    rng.shuffle(cycle);
    for (uint64_t a = 0; a < accesses; ++a) {
      const uint64_t line = cycle[a % n];
      out.mem(static_cast<uint32_t>(line / lines_per_vb), (line % lines_per_vb) * kLineSize,
              rng.chance(write));
    }
  } else {
    throw ConfigError("unknown generator '" + spec.name + "'");
  }
  return trace;
}

Trace generate_trace(std::string_view spec, uint64_t seed) {
  return generate_trace(GeneratorSpec::parse(spec), seed);
}

}  // namespace vbi
