#include "vbi/stats.hpp"

#include <nlohmann/json.hpp>
#include <sstream>

#include "vbi/errors.hpp"

namespace vbi {

void Stats::add(const std::string& key, uint64_t delta) {
  auto it = values_.find(key);
  if (it == values_.end()) {
    values_.emplace(key, delta);
  } else if (auto* v = std::get_if<uint64_t>(&it->second)) {
    *v += delta;
  } else {
    throw Error("counter " + key + " is not an integer");
  }
}

uint64_t Stats::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return 0;
  if (const auto* v = std::get_if<uint64_t>(&it->second)) return *v;
  return static_cast<uint64_t>(std::get<double>(it->second));
}

double Stats::real(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return 0.0;
  if (const auto* v = std::get_if<double>(&it->second)) return *v;
  return static_cast<double>(std::get<uint64_t>(it->second));
}

std::string Stats::to_json(const std::map<std::string, std::string>& meta) const {
  nlohmann::json doc;
  doc["run"] = nlohmann::json::object();
  for (const auto& [k, v] : meta) doc["run"][k] = v;
  nlohmann::json stats = nlohmann::json::object();
  for (const auto& [k, v] : values_) {
    std::visit([&](auto x) { stats[k] = x; }, v);
  }
  doc["stats"] = std::move(stats);
  return doc.dump(2) + "\n";
}

Stats Stats::from_json(const std::string& text, std::map<std::string, std::string>* meta) {
  Stats s;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(0, e.what());
  }
  if (meta != nullptr && doc.contains("run")) {
    for (const auto& [k, v] : doc["run"].items()) (*meta)[k] = v.get<std::string>();
  }
  for (const auto& [k, v] : doc.at("stats").items()) {
    if (v.is_number_unsigned()) {
      s.set(k, v.get<uint64_t>());
    } else {
      s.set_real(k, v.get<double>());
    }
  }
  return s;
}

const std::vector<std::string>& Stats::csv_columns() {
  static const std::vector<std::string> cols = {
      "cycles",         "instructions",       "mem.accesses",        "cache.l3.misses",
      "tlb.l1_4k.miss", "tlb.l2.miss",        "walk.accesses",       "walk.nested_accesses",
      "device.reads",   "device.writes",      "frames.allocated",    "zero_line.reads",
      "migrations",     "avg_access_latency", "page_faults",         "translate.calls"};
  return cols;
}

std::string Stats::csv_header() {
  std::string out = "trace,scenario";
  for (const auto& c : csv_columns()) out += "," + c;
  return out;
}

std::string Stats::csv_row(const std::string& trace, const std::string& scenario) const {
  std::ostringstream out;
  out << trace << "," << scenario;
  for (const auto& c : csv_columns()) {
    out << ",";
    auto it = values_.find(c);
    if (it == values_.end()) {
      out << 0;
    } else if (const auto* d = std::get_if<double>(&it->second)) {
      out << nlohmann::json(*d).dump();
    } else {
      out << std::get<uint64_t>(it->second);
    }
  }
  return out.str();
}

}  // namespace vbi
