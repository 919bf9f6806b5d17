#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace vbi {

// Named counters plus a few derived real-valued metrics. Keys are dotted
// names; output is sorted by key so reports are byte-stable.
class Stats {
 public:
  using Value = std::variant<uint64_t, double>;

  void add(const std::string& key, uint64_t delta = 1);
  void set(const std::string& key, uint64_t value) { values_[key] = value; }
  void set_real(const std::string& key, double value) { values_[key] = value; }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  uint64_t get(const std::string& key) const;  // 0 when absent
  double real(const std::string& key) const;   // counters convert
  const std::map<std::string, Value>& values() const { return values_; }

  // {"run": {...meta}, "stats": {...}} with sorted keys.
  std::string to_json(const std::map<std::string, std::string>& meta) const;
  static Stats from_json(const std::string& text, std::map<std::string, std::string>* meta = nullptr);

  static const std::vector<std::string>& csv_columns();
  static std::string csv_header();
  // One row: trace, scenario, then csv_columns() values.
  std::string csv_row(const std::string& trace, const std::string& scenario) const;

 private:
  std::map<std::string, Value> values_;
};

}  // namespace vbi
