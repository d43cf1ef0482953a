#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace spdo {

/// Flat key=value configuration. Lines may be grouped under `[section]`,
/// which prefixes following keys with `section.`; `#` starts a comment.
class RunConfig {
 public:
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);
  std::string serialize() const;

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;

  /// Keys present but never read.
  std::vector<std::string> unused() const;
  const std::map<std::string, std::string>& values() const { return values_; }

  bool operator==(const RunConfig& o) const { return values_ == o.values_; }

 private:
  const std::string* lookup(const std::string& key) const;

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> read_;
};

}  // namespace spdo
