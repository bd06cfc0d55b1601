#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace mmer {

/// Flat `key=value` configuration, one entry per line. Blank lines and
/// lines starting with '#' are ignored.
class KeyValues {
 public:
  static KeyValues parse(std::string_view text);
  static KeyValues load(const std::string& path);
  std::string format() const;
  void save(const std::string& path) const;

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  /// Entries whose key starts with `prefix`, with the prefix removed.
  KeyValues with_prefix(std::string_view prefix) const;
  /// Entries whose key does not start with `prefix`.
  KeyValues without_prefix(std::string_view prefix) const;

  // Typed readers leave `out` untouched when the key is absent and throw
  // ConfigError on malformed values.
  void read(const std::string& key, std::size_t& out) const;
  void read(const std::string& key, double& out) const;
  void read(const std::string& key, bool& out) const;
  void read(const std::string& key, std::string& out) const;
  void read(const std::string& key, std::vector<std::size_t>& out) const;

  /// Throws ConfigError naming the first key not in `known`.
  void require_known(const std::vector<std::string>& known) const;

 private:
  std::map<std::string, std::string> values_;
};

std::string format_double(double value);

}  // namespace mmer
