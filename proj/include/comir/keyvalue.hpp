#pragma once

// Hierarchical key-value text files:
//
//   ; comment
//   [train]
//   lr = 1e-3
//
// Keys are addressed as "section.key". Every read marks the key as consumed so
// callers can reject typos after they have pulled everything they understand.

#include <boost/property_tree/ptree.hpp>

#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace comir {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : std::runtime_error(key.empty() ? what : "'" + key + "': " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

class KeyValueDoc {
 public:
  KeyValueDoc() = default;

  static KeyValueDoc parse_file(const std::filesystem::path& path);
  static KeyValueDoc parse_string(const std::string& text);

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback) const;
  std::vector<double> get_double_list(const std::string& key, const std::vector<double>& fallback) const;

  std::string require_string(const std::string& key) const;

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, long long value);
  void set(const std::string& key, int value) { set(key, static_cast<long long>(value)); }
  void set(const std::string& key, bool value);
  void set(const std::string& key, const std::vector<std::string>& values);
  void set(const std::string& key, const std::vector<double>& values);

  /// All "section.key" names present in the document.
  std::vector<std::string> keys() const;
  /// Keys that were never read.
  std::vector<std::string> unconsumed() const;
  /// Throws ConfigError naming the first unread key.
  void reject_unknown() const;

  std::string dump() const;
  void write(const std::filesystem::path& path) const;

 private:
  void mark(const std::string& key) const { consumed_.insert(key); }

  boost::property_tree::ptree tree_;
  mutable std::set<std::string> consumed_;
};

/// Shortest round-trip decimal text for a double.
std::string format_double(double v);

std::vector<std::string> split_list(const std::string& text, char sep = ',');

}  // namespace comir
