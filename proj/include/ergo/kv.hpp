#pragma once

#include <cstdint>
#include <map>
#include <string>

/// Tiny sorted key=value document.
///
/// Used for certificate summaries and the constants output file.  Keys are
/// rendered in lexicographic order and doubles with round-trip precision, so
/// rendering the same data twice is byte-identical.
namespace ergo {

/// Round-trip formatting for doubles (printf %.17g).
std::string format_double(double v);

class KvDocument {
 public:
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, const char* value);
  void set(const std::string& key, double value);
  void set(const std::string& key, std::int64_t value);
  void set(const std::string& key, int value);
  void set(const std::string& key, std::size_t value);
  void set(const std::string& key, bool value);

  bool contains(const std::string& key) const;
  /// Throws std::out_of_range for missing keys.
  const std::string& at(const std::string& key) const;
  std::size_t size() const { return entries_.size(); }
  /// All entries, keys ascending.
  const std::map<std::string, std::string>& entries() const { return entries_; }

  /// One "key=value\n" line per entry, keys ascending.
  std::string render() const;

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace ergo
