#include "ergo/kv.hpp"

#include <cstdio>

namespace ergo {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void KvDocument::set(const std::string& key, const std::string& value) {
  entries_[key] = value;
}

void KvDocument::set(const std::string& key, const char* value) {
  entries_[key] = value;
}

void KvDocument::set(const std::string& key, double value) {
  entries_[key] = format_double(value);
}

void KvDocument::set(const std::string& key, std::int64_t value) {
  entries_[key] = std::to_string(value);
}

void KvDocument::set(const std::string& key, int value) {
  entries_[key] = std::to_string(value);
}

void KvDocument::set(const std::string& key, std::size_t value) {
  entries_[key] = std::to_string(value);
}

void KvDocument::set(const std::string& key, bool value) {
  entries_[key] = value ? "true" : "false";
}

bool KvDocument::contains(const std::string& key) const {
  return entries_.count(key) != 0;
}

const std::string& KvDocument::at(const std::string& key) const {
  return entries_.at(key);
}

std::string KvDocument::render() const {
  std::string out;
  for (const auto& [k, v] : entries_) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

}  // namespace ergo
