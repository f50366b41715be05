#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace nova {

/// Ordered key=value text record. Values are written verbatim on one line;
/// floating-point values use a round-trippable representation.
class Manifest {
 public:
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, const char* value) { set(key, std::string(value)); }
  void set(const std::string& key, double value);
  void set(const std::string& key, std::int64_t value);
  void set(const std::string& key, std::uint64_t value);
  void set(const std::string& key, int value) { set(key, static_cast<std::int64_t>(value)); }
  void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }

  /// Appends every entry of `other` with `prefix` prepended to its key.
  void merge(const Manifest& other, const std::string& prefix = "");

  std::optional<std::string> get(const std::string& key) const;
  std::string require(const std::string& key) const;
  bool contains(const std::string& key) const { return get(key).has_value(); }

  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }

  std::string to_string() const;
  static Manifest parse(const std::string& text);

  void write(const std::filesystem::path& path) const;
  static Manifest read(const std::filesystem::path& path);

  friend bool operator==(const Manifest&, const Manifest&) = default;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

std::string format_double(double v);

}  // namespace nova
