#include "nova/manifest.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "nova/error.hpp"

namespace nova {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void Manifest::set(const std::string& key, const std::string& value) {
  nova::require(key.find_first_of("=\n") == std::string::npos, "manifest: invalid key '" + key + "'");
  nova::require(value.find('\n') == std::string::npos, "manifest: value for '" + key + "' contains a newline");
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

void Manifest::set(const std::string& key, double value) { set(key, format_double(value)); }
void Manifest::set(const std::string& key, std::int64_t value) { set(key, std::to_string(value)); }
void Manifest::set(const std::string& key, std::uint64_t value) { set(key, std::to_string(value)); }

void Manifest::merge(const Manifest& other, const std::string& prefix) {
  for (const auto& [k, v] : other.entries_) set(prefix + k, v);
}

std::optional<std::string> Manifest::get(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  return std::nullopt;
}

std::string Manifest::require(const std::string& key) const {
  auto v = get(key);
  if (!v) fail(ErrorKind::data, "manifest: missing key '" + key + "'");
  return *v;
}

std::string Manifest::to_string() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

Manifest Manifest::parse(const std::string& text) {
  Manifest m;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::data, "manifest line " + std::to_string(lineno) + ": expected key=value");
    m.entries_.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return m;
}

void Manifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::data, "cannot write manifest: " + path.string());
  out << to_string();
}

Manifest Manifest::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::data, "cannot read manifest: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace nova
