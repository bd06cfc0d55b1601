#include "mmer/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "mmer/errors.hpp"

namespace mmer {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename U>
U parse_unsigned(const std::string& key, const std::string& text) {
  U value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("config: '" + key + "' expects a non-negative integer, got '" + text + "'");
  }
  return value;
}

}  // namespace

KeyValues KeyValues::parse(std::string_view text) {
  KeyValues kv;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string content = trim(line);
    if (content.empty() || content.front() == '#') continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) throw ParseError("config: expected key=value", line_no);
    std::string key = trim(std::string_view(content).substr(0, eq));
    if (key.empty()) throw ParseError("config: empty key", line_no);
    kv.values_[key] = trim(std::string_view(content).substr(eq + 1));
  }
  return kv;
}

KeyValues KeyValues::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string KeyValues::format() const {
  std::ostringstream os;
  for (const auto& [k, v] : values_) os << k << '=' << v << '\n';
  return os.str();
}

void KeyValues::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write config " + path);
  out << format();
}

KeyValues KeyValues::with_prefix(std::string_view prefix) const {
  KeyValues out;
  for (const auto& [k, v] : values_) {
    if (k.starts_with(prefix)) out.values_[k.substr(prefix.size())] = v;
  }
  return out;
}

KeyValues KeyValues::without_prefix(std::string_view prefix) const {
  KeyValues out;
  for (const auto& [k, v] : values_) {
    if (!k.starts_with(prefix)) out.values_[k] = v;
  }
  return out;
}

void KeyValues::read(const std::string& key, std::size_t& out) const {
  if (const auto it = values_.find(key); it != values_.end()) out = parse_unsigned<std::size_t>(key, it->second);
}

void KeyValues::read(const std::string& key, double& out) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return;
  std::istringstream in(it->second);
  in.imbue(std::locale::classic());
  double value = 0.0;
  if (!(in >> value) || !(in >> std::ws).eof()) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + it->second + "'");
  }
  out = value;
}

void KeyValues::read(const std::string& key, bool& out) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return;
  if (it->second == "true" || it->second == "1") {
    out = true;
  } else if (it->second == "false" || it->second == "0") {
    out = false;
  } else {
    throw ConfigError("config: '" + key + "' expects true/false, got '" + it->second + "'");
  }
}

void KeyValues::read(const std::string& key, std::string& out) const {
  if (const auto it = values_.find(key); it != values_.end()) out = it->second;
}

void KeyValues::read(const std::string& key, std::vector<std::size_t>& out) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return;
  std::vector<std::size_t> values;
  std::istringstream in(it->second);
  std::string item;
  while (std::getline(in, item, ',')) values.push_back(parse_unsigned<std::size_t>(key, trim(item)));
  out = std::move(values);
}

void KeyValues::require_known(const std::vector<std::string>& known) const {
  for (const auto& [k, v] : values_) {
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      throw ConfigError("config: unknown key '" + k + "'");
    }
  }
}

std::string format_double(double value) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << value;
  return os.str();
}

}  // namespace mmer
