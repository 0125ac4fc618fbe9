#include "comir/keyvalue.hpp"

#include <boost/property_tree/ini_parser.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace comir {
namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// The INI reader treats ';' as the only comment marker; accept '#' as well.
std::string strip_hash_comments(const std::string& text) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (!t.empty() && t.front() == '#') {
      out << '\n';
      continue;
    }
    out << line << '\n';
  }
  return out.str();
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

KeyValueDoc KeyValueDoc::parse_string(const std::string& text) {
  KeyValueDoc doc;
  std::istringstream in(strip_hash_comments(text));
  try {
    pt::read_ini(in, doc.tree_);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("", std::string("parse error: ") + e.message() + " at line " + std::to_string(e.line()));
  }
  for (auto& [section, node] : doc.tree_) {
    if (node.empty() && !node.data().empty()) {
      throw ConfigError(section, "top-level keys are not allowed; place it in a [section]");
    }
    for (auto& [key, leaf] : node) leaf.data() = trim(leaf.data());
  }
  return doc;
}

KeyValueDoc KeyValueDoc::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read configuration file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

bool KeyValueDoc::has(const std::string& key) const { return tree_.get_optional<std::string>(key).has_value(); }

std::string KeyValueDoc::get_string(const std::string& key, const std::string& fallback) const {
  mark(key);
  return tree_.get<std::string>(key, fallback);
}

double KeyValueDoc::get_double(const std::string& key, double fallback) const {
  mark(key);
  const auto v = tree_.get_optional<std::string>(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a number, got '" + *v + "'");
  }
}

long long KeyValueDoc::get_int(const std::string& key, long long fallback) const {
  mark(key);
  const auto v = tree_.get_optional<std::string>(key);
  if (!v) return fallback;
  long long out = 0;
  const auto res = std::from_chars(v->data(), v->data() + v->size(), out);
  if (res.ec != std::errc() || res.ptr != v->data() + v->size()) {
    throw ConfigError(key, "expected an integer, got '" + *v + "'");
  }
  return out;
}

bool KeyValueDoc::get_bool(const std::string& key, bool fallback) const {
  mark(key);
  const auto v = tree_.get_optional<std::string>(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "yes" || *v == "1") return true;
  if (*v == "false" || *v == "no" || *v == "0") return false;
  throw ConfigError(key, "expected true/false, got '" + *v + "'");
}

std::vector<std::string> KeyValueDoc::get_list(const std::string& key,
                                                const std::vector<std::string>& fallback) const {
  mark(key);
  const auto v = tree_.get_optional<std::string>(key);
  if (!v) return fallback;
  return split_list(*v);
}

std::vector<double> KeyValueDoc::get_double_list(const std::string& key, const std::vector<double>& fallback) const {
  mark(key);
  const auto v = tree_.get_optional<std::string>(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const std::string& item : split_list(*v)) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError(key, "expected a list of numbers, got '" + *v + "'");
    }
  }
  return out;
}

std::string KeyValueDoc::require_string(const std::string& key) const {
  mark(key);
  const auto v = tree_.get_optional<std::string>(key);
  if (!v || v->empty()) throw ConfigError(key, "required key is missing");
  return *v;
}

void KeyValueDoc::set(const std::string& key, const std::string& value) { tree_.put(key, value); }
void KeyValueDoc::set(const std::string& key, double value) { tree_.put(key, format_double(value)); }
void KeyValueDoc::set(const std::string& key, long long value) { tree_.put(key, std::to_string(value)); }
void KeyValueDoc::set(const std::string& key, bool value) { tree_.put(key, value ? "true" : "false"); }

void KeyValueDoc::set(const std::string& key, const std::vector<std::string>& values) {
  std::string joined;
  for (std::size_t i = 0; i < values.size(); ++i) joined += (i ? ", " : "") + values[i];
  tree_.put(key, joined);
}

void KeyValueDoc::set(const std::string& key, const std::vector<double>& values) {
  std::vector<std::string> text;
  for (double v : values) text.push_back(format_double(v));
  set(key, text);
}

std::vector<std::string> KeyValueDoc::keys() const {
  std::vector<std::string> out;
  for (const auto& [section, node] : tree_) {
    for (const auto& [key, leaf] : node) out.push_back(section + "." + key);
  }
  return out;
}

std::vector<std::string> KeyValueDoc::unconsumed() const {
  std::vector<std::string> out;
  for (const std::string& k : keys()) {
    if (!consumed_.contains(k)) out.push_back(k);
  }
  return out;
}

void KeyValueDoc::reject_unknown() const {
  const auto extra = unconsumed();
  if (!extra.empty()) throw ConfigError(extra.front(), "unknown key");
}

std::string KeyValueDoc::dump() const {
  std::ostringstream out;
  pt::write_ini(out, tree_);
  return out.str();
}

void KeyValueDoc::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("", "cannot write '" + path.string() + "'");
  out << dump();
}

}  // namespace comir
