#include "vphm/kv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vphm/error.hpp"

namespace vphm::kv {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos)
    return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string &key, const std::string &value) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw Error(Errc::InvalidConfig, "key '" + key + "' expects a number, got '" + value + "'");
  return out;
}

} // namespace

Table parse(const std::string &text) {
  Table table;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos)
      line.erase(hash);
    std::string body = trim(line);
    if (body.empty())
      continue;
    auto eq = body.find('=');
    if (eq == std::string::npos)
      throw Error(Errc::Format, "line " + std::to_string(lineno) + ": expected 'name = value'");
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty())
      throw Error(Errc::Format, "line " + std::to_string(lineno) + ": empty key");
    table[key] = value;
  }
  return table;
}

Table read_file(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw Error(Errc::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string format(const Table &table) {
  std::string out;
  for (const auto &[k, v] : table)
    out += k + " = " + v + "\n";
  return out;
}

void write_file(const std::filesystem::path &path, const Table &table) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(Errc::Io, "cannot write " + path.string());
  out << format(table);
}

void reject_unknown(const Table &table, const std::set<std::string> &allowed) {
  for (const auto &[k, v] : table)
    if (!allowed.count(k))
      throw Error(Errc::InvalidConfig, "unknown key '" + k + "'");
}

double get_double(const Table &table, const std::string &key, double fallback) {
  auto it = table.find(key);
  return it == table.end() ? fallback : to_double(key, it->second);
}

long get_int(const Table &table, const std::string &key, long fallback) {
  auto it = table.find(key);
  if (it == table.end())
    return fallback;
  long out = 0;
  const auto &v = it->second;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw Error(Errc::InvalidConfig, "key '" + key + "' expects an integer, got '" + v + "'");
  return out;
}

std::string get_string(const Table &table, const std::string &key,
                       const std::string &fallback) {
  auto it = table.find(key);
  return it == table.end() ? fallback : it->second;
}

std::vector<std::string> split_list(const std::string &value) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : value) {
    if (c == ',') {
      if (auto t = trim(cur); !t.empty())
        out.push_back(t);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (auto t = trim(cur); !t.empty())
    out.push_back(t);
  return out;
}

std::vector<double> get_doubles(const Table &table, const std::string &key,
                                const std::vector<double> &fallback) {
  auto it = table.find(key);
  if (it == table.end())
    return fallback;
  std::vector<double> out;
  for (const auto &item : split_list(it->second))
    out.push_back(to_double(key, item));
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

} // namespace vphm::kv
