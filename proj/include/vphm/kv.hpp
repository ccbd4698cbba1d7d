#pragma once

// Flat `name = value` text files with `#` comments. Used for physics presets,
// scenario specs, run configs and score reports.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace vphm::kv {

/// Ordered so that written files are byte-stable.
using Table = std::map<std::string, std::string>;

Table parse(const std::string &text);
Table read_file(const std::filesystem::path &path);
std::string format(const Table &table);
void write_file(const std::filesystem::path &path, const Table &table);

/// Throws InvalidConfig naming the first key not in `allowed`.
void reject_unknown(const Table &table, const std::set<std::string> &allowed);

double get_double(const Table &table, const std::string &key, double fallback);
long get_int(const Table &table, const std::string &key, long fallback);
std::string get_string(const Table &table, const std::string &key,
                       const std::string &fallback);
std::vector<double> get_doubles(const Table &table, const std::string &key,
                                const std::vector<double> &fallback);
std::vector<std::string> split_list(const std::string &value);

/// Round-trip exact textual form of a double.
std::string format_double(double v);

} // namespace vphm::kv
