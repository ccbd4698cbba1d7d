#include "vphm/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "vphm/error.hpp"
#include "vphm/kv.hpp"

namespace vphm::ingest {

namespace {

std::vector<std::string> split_row(const std::string &line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cells.push_back(cur);
  for (auto &cell : cells) {
    auto b = cell.find_first_not_of(" \t");
    auto e = cell.find_last_not_of(" \t");
    cell = b == std::string::npos ? std::string() : cell.substr(b, e - b + 1);
  }
  return cells;
}

std::optional<double> parse_cell(const std::string &cell) {
  if (cell.empty())
    return std::nullopt;
  double v = 0.0;
  const char *first = cell.data();
  if (*first == '+')
    ++first;
  auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v))
    return std::nullopt;
  return v;
}

std::size_t column_index(const std::vector<std::string> &header, const std::string &name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end())
    throw Error(Errc::MissingColumn, "column '" + name + "' not in header");
  return static_cast<std::size_t>(it - header.begin());
}

double median_step(const std::vector<Sample> &s) {
  if (s.size() < 2)
    return 1.0;
  std::vector<double> d;
  d.reserve(s.size() - 1);
  for (std::size_t k = 1; k < s.size(); ++k)
    d.push_back(s[k].time - s[k - 1].time);
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid;
}

} // namespace

std::vector<double> FlightLog::currents() const {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto &s : samples)
    out.push_back(s.current);
  return out;
}

std::vector<double> FlightLog::voltages() const {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto &s : samples)
    out.push_back(s.voltage);
  return out;
}

std::vector<double> FlightLog::times() const {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto &s : samples)
    out.push_back(s.time);
  return out;
}

std::vector<RawRecord> parse_flight_csv_text(const std::string &text,
                                             const ColumnMapping &schema) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    throw Error(Errc::EmptyFile, "no header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF)
    line.erase(0, 3); // UTF-8 BOM
  auto header = split_row(line);
  auto ti = column_index(header, schema.time);
  auto ci = column_index(header, schema.current);
  auto vi = column_index(header, schema.voltage);

  std::vector<RawRecord> out;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    auto cells = split_row(line);
    auto cell = [&](std::size_t i) { return i < cells.size() ? parse_cell(cells[i]) : std::nullopt; };
    auto t = cell(ti);
    if (!t)
      continue;
    out.push_back({*t, cell(ci), cell(vi)});
  }
  if (out.empty())
    throw Error(Errc::EmptyFile, "no data rows");
  return out;
}

std::vector<RawRecord> parse_flight_csv(const std::filesystem::path &path,
                                        const ColumnMapping &schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(Errc::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_flight_csv_text(ss.str(), schema);
}

FlightLog clean(std::span<const RawRecord> records, const CleanBounds &bounds,
                std::string flight_id) {
  require(!records.empty(), "clean: records must be non-empty");

  std::vector<RawRecord> rs(records.begin(), records.end());
  std::stable_sort(rs.begin(), rs.end(),
                   [](const RawRecord &a, const RawRecord &b) { return a.time < b.time; });
  rs.erase(std::unique(rs.begin(), rs.end(),
                       [](const RawRecord &a, const RawRecord &b) { return a.time == b.time; }),
           rs.end());

  auto in_range = [](const std::optional<double> &v, double lo, double hi) {
    return !v || (*v >= lo && *v <= hi);
  };
  std::erase_if(rs, [&](const RawRecord &r) {
    return !in_range(r.current, bounds.current_min, bounds.current_max) ||
           !in_range(r.voltage, bounds.voltage_min, bounds.voltage_max);
  });
  if (rs.empty())
    throw Error(Errc::AllRecordsInvalid, "no record survived cleaning");

  double sum_i = 0.0, sum_v = 0.0;
  std::size_t n_i = 0, n_v = 0;
  for (const auto &r : rs) {
    if (r.current) {
      sum_i += *r.current;
      ++n_i;
    }
    if (r.voltage) {
      sum_v += *r.voltage;
      ++n_v;
    }
  }
  if (n_i == 0 || n_v == 0)
    throw Error(Errc::AllRecordsInvalid, "a required column holds no valid data");
  const double mean_i = sum_i / static_cast<double>(n_i);
  const double mean_v = sum_v / static_cast<double>(n_v);

  FlightLog log;
  log.flight_id = std::move(flight_id);
  log.samples.reserve(rs.size());
  const double t0 = rs.front().time;
  for (const auto &r : rs)
    log.samples.push_back({r.time - t0, r.current.value_or(mean_i), r.voltage.value_or(mean_v)});
  log.sample_period = median_step(log.samples);
  return log;
}

std::vector<RawRecord> to_records(const FlightLog &log) {
  std::vector<RawRecord> out;
  out.reserve(log.samples.size());
  for (const auto &s : log.samples)
    out.push_back({s.time, s.current, s.voltage});
  return out;
}

std::vector<WindowedSample> make_windows(const FlightLog &log,
                                         std::span<const double> physics_voltage,
                                         std::size_t window_size, std::size_t stride) {
  require(window_size >= 1 && stride >= 1, "make_windows: window_size and stride must be >= 1");
  if (physics_voltage.size() != log.samples.size())
    throw Error(Errc::LengthMismatch, "physics voltage not aligned with flight samples");
  const std::size_t len = log.samples.size();
  if (len < window_size)
    throw Error(Errc::TooShort, "flight '" + log.flight_id + "' has " + std::to_string(len) +
                                    " samples, window needs " + std::to_string(window_size));

  std::vector<WindowedSample> out;
  out.reserve((len - window_size) / stride + 1);
  for (std::size_t start = 0; start + window_size <= len; start += stride) {
    WindowedSample w;
    w.window_size = window_size;
    w.inputs.reserve(window_size * 2);
    for (std::size_t k = start; k < start + window_size; ++k) {
      w.inputs.push_back(log.samples[k].current);
      w.inputs.push_back(physics_voltage[k]);
    }
    w.end_index = start + window_size - 1;
    w.target = log.samples[w.end_index].voltage - physics_voltage[w.end_index];
    out.push_back(std::move(w));
  }
  return out;
}

std::pair<std::vector<FlightLog>, std::vector<FlightLog>>
split_by_flight(const std::vector<FlightLog> &logs, const std::set<std::string> &train_ids) {
  for (const auto &id : train_ids) {
    bool found = std::any_of(logs.begin(), logs.end(),
                             [&](const FlightLog &l) { return l.flight_id == id; });
    if (!found)
      throw Error(Errc::UnknownFlight, "no flight with id '" + id + "'");
  }
  std::pair<std::vector<FlightLog>, std::vector<FlightLog>> out;
  for (const auto &l : logs)
    (train_ids.count(l.flight_id) ? out.first : out.second).push_back(l);
  return out;
}

FlightLog load_flight(const std::filesystem::path &path, const CleanBounds &bounds) {
  return clean(parse_flight_csv(path), bounds, path.stem().string());
}

std::vector<FlightLog> load_flight_dir(const std::filesystem::path &dir,
                                       const CleanBounds &bounds) {
  if (!std::filesystem::is_directory(dir))
    throw Error(Errc::Io, "not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto &e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv")
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<FlightLog> out;
  for (const auto &f : files)
    out.push_back(load_flight(f, bounds));
  return out;
}

void write_flight_csv(const std::filesystem::path &path, const FlightLog &log) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(Errc::Io, "cannot write " + path.string());
  out << "time_s,current_a,voltage_v\n";
  for (const auto &s : log.samples)
    out << kv::format_double(s.time) << ',' << kv::format_double(s.current) << ','
        << kv::format_double(s.voltage) << '\n';
}

} // namespace vphm::ingest
