#pragma once

// Flight-log ingestion: CSV parsing, cleaning, mean imputation and windowing.

#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace vphm::ingest {

struct ColumnMapping {
  std::string time = "time_s";
  std::string current = "current_a";
  std::string voltage = "voltage_v";
};

/// One parsed CSV row; absent or unparseable numeric cells are std::nullopt.
struct RawRecord {
  double time = 0.0;
  std::optional<double> current;
  std::optional<double> voltage;
};

struct Sample {
  double time = 0.0;
  double current = 0.0;
  double voltage = 0.0;
};

struct FlightLog {
  std::string flight_id;
  std::vector<Sample> samples;
  double sample_period = 1.0;

  std::size_t size() const { return samples.size(); }
  std::vector<double> currents() const;
  std::vector<double> voltages() const;
  std::vector<double> times() const;
};

/// Plausibility bounds for "incorrect sensor readings".
struct CleanBounds {
  double current_min = -5.0;
  double current_max = 200.0;
  double voltage_min = 0.0;
  double voltage_max = 30.0;
};

struct WindowedSample {
  std::size_t window_size = 0;
  /// Row-major window_size x 2: (current A, physics voltage V) per row.
  std::vector<double> inputs;
  /// measured - physics voltage at the window's last index.
  double target = 0.0;
  /// Index of the window's last sample in the source flight.
  std::size_t end_index = 0;
};

/// Rows whose time cell is not a finite number are skipped; they cannot be
/// placed on the time axis.
std::vector<RawRecord> parse_flight_csv(const std::filesystem::path &path,
                                        const ColumnMapping &schema = {});
std::vector<RawRecord> parse_flight_csv_text(const std::string &text,
                                             const ColumnMapping &schema = {});

/// Sort by time, drop repeated timestamps (first kept), drop out-of-bounds
/// readings, impute missing values with the column mean of the survivors, and
/// shift time to start at zero. Throws AllRecordsInvalid if nothing survives.
FlightLog clean(std::span<const RawRecord> records, const CleanBounds &bounds = {},
                std::string flight_id = {});

std::vector<RawRecord> to_records(const FlightLog &log);

/// Throws TooShort when the log holds fewer than window_size samples.
std::vector<WindowedSample> make_windows(const FlightLog &log,
                                         std::span<const double> physics_voltage,
                                         std::size_t window_size = 10,
                                         std::size_t stride = 1);

/// Whole-flight split. Throws UnknownFlight for an id not among `logs`.
std::pair<std::vector<FlightLog>, std::vector<FlightLog>>
split_by_flight(const std::vector<FlightLog> &logs, const std::set<std::string> &train_ids);

/// Parse + clean one file; flight id is the file stem.
FlightLog load_flight(const std::filesystem::path &path, const CleanBounds &bounds = {});
/// Every *.csv in `dir`, sorted by file name.
std::vector<FlightLog> load_flight_dir(const std::filesystem::path &dir,
                                       const CleanBounds &bounds = {});

void write_flight_csv(const std::filesystem::path &path, const FlightLog &log);

} // namespace vphm::ingest
