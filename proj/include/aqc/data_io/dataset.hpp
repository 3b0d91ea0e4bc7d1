#pragma once

// Processed 3-hour datasets, windowing and chronological splits.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "aqc/data_io/readings.hpp"
#include "aqc/data_io/window.hpp"
#include "aqc/geo_graph/graph.hpp"

namespace aqc::data {

/// Gap-free series on the 3-hour grid.
struct Dataset {
    std::vector<geo::Station> stations;
    std::int64_t start_time = 0;  // unix seconds of step 0
    Tensor pm25;                  // S x N, ug/m3
    Tensor wind;                  // S x N x 2, (u, v) m/s

    std::size_t steps() const { return pm25.rows(); }
    std::size_t nodes() const { return stations.size(); }
    std::int64_t time_of(std::size_t step) const {
        return start_time + static_cast<std::int64_t>(step) * kStepSeconds;
    }
    /// DataError unless the arrays agree with the station count.
    void validate() const;
};

struct IngestReport {
    std::size_t hours = 0;
    std::size_t missing_pm25 = 0;
    std::size_t missing_wind = 0;
    std::size_t dropped_hours = 0;
};

/// Share of the hourly grid whose observed mean fills leading gaps.
inline constexpr double kTrainFraction = 0.7;

/// Hourly readings to a dataset: wind to (u, v), gap filling, 3-hour means.
Dataset build_dataset(std::vector<geo::Station> stations, const HourlyReadings& readings,
                      IngestReport* report = nullptr);

inline constexpr const char* kDatasetKind = "dataset";
void save_dataset(const std::string& path, const Dataset& d);
/// FormatError on a malformed file, IoError if unreadable.
Dataset load_dataset(const std::string& path);

struct WindowSpec {
    std::size_t history = 24;
    std::size_t horizon = 24;
    std::size_t stride = 1;
};

/// Sliding windows in time order. DataError if the series is shorter than
/// history + horizon.
std::vector<WindowSample> make_windows(const Dataset& d, const WindowSpec& spec = {});

struct SplitRatio {
    double train = 7.0, val = 1.0, test = 2.0;
};
inline constexpr SplitRatio kDefaultSplit{7.0, 1.0, 2.0};
inline constexpr SplitRatio kSparseSplit{3.0, 1.0, 6.0};

struct DatasetSplit {
    std::vector<WindowSample> train, val, test;
    double mean = 0.0;  // PM2.5 over the steps covered by training windows
    double std = 1.0;   // population standard deviation of the same values
};

/// First floor(a n / (a + b + c)) windows train, the next floor(b n / ...)
/// validate, the rest test. ConfigError on an empty partition or a bad
/// ratio; DataError if the training values have zero spread.
DatasetSplit chronological_split(std::vector<WindowSample> windows, const SplitRatio& ratio);

}  // namespace aqc::data
