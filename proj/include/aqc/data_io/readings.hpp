#pragma once

// Raw station readings on an hourly grid, gap filling and 3-hour resampling.

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "aqc/numcore/tensor.hpp"

namespace aqc::data {

using num::Tensor;

inline constexpr std::int64_t kHourSeconds = 3600;
inline constexpr std::int64_t kStepSeconds = 3 * kHourSeconds;
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

bool is_missing(double v);

/// Unix seconds from an ISO-8601 UTC instant: `YYYY-MM-DDTHH:MM[:SS]` with
/// an optional `Z` or `+00:00` suffix; a space may replace `T`. ParseError
/// otherwise.
std::int64_t parse_timestamp(const std::string& text);
/// `YYYY-MM-DDTHH:MM:SSZ`.
std::string format_timestamp(std::int64_t unix_seconds);

/// Time-major steps x nodes grid; kMissing marks a gap.
struct Series {
    std::size_t steps = 0;
    std::size_t nodes = 0;
    std::vector<double> values;

    Series() = default;
    Series(std::size_t steps, std::size_t nodes, double fill = kMissing)
        : steps(steps), nodes(nodes), values(steps * nodes, fill) {}

    double operator()(std::size_t t, std::size_t i) const { return values[t * nodes + i]; }
    double& operator()(std::size_t t, std::size_t i) { return values[t * nodes + i]; }
    std::size_t missing() const;
};

struct HourlyReadings {
    std::int64_t start_time = 0;  // unix seconds of hour 0
    std::vector<std::string> stations;
    Series pm25;            // ug/m3
    Series wind_speed;      // m/s
    Series wind_direction;  // degrees the wind comes from, clockwise from north

    std::size_t hours() const { return pm25.steps; }
};

/// Reads `timestamp,station_id,pm25,wind_speed,wind_direction` rows onto an
/// hourly grid spanning the first to the last timestamp, with stations in
/// the order given. Empty fields and absent rows become gaps. ParseError
/// with the line number on malformed rows, timestamps off the hour,
/// negative readings, directions outside [0, 360) or duplicate rows;
/// ReferenceError for a station not in `station_ids`.
HourlyReadings parse_readings(const std::string& path, const std::vector<std::string>& station_ids);

/// Wind vector (u, v) in m/s, pointing where the air goes.
struct WindVector {
    double u = 0.0, v = 0.0;
};
WindVector wind_components(double speed, double direction_deg);

/// Hourly (u, v) grids; a gap in either speed or direction gives a gap,
/// except that calm hours (speed 0) need no direction.
void wind_component_series(const HourlyReadings& r, Series& u, Series& v);

/// Fills each gap with the mean of the station's observed values in the
/// preceding 24 steps, else the station's last observed value, else
/// `leading_fallback`. Observed values are never changed and only observed
/// values feed the means. DataError if a station has no observations.
Series impute_missing(const Series& s, double leading_fallback, const std::vector<std::string>& names = {});

/// Mean of the observed values in steps [0, end_step); over all steps when
/// that range has none. DataError if the series has no observations at all.
double observed_mean(const Series& s, std::size_t end_step);

struct Resampled {
    Tensor pm25;  // S x N
    Tensor wind;  // S x N x 2
    std::size_t dropped_hours = 0;
};

/// Block means over consecutive 3-hour blocks of gap-free hourly series. A
/// trailing partial block is dropped and counted. DataError on gaps or when
/// fewer than 3 hours are given.
Resampled resample_3h(const Series& pm25, const Series& u, const Series& v);

}  // namespace aqc::data
