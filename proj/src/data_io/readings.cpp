#include "aqc/data_io/readings.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <unordered_map>

#include "aqc/csv.hpp"
#include "aqc/errors.hpp"

namespace aqc::data {

bool is_missing(double v) { return std::isnan(v); }

std::size_t Series::missing() const {
    return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), is_missing));
}

// ---- timestamps ------------------------------------------------------------------

std::int64_t parse_timestamp(const std::string& text) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0, used = 0;
    char sep = 0;
    const int got = std::sscanf(text.c_str(), "%4d-%2d-%2d%c%2d:%2d%n", &y, &mo, &d, &sep, &h, &mi, &used);
    if (got < 6 || (sep != 'T' && sep != ' ')) throw ParseError("invalid timestamp '" + text + "'");
    std::string rest = text.substr(static_cast<std::size_t>(used));
    if (rest.size() >= 3 && rest[0] == ':') {
        int consumed = 0;
        if (std::sscanf(rest.c_str(), ":%2d%n", &s, &consumed) != 1 || consumed != 3) {
            throw ParseError("invalid timestamp '" + text + "'");
        }
        rest = rest.substr(3);
    }
    if (!(rest.empty() || rest == "Z" || rest == "+00:00")) {
        throw ParseError("timestamp '" + text + "' is not UTC");
    }
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || s > 59 || h < 0 || mi < 0 || s < 0) {
        throw ParseError("invalid timestamp '" + text + "'");
    }
    const auto days = sys_days(ymd).time_since_epoch().count();
    return static_cast<std::int64_t>(days) * 86400 + h * 3600 + mi * 60 + s;
}

std::string format_timestamp(std::int64_t unix_seconds) {
    using namespace std::chrono;
    const std::int64_t day_index = unix_seconds >= 0 ? unix_seconds / 86400 : -((-unix_seconds + 86399) / 86400);
    const std::int64_t rem = unix_seconds - day_index * 86400;
    const year_month_day ymd{sys_days{days{day_index}}};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(rem / 3600),
                  static_cast<int>(rem % 3600 / 60), static_cast<int>(rem % 60));
    return buf;
}

// ---- parsing ---------------------------------------------------------------------

namespace {

double optional_reading(const std::string& field, const std::string& where, const char* what) {
    if (field.empty()) return kMissing;
    double v = 0.0;
    try {
        v = csv::to_double(field, 0, what);
    } catch (const ParseError&) {
        throw ParseError(where + "invalid " + what + " '" + field + "'");
    }
    if (!std::isfinite(v)) throw ParseError(where + what + " must be finite");
    return v;
}

}  // namespace

HourlyReadings parse_readings(const std::string& path, const std::vector<std::string>& station_ids) {
    const auto rows = csv::read(path, {"timestamp", "station_id", "pm25", "wind_speed", "wind_direction"});
    if (rows.empty()) throw DataError(path + ": no readings");
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < station_ids.size(); ++i) index.emplace(station_ids[i], i);

    struct Parsed {
        std::size_t line;
        std::int64_t time;
        std::size_t station;
        double pm25, speed, direction;
    };
    std::vector<Parsed> parsed;
    parsed.reserve(rows.size());
    std::int64_t first = 0, last = 0;
    for (const auto& row : rows) {
        const auto at = [&](const std::string& msg) {
            return path + ":" + std::to_string(row.line) + ": " + msg;
        };
        std::int64_t t = 0;
        try {
            t = parse_timestamp(row.fields[0]);
        } catch (const ParseError& e) {
            throw ParseError(at(e.what()));
        }
        if (t % kHourSeconds != 0) throw ParseError(at("timestamp '" + row.fields[0] + "' is not on the hour"));
        const auto it = index.find(row.fields[1]);
        if (it == index.end()) throw ReferenceError(at("unknown station '" + row.fields[1] + "'"));
        Parsed p{row.line, t, it->second, 0.0, 0.0, 0.0};
        const std::string where = path + ":" + std::to_string(row.line) + ": ";
        p.pm25 = optional_reading(row.fields[2], where, "pm25");
        p.speed = optional_reading(row.fields[3], where, "wind_speed");
        p.direction = optional_reading(row.fields[4], where, "wind_direction");
        if (p.pm25 < 0.0) throw ParseError(at("negative pm25"));
        if (p.speed < 0.0) throw ParseError(at("negative wind_speed"));
        if (p.direction < 0.0 || p.direction >= 360.0) throw ParseError(at("wind_direction outside [0, 360)"));
        if (parsed.empty() || t < first) first = t;
        if (parsed.empty() || t > last) last = t;
        parsed.push_back(p);
    }

    HourlyReadings out;
    out.start_time = first;
    out.stations = station_ids;
    const std::size_t hours = static_cast<std::size_t>((last - first) / kHourSeconds) + 1;
    const std::size_t n = station_ids.size();
    out.pm25 = Series(hours, n);
    out.wind_speed = Series(hours, n);
    out.wind_direction = Series(hours, n);
    std::vector<std::size_t> seen(hours * n, 0);
    for (const auto& p : parsed) {
        const std::size_t h = static_cast<std::size_t>((p.time - first) / kHourSeconds);
        std::size_t& prev = seen[h * n + p.station];
        if (prev != 0) {
            throw ParseError(path + ":" + std::to_string(p.line) + ": duplicate reading for station '" +
                             station_ids[p.station] + "' (first at line " + std::to_string(prev) + ")");
        }
        prev = p.line;
        out.pm25(h, p.station) = p.pm25;
        out.wind_speed(h, p.station) = p.speed;
        out.wind_direction(h, p.station) = p.direction;
    }
    return out;
}

// ---- wind ------------------------------------------------------------------------

WindVector wind_components(double speed, double direction_deg) {
    const double theta = direction_deg * std::numbers::pi / 180.0;
    return {-speed * std::sin(theta), -speed * std::cos(theta)};
}

void wind_component_series(const HourlyReadings& r, Series& u, Series& v) {
    u = Series(r.hours(), r.stations.size());
    v = Series(r.hours(), r.stations.size());
    for (std::size_t k = 0; k < u.values.size(); ++k) {
        const double s = r.wind_speed.values[k], d = r.wind_direction.values[k];
        if (is_missing(s)) continue;
        if (s == 0.0) {
            u.values[k] = v.values[k] = 0.0;
        } else if (!is_missing(d)) {
            const WindVector w = wind_components(s, d);
            u.values[k] = w.u;
            v.values[k] = w.v;
        }
    }
}

// ---- imputation ------------------------------------------------------------------

Series impute_missing(const Series& s, double leading_fallback, const std::vector<std::string>& names) {
    if (!std::isfinite(leading_fallback)) throw ContractError("impute_missing: fallback must be finite");
    Series out = s;
    for (std::size_t i = 0; i < s.nodes; ++i) {
        double sum = 0.0;  // observed values in the trailing 24-step window
        std::size_t count = 0;
        double last_known = kMissing;
        bool any = false;
        for (std::size_t t = 0; t < s.steps; ++t) {
            const double x = s(t, i);
            if (is_missing(x)) {
                out(t, i) = count > 0 ? sum / static_cast<double>(count)
                                      : (is_missing(last_known) ? leading_fallback : last_known);
            } else {
                any = true;
                last_known = x;
            }
            // Slide the window so it covers steps [t - 23, t] for the next step.
            if (!is_missing(x)) {
                sum += x;
                ++count;
            }
            if (t >= 24 && !is_missing(s(t - 24, i))) {
                sum -= s(t - 24, i);
                --count;
            }
        }
        if (!any) {
            throw DataError("station '" + (i < names.size() ? names[i] : std::to_string(i)) +
                            "' has no observations");
        }
    }
    return out;
}

double observed_mean(const Series& s, std::size_t end_step) {
    const auto mean_until = [&](std::size_t end) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t k = 0; k < std::min(end, s.steps) * s.nodes; ++k)
            if (!is_missing(s.values[k])) {
                sum += s.values[k];
                ++count;
            }
        return count ? sum / static_cast<double>(count) : kMissing;
    };
    double m = mean_until(end_step);
    if (is_missing(m)) m = mean_until(s.steps);
    if (is_missing(m)) throw DataError("series has no observations");
    return m;
}

// ---- resampling ------------------------------------------------------------------

Resampled resample_3h(const Series& pm25, const Series& u, const Series& v) {
    if (u.steps != pm25.steps || v.steps != pm25.steps || u.nodes != pm25.nodes || v.nodes != pm25.nodes) {
        throw DimensionError("resample_3h: pm25 and wind grids differ in size");
    }
    if (pm25.steps < 3) throw DataError("resample_3h: need at least 3 hours, got " + std::to_string(pm25.steps));
    if (pm25.missing() + u.missing() + v.missing() > 0) throw DataError("resample_3h: series still has gaps");
    const std::size_t steps = pm25.steps / 3, n = pm25.nodes;
    Resampled out;
    out.dropped_hours = pm25.steps % 3;
    out.pm25 = Tensor::zeros(steps, n);
    out.wind = Tensor(num::Shape{steps, n, 2}, 0.0);
    for (std::size_t s = 0; s < steps; ++s)
        for (std::size_t i = 0; i < n; ++i) {
            double p = 0.0, su = 0.0, sv = 0.0;
            for (std::size_t h = 3 * s; h < 3 * s + 3; ++h) {
                p += pm25(h, i);
                su += u(h, i);
                sv += v(h, i);
            }
            out.pm25(s, i) = p / 3.0;
            out.wind[(s * n + i) * 2] = su / 3.0;
            out.wind[(s * n + i) * 2 + 1] = sv / 3.0;
        }
    return out;
}

}  // namespace aqc::data
