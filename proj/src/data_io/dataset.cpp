#include "aqc/data_io/dataset.hpp"

#include <cmath>
#include <map>

#include "aqc/container.hpp"
#include "aqc/errors.hpp"

namespace aqc::data {

void Dataset::validate() const {
    const std::size_t n = stations.size();
    if (n == 0) throw DataError("dataset has no stations");
    if (pm25.rank() != 2 || pm25.cols() != n || pm25.rows() == 0) {
        throw DataError("dataset pm25 must be S x " + std::to_string(n) + ", got " + num::to_string(pm25.shape()));
    }
    if (wind.shape() != num::Shape{pm25.rows(), n, 2}) {
        throw DataError("dataset wind must be S x N x 2, got " + num::to_string(wind.shape()));
    }
    if (start_time % kHourSeconds != 0) throw DataError("dataset start time is not on the hour");
}

Dataset build_dataset(std::vector<geo::Station> stations, const HourlyReadings& readings, IngestReport* report) {
    if (stations.size() != readings.stations.size()) {
        throw DataError("readings cover " + std::to_string(readings.stations.size()) + " stations, expected " +
                        std::to_string(stations.size()));
    }
    for (std::size_t i = 0; i < stations.size(); ++i) {
        if (stations[i].id != readings.stations[i]) throw DataError("station order differs from readings");
    }
    Series u, v;
    wind_component_series(readings, u, v);
    const std::size_t train_end =
        static_cast<std::size_t>(std::floor(kTrainFraction * static_cast<double>(readings.hours())));
    const Series pm25 = impute_missing(readings.pm25, observed_mean(readings.pm25, train_end), readings.stations);
    const Series ui = impute_missing(u, observed_mean(u, train_end), readings.stations);
    const Series vi = impute_missing(v, observed_mean(v, train_end), readings.stations);
    Resampled r = resample_3h(pm25, ui, vi);
    if (report) {
        report->hours = readings.hours();
        report->missing_pm25 = readings.pm25.missing();
        report->missing_wind = u.missing();
        report->dropped_hours = r.dropped_hours;
    }
    Dataset d{std::move(stations), readings.start_time, std::move(r.pm25), std::move(r.wind)};
    d.validate();
    return d;
}

// ---- persistence -----------------------------------------------------------------

void save_dataset(const std::string& path, const Dataset& d) {
    d.validate();
    io::Container c;
    c.kind = kDatasetKind;
    nlohmann::json ids = nlohmann::json::array();
    Tensor coords = Tensor::zeros(d.nodes(), 2);
    for (std::size_t i = 0; i < d.nodes(); ++i) {
        ids.push_back(d.stations[i].id);
        coords(i, 0) = d.stations[i].latitude;
        coords(i, 1) = d.stations[i].longitude;
    }
    c.meta["stations"] = ids;
    c.meta["start_time"] = format_timestamp(d.start_time);
    c.meta["step_seconds"] = kStepSeconds;
    c.arrays.push_back({"stations.coordinates", coords});
    c.arrays.push_back({"pm25", d.pm25});
    c.arrays.push_back({"wind", d.wind});
    io::write_container(path, c);
}

Dataset load_dataset(const std::string& path) {
    const io::Container c = io::read_container(path, kDatasetKind);
    Dataset d;
    try {
        const auto ids = c.meta.at("stations").get<std::vector<std::string>>();
        if (c.meta.at("step_seconds").get<std::int64_t>() != kStepSeconds) {
            throw FormatError(path + ": unsupported step length");
        }
        d.start_time = parse_timestamp(c.meta.at("start_time").get<std::string>());
        const Tensor& coords = c.array("stations.coordinates");
        if (coords.shape() != num::Shape{ids.size(), 2}) {
            throw ShapeError(path + ": array 'stations.coordinates' has shape " + num::to_string(coords.shape()));
        }
        for (std::size_t i = 0; i < ids.size(); ++i) d.stations.push_back({ids[i], coords(i, 0), coords(i, 1)});
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": malformed dataset header: " + e.what());
    } catch (const ParseError& e) {
        throw FormatError(path + ": " + e.what());
    }
    d.pm25 = c.array("pm25");
    d.wind = c.array("wind");
    try {
        d.validate();
        for (const auto& s : d.stations) geo::validate(s);
    } catch (const DataError& e) {
        throw FormatError(path + ": " + e.what());
    }
    return d;
}

// ---- windows and splits ----------------------------------------------------------

std::vector<WindowSample> make_windows(const Dataset& d, const WindowSpec& spec) {
    d.validate();
    if (spec.history == 0 || spec.horizon == 0 || spec.stride == 0) {
        throw ConfigError("window history, horizon and stride must be positive");
    }
    const std::size_t span = spec.history + spec.horizon, n = d.nodes();
    if (d.steps() < span) {
        throw DataError("series has " + std::to_string(d.steps()) + " steps; windows need at least " +
                        std::to_string(span));
    }
    std::vector<WindowSample> out;
    for (std::size_t s = 0; s + span <= d.steps(); s += spec.stride) {
        WindowSample w;
        w.x_hist = Tensor::zeros(spec.history, n);
        w.x_future = Tensor::zeros(spec.horizon, n);
        w.p_hist = Tensor(num::Shape{spec.history, n, 2}, 0.0);
        for (std::size_t t = 0; t < spec.history; ++t)
            for (std::size_t i = 0; i < n; ++i) {
                w.x_hist(t, i) = d.pm25(s + t, i);
                w.p_hist[(t * n + i) * 2] = d.wind[((s + t) * n + i) * 2];
                w.p_hist[(t * n + i) * 2 + 1] = d.wind[((s + t) * n + i) * 2 + 1];
            }
        for (std::size_t t = 0; t < spec.horizon; ++t)
            for (std::size_t i = 0; i < n; ++i) w.x_future(t, i) = d.pm25(s + spec.history + t, i);
        w.start_step = static_cast<std::int64_t>(s);
        w.start_time = d.time_of(s);
        out.push_back(std::move(w));
    }
    return out;
}

DatasetSplit chronological_split(std::vector<WindowSample> windows, const SplitRatio& ratio) {
    const double total = ratio.train + ratio.val + ratio.test;
    if (!(ratio.train >= 0 && ratio.val >= 0 && ratio.test >= 0) || !(total > 0) || !std::isfinite(total)) {
        throw ConfigError("split ratio must be nonnegative with a positive sum");
    }
    for (std::size_t k = 1; k < windows.size(); ++k) {
        if (windows[k].start_step <= windows[k - 1].start_step) throw ContractError("windows are not in time order");
    }
    const double n = static_cast<double>(windows.size());
    const auto n_train = static_cast<std::size_t>(std::floor(ratio.train * n / total));
    const auto n_val = static_cast<std::size_t>(std::floor(ratio.val * n / total));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= windows.size()) {
        throw ConfigError("split of " + std::to_string(windows.size()) + " windows leaves an empty partition");
    }
    DatasetSplit out;
    auto begin = std::make_move_iterator(windows.begin());
    out.train.assign(begin, begin + static_cast<std::ptrdiff_t>(n_train));
    out.val.assign(begin + static_cast<std::ptrdiff_t>(n_train),
                   begin + static_cast<std::ptrdiff_t>(n_train + n_val));
    out.test.assign(begin + static_cast<std::ptrdiff_t>(n_train + n_val), std::make_move_iterator(windows.end()));

    // Each covered step counts once, however many windows contain it.
    std::map<std::int64_t, const double*> rows;
    for (const auto& w : out.train) {
        const std::size_t n_nodes = w.nodes();
        for (std::size_t t = 0; t < w.history(); ++t)
            rows.emplace(w.start_step + static_cast<std::int64_t>(t), w.x_hist.values().data() + t * n_nodes);
        for (std::size_t t = 0; t < w.horizon(); ++t)
            rows.emplace(w.start_step + static_cast<std::int64_t>(w.history() + t),
                         w.x_future.values().data() + t * n_nodes);
    }
    const std::size_t width = out.train.front().nodes();
    double sum = 0.0, count = 0.0;
    for (const auto& [_, row] : rows)
        for (std::size_t i = 0; i < width; ++i) {
            sum += row[i];
            count += 1.0;
        }
    out.mean = sum / count;
    double sq = 0.0;
    for (const auto& [_, row] : rows)
        for (std::size_t i = 0; i < width; ++i) sq += (row[i] - out.mean) * (row[i] - out.mean);
    out.std = std::sqrt(sq / count);
    if (!(out.std > 0.0)) throw DataError("training PM2.5 values have zero spread");
    return out;
}

}  // namespace aqc::data
