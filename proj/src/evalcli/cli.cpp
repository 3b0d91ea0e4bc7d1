#include "aqc/evalcli/cli.hpp"

#include <CLI11.hpp>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "aqc/csv.hpp"
#include "aqc/data_io/dataset.hpp"
#include "aqc/errors.hpp"
#include "aqc/evalcli/baselines.hpp"
#include "aqc/evalcli/figures.hpp"
#include "aqc/evalcli/metrics.hpp"
#include "aqc/physics_de/reference.hpp"
#include "aqc/seq_model/checkpoint.hpp"

namespace aqc::eval {

// ---- configuration ---------------------------------------------------------------

nlohmann::json to_json(const ExperimentConfig& cfg) {
    nlohmann::json graph = nlohmann::json::object();
    if (cfg.max_distance_km) graph["max_distance_km"] = *cfg.max_distance_km;
    return {{"model", model::to_json(cfg.model)}, {"train", train::to_json(cfg.train)}, {"graph", graph}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("configuration must be an object");
    for (const auto& [key, _] : j.items()) {
        if (key != "model" && key != "train" && key != "graph") {
            throw ConfigError("unknown configuration section '" + key + "'");
        }
    }
    ExperimentConfig cfg;
    if (j.contains("model")) cfg.model = model::model_config_from_json(j.at("model"));
    if (j.contains("train")) cfg.train = train::train_config_from_json(j.at("train"));
    if (j.contains("graph")) {
        const auto& g = j.at("graph");
        if (!g.is_object()) throw ConfigError("config section 'graph' must be an object");
        for (const auto& [key, value] : g.items()) {
            if (key != "max_distance_km") throw ConfigError("unknown key '" + key + "' in section 'graph'");
            if (value.is_null()) continue;
            if (!value.is_number() || !(value.get<double>() > 0.0)) {
                throw ConfigError("graph.max_distance_km must be a positive number");
            }
            cfg.max_distance_km = value.get<double>();
        }
    }
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return experiment_config_from_json(j);
}

void apply_seed_override(ExperimentConfig& cfg, const char* env_value) {
    if (!env_value) return;
    const std::string s(env_value);
    std::uint64_t seed = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError("AQC_SEED must be a nonnegative integer, got '" + s + "'");
    }
    cfg.model.seed = seed;
    cfg.train.seed = seed;
}

namespace {

// ---- file helpers ----------------------------------------------------------------

std::vector<geo::Station> dataset_graph_stations(const data::Dataset& d) { return d.stations; }

geo::ScaledLaplacian distance_laplacian(const data::Dataset& d, std::optional<double> max_distance_km) {
    const auto graph = geo::SensorGraph::from_stations(dataset_graph_stations(d), max_distance_km);
    return geo::scaled_laplacian(graph.weights(), geo::LaplacianSource::distance);
}

struct Forecasts {
    std::vector<std::int64_t> origins;  // unix seconds of the first forecast step
    std::vector<Tensor> values;         // steps x N each
};

void write_forecast_csv(const std::string& path, const data::Dataset& d, const Forecasts& f, std::size_t steps) {
    std::string text = "timestamp,station_id,pm25_pred\n";
    char buf[64];
    for (std::size_t w = 0; w < f.values.size(); ++w)
        for (std::size_t k = 0; k < steps; ++k)
            for (std::size_t i = 0; i < d.nodes(); ++i) {
                std::snprintf(buf, sizeof buf, "%.10g", f.values[w](k, i));
                text += data::format_timestamp(f.origins[w] + static_cast<std::int64_t>(k) * data::kStepSeconds) +
                        "," + d.stations[i].id + "," + buf + "\n";
            }
    write_text_file(path, text);
}

void write_truth_csv(const std::string& path, const data::Dataset& d) {
    std::string text = "timestamp,station_id,pm25\n";
    char buf[64];
    for (std::size_t s = 0; s < d.steps(); ++s)
        for (std::size_t i = 0; i < d.nodes(); ++i) {
            std::snprintf(buf, sizeof buf, "%.10g", d.pm25(s, i));
            text += data::format_timestamp(d.time_of(s)) + "," + d.stations[i].id + "," + buf + "\n";
        }
    write_text_file(path, text);
}

struct PointRow {
    std::int64_t time;
    std::string station;
    double value;
};

/// Rows of `timestamp,station_id,pm25` or `timestamp,station_id,pm25_pred`.
std::vector<PointRow> read_points(const std::string& path) {
    std::ifstream probe(path);
    if (!probe) throw IoError("cannot open " + path);
    std::string first;
    std::getline(probe, first);
    const bool pred = first.find("pm25_pred") != std::string::npos;
    const auto rows = csv::read(path, {"timestamp", "station_id", pred ? "pm25_pred" : "pm25"});
    std::vector<PointRow> out;
    for (const auto& r : rows) {
        std::int64_t t = 0;
        try {
            t = data::parse_timestamp(r.fields[0]);
        } catch (const aqc::ParseError& e) {
            throw aqc::ParseError(path + ":" + std::to_string(r.line) + ": " + e.what());
        }
        out.push_back({t, r.fields[1], csv::to_double(r.fields[2], r.line, "value")});
    }
    return out;
}

Tensor read_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<double> row;
        for (const auto& f : csv::split(line)) row.push_back(csv::to_double(f, line_no, "matrix entry"));
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw aqc::ParseError(path + ":" + std::to_string(line_no) + ": ragged row");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError(path + ": empty matrix");
    Tensor m = Tensor::zeros(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
    return m;
}

Tensor as_column(const Tensor& m) {
    if (m.rows() != 1 && m.cols() != 1) throw DimensionError("expected a vector, got " + num::to_string(m.shape()));
    return m.reshaped({m.size(), 1});
}

std::vector<data::WindowSample> split_part(std::vector<data::WindowSample> windows, bool sparse,
                                           const std::string& part, data::DatasetSplit* keep = nullptr) {
    if (part == "all") return windows;
    data::DatasetSplit s = data::chronological_split(std::move(windows), sparse ? data::kSparseSplit : data::kDefaultSplit);
    std::vector<data::WindowSample> out = part == "train" ? s.train : part == "val" ? s.val : s.test;
    if (keep) *keep = std::move(s);
    return out;
}

// ---- commands --------------------------------------------------------------------

struct IngestArgs {
    std::string stations, readings, out;
};

void cmd_ingest(const IngestArgs& a, std::ostream& out) {
    auto stations = geo::read_stations(a.stations);
    std::vector<std::string> ids;
    for (const auto& s : stations) ids.push_back(s.id);
    const auto readings = data::parse_readings(a.readings, ids);
    data::IngestReport report;
    const data::Dataset d = data::build_dataset(std::move(stations), readings, &report);
    data::save_dataset(a.out, d);
    out << "ingested " << d.nodes() << " stations, " << report.hours << " hours (" << report.missing_pm25
        << " missing pm25, " << report.missing_wind << " missing wind), " << d.steps() << " steps";
    if (report.dropped_hours) out << ", dropped " << report.dropped_hours << " trailing hours";
    out << "\n";
}

struct TrainArgs {
    std::string config, data, out_dir;
    bool sparse = false;
};

void cmd_train(const TrainArgs& a, std::ostream& out) {
    ExperimentConfig cfg = load_experiment_config(a.config);
    apply_seed_override(cfg, std::getenv("AQC_SEED"));
    const data::Dataset d = data::load_dataset(a.data);
    auto windows = data::make_windows(d, {cfg.model.history, cfg.model.horizon, 1});
    data::DatasetSplit split =
        data::chronological_split(std::move(windows), a.sparse ? data::kSparseSplit : data::kDefaultSplit);

    model::AirPhyNet net(cfg.model, distance_laplacian(d, cfg.max_distance_km));
    net.set_normalization({split.mean, split.std});

    std::error_code ec;
    std::filesystem::create_directories(a.out_dir, ec);
    if (ec) throw IoError("cannot create " + a.out_dir + ": " + ec.message());
    const auto dir = std::filesystem::path(a.out_dir);
    write_text_file((dir / "config.json").string(), to_json(cfg).dump(2) + "\n");
    std::ofstream log(dir / "train_log.csv", std::ios::trunc);
    if (!log) throw IoError("cannot write " + (dir / "train_log.csv").string());
    log << train::kLogHeader << "\n";
    const train::TrainResult r = train::train_loop(net, split.train, split.val, cfg.train, [&](const train::EpochLog& e) {
        log << train::format_log_row(e) << "\n";
        log.flush();
        out << "epoch " << e.epoch << " lr " << e.lr << " train_mae " << e.train_mae << " val_mae " << e.val_mae
            << "\n";
    });
    model::save_checkpoint((dir / "checkpoint.bin").string(), net);
    out << "best epoch " << r.best_epoch << " val_mae " << r.best_val_mae << "; test_mae "
        << train::evaluate_mae(net, split.test) << "\n";
}

struct PredictArgs {
    std::string checkpoint, data, horizon = "72h", out, part = "test", truth_out;
    bool sparse = false;
};

void cmd_predict(const PredictArgs& a, std::ostream& out) {
    const data::Dataset d = data::load_dataset(a.data);
    const auto net = model::load_checkpoint(a.checkpoint, d.nodes());
    const std::size_t steps = horizon_steps(a.horizon);
    const auto& mc = net->config();
    if (steps > mc.horizon) {
        throw ConfigError("horizon " + a.horizon + " exceeds the model's " + std::to_string(mc.horizon) + " steps");
    }
    const auto windows = split_part(data::make_windows(d, {mc.history, mc.horizon, 1}), a.sparse, a.part);
    Forecasts f;
    for (const auto& w : windows) {
        f.origins.push_back(w.start_time + static_cast<std::int64_t>(mc.history) * data::kStepSeconds);
        f.values.push_back(net->predict(w));
    }
    write_forecast_csv(a.out, d, f, steps);
    if (!a.truth_out.empty()) write_truth_csv(a.truth_out, d);
    out << "wrote " << windows.size() << " forecasts of " << steps << " steps to " << a.out << "\n";
}

struct EvaluateArgs {
    std::string pred, truth, city = "beijing", out;
    bool sudden = false;
};

void cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
    const auto pred = read_points(a.pred);
    const auto truth_rows = read_points(a.truth);
    std::map<std::pair<std::int64_t, std::string>, double> truth;
    for (const auto& r : truth_rows) {
        if (!truth.emplace(std::make_pair(r.time, r.station), r.value).second) {
            throw DataError(a.truth + ": duplicate truth for " + r.station + " at " + data::format_timestamp(r.time));
        }
    }
    const SuddenChangeSpec spec = SuddenChangeSpec::for_city(a.city);
    std::vector<double> p, t;
    for (const auto& r : pred) {
        const auto it = truth.find({r.time, r.station});
        if (it == truth.end()) {
            throw DataError("no truth for " + r.station + " at " + data::format_timestamp(r.time));
        }
        if (a.sudden) {
            const auto next = truth.find({r.time + static_cast<std::int64_t>(spec.lookahead) * data::kStepSeconds,
                                          r.station});
            if (next == truth.end()) continue;
            if (!(it->second > spec.level_threshold && std::abs(next->second - it->second) > spec.delta_threshold)) {
                continue;
            }
        }
        p.push_back(r.value);
        t.push_back(it->second);
    }
    const MetricsReport m = metrics_over(p, t);
    nlohmann::json report = {{"mae", m.mae}, {"rmse", m.rmse}, {"n_points", m.n_points}, {"sudden_change", a.sudden}};
    if (a.sudden) report["city"] = a.city;
    const std::string text = report.dump(2) + "\n";
    if (!a.out.empty()) write_text_file(a.out, text);
    out << text;
}

struct BaselineArgs {
    std::string method, data, out, horizon = "72h", part = "test";
    bool sparse = false;
};

void cmd_baseline(const BaselineArgs& a, std::ostream& out) {
    const data::Dataset d = data::load_dataset(a.data);
    const std::size_t steps = horizon_steps(a.horizon);
    const data::WindowSpec spec{};
    data::DatasetSplit split;
    const auto windows = split_part(data::make_windows(d, spec), a.sparse, a.part == "all" ? "test" : a.part, &split);
    Forecasts f;
    if (a.method == "ha") {
        for (const auto& w : windows) {
            const auto origin = static_cast<std::size_t>(w.start_step) + spec.history;
            f.origins.push_back(d.time_of(origin));
            f.values.push_back(ha_forecast(d.pm25, origin, spec.horizon));
        }
    } else {
        // Fit on the steps covered by training windows only.
        const std::size_t fit_end =
            static_cast<std::size_t>(split.train.back().start_step) + spec.history + spec.horizon;
        Tensor fit = Tensor::zeros(fit_end, d.nodes());
        for (std::size_t s = 0; s < fit_end; ++s)
            for (std::size_t i = 0; i < d.nodes(); ++i) fit(s, i) = d.pm25(s, i);
        const VarModel m = var_fit(fit);
        for (const auto& w : windows) {
            const auto origin = static_cast<std::size_t>(w.start_step) + spec.history;
            f.origins.push_back(d.time_of(origin));
            f.values.push_back(var_forecast(m, w.x_hist, spec.horizon));
        }
    }
    write_forecast_csv(a.out, d, f, steps);
    out << "wrote " << windows.size() << " " << a.method << " forecasts of " << steps << " steps to " << a.out
        << "\n";
}

struct SimulateArgs {
    std::string mode, graph, x0, out;
    double t = 0.0, k = 1.0;
};

void cmd_simulate(const SimulateArgs& a, std::ostream& out) {
    const Tensor w = read_matrix_csv(a.graph);
    const Tensor x0 = as_column(read_matrix_csv(a.x0));
    if (x0.rows() != w.rows()) {
        throw DimensionError("x0 has " + std::to_string(x0.rows()) + " entries for a graph of " +
                             std::to_string(w.rows()) + " nodes");
    }
    if (!(a.t >= 0.0)) throw ConfigError("--t must be nonnegative");
    const Tensor x = a.mode == "diffusion" ? physics::simulate_diffusion_reference(w, x0, a.k, a.t)
                                           : physics::simulate_advection_reference(w, x0, a.t);
    std::string text = "node,value\n";
    char buf[64];
    double mass0 = 0.0, mass = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, x[i]);
        text += buf;
        mass0 += x0[i];
        mass += x[i];
    }
    write_text_file(a.out, text);
    out << a.mode << " to t = " << a.t << ": total mass " << mass0 << " -> " << mass << "\n";
}

struct PlotArgs {
    std::string type, data, out, checkpoint, source;
    long step = -1;
    double k = 1.0;
    std::optional<double> max_distance_km;
};

void cmd_plot(const PlotArgs& a, std::ostream& out) {
    const data::Dataset d = data::load_dataset(a.data);
    const std::size_t n = d.nodes();
    const std::size_t step = a.step < 0 ? d.steps() - 1 : static_cast<std::size_t>(a.step);
    if (step >= d.steps()) throw DataError("--step " + std::to_string(step) + " is beyond the series");
    std::vector<double> values(n);
    Tensor wind = Tensor::zeros(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        values[i] = d.pm25(step, i);
        wind(i, 0) = d.wind[(step * n + i) * 2];
        wind(i, 1) = d.wind[(step * n + i) * 2 + 1];
    }
    double k = a.k;
    if (!a.checkpoint.empty()) {
        // Forecast of the step after `step` from the history ending there.
        const auto net = model::load_checkpoint(a.checkpoint, n);
        const auto& mc = net->config();
        if (step + 1 < mc.history) throw DataError("--step leaves less history than the model needs");
        data::WindowSample w;
        const std::size_t start = step + 1 - mc.history;
        w.x_hist = Tensor::zeros(mc.history, n);
        w.x_future = Tensor::zeros(mc.horizon, n);
        w.p_hist = Tensor(num::Shape{mc.history, n, 2}, 0.0);
        for (std::size_t t = 0; t < mc.history; ++t)
            for (std::size_t i = 0; i < n; ++i) {
                w.x_hist(t, i) = d.pm25(start + t, i);
                w.p_hist[(t * n + i) * 2] = d.wind[((start + t) * n + i) * 2];
                w.p_hist[(t * n + i) * 2 + 1] = d.wind[((start + t) * n + i) * 2 + 1];
            }
        const Tensor pred = net->predict(w);
        for (std::size_t i = 0; i < n; ++i) values[i] = std::max(0.0, pred(0, i));
        k = net->dynamics().diffusion_coefficient();
    }
    std::string svg;
    if (a.type == "wind-heatmap") {
        svg = wind_heatmap_svg(d.stations, values, wind);
    } else {
        if (a.source.empty()) throw UsageError("plot --type diffusion-lines needs --source");
        svg = diffusion_lines_svg(geo::SensorGraph::from_stations(d.stations, a.max_distance_km), values, a.source,
                                  k);
    }
    write_text_file(a.out, svg);
    out << "wrote " << a.type << " to " << a.out << "\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"PM2.5 forecasting on sensor networks with learned diffusion and advection", "aqc"};
    app.require_subcommand(1);

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Build a dataset from station and readings CSV files");
    c_ingest->add_option("--stations", ingest.stations, "station_id,latitude,longitude CSV")->required();
    c_ingest->add_option("--readings", ingest.readings, "hourly readings CSV")->required();
    c_ingest->add_option("--out", ingest.out, "dataset file to write")->required();

    TrainArgs tr;
    auto* c_train = app.add_subcommand("train", "Train a model and write its checkpoint and log");
    c_train->add_option("--config", tr.config, "JSON configuration")->required();
    c_train->add_option("--data", tr.data, "dataset file")->required();
    c_train->add_option("--out-dir", tr.out_dir, "output directory")->required();
    c_train->add_flag("--sparse-split", tr.sparse, "use a 3:1:6 split instead of 7:1:2");

    const std::vector<std::string> horizons{"24h", "48h", "72h"}, parts{"train", "val", "test", "all"};
    PredictArgs pr;
    auto* c_predict = app.add_subcommand("predict", "Forecast every window of a split");
    c_predict->add_option("--checkpoint", pr.checkpoint, "checkpoint file")->required();
    c_predict->add_option("--data", pr.data, "dataset file")->required();
    c_predict->add_option("--horizon", pr.horizon, "forecast prefix")->check(CLI::IsMember(horizons))->required();
    c_predict->add_option("--out", pr.out, "forecast CSV to write")->required();
    c_predict->add_option("--split", pr.part, "windows to forecast")->check(CLI::IsMember(parts));
    c_predict->add_option("--truth-out", pr.truth_out, "also write the observed series as CSV");
    c_predict->add_flag("--sparse-split", pr.sparse, "use a 3:1:6 split instead of 7:1:2");

    EvaluateArgs ev;
    auto* c_eval = app.add_subcommand("evaluate", "Score a forecast CSV against observed values");
    c_eval->add_option("--pred", ev.pred, "forecast CSV")->required();
    c_eval->add_option("--truth", ev.truth, "observed CSV")->required();
    c_eval->add_flag("--sudden-change", ev.sudden, "score sudden-change points only");
    c_eval->add_option("--city", ev.city, "sudden-change thresholds")
        ->check(CLI::IsMember({"beijing", "shenzhen"}));
    c_eval->add_option("--out", ev.out, "also write the JSON report here");

    BaselineArgs bl;
    auto* c_base = app.add_subcommand("baseline", "Historical-average or VAR(3) forecasts");
    c_base->add_option("--method", bl.method, "ha or var")->check(CLI::IsMember({"ha", "var"}))->required();
    c_base->add_option("--data", bl.data, "dataset file")->required();
    c_base->add_option("--out", bl.out, "forecast CSV to write")->required();
    c_base->add_option("--horizon", bl.horizon, "forecast prefix")->check(CLI::IsMember(horizons));
    c_base->add_option("--split", bl.part, "windows to forecast")->check(CLI::IsMember({"train", "val", "test"}));
    c_base->add_flag("--sparse-split", bl.sparse, "use a 3:1:6 split instead of 7:1:2");

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "Run the reference diffusion or advection dynamics");
    c_sim->add_option("--mode", sim.mode, "diffusion or advection")
        ->check(CLI::IsMember({"diffusion", "advection"}))
        ->required();
    c_sim->add_option("--graph", sim.graph, "N x N weight (diffusion) or velocity (advection) CSV")->required();
    c_sim->add_option("--x0", sim.x0, "initial values CSV")->required();
    c_sim->add_option("--t", sim.t, "end time")->required();
    c_sim->add_option("--k", sim.k, "diffusion coefficient");
    c_sim->add_option("--out", sim.out, "CSV to write")->required();

    PlotArgs pl;
    double max_distance = 0.0;
    auto* c_plot = app.add_subcommand("plot", "Render an SVG figure");
    c_plot->add_option("--type", pl.type, "wind-heatmap or diffusion-lines")
        ->check(CLI::IsMember({"wind-heatmap", "diffusion-lines"}))
        ->required();
    c_plot->add_option("--data", pl.data, "dataset file")->required();
    c_plot->add_option("--out", pl.out, "SVG to write")->required();
    c_plot->add_option("--step", pl.step, "time step to draw (default: last)");
    c_plot->add_option("--checkpoint", pl.checkpoint, "draw the forecast for the next step instead");
    c_plot->add_option("--source", pl.source, "source station for diffusion-lines");
    c_plot->add_option("--k", pl.k, "diffusion coefficient when no checkpoint is given");
    auto* o_dist = c_plot->add_option("--max-distance", max_distance, "graph edge cutoff in km");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (*c_ingest) cmd_ingest(ingest, out);
        if (*c_train) cmd_train(tr, out);
        if (*c_predict) cmd_predict(pr, out);
        if (*c_eval) cmd_evaluate(ev, out);
        if (*c_base) cmd_baseline(bl, out);
        if (*c_sim) cmd_simulate(sim, out);
        if (*c_plot) {
            if (o_dist->count()) pl.max_distance_km = max_distance;
            cmd_plot(pl, out);
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitOk;
}

}  // namespace aqc::eval
