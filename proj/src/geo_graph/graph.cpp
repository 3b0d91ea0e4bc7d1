#include "aqc/geo_graph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "aqc/csv.hpp"
#include "aqc/errors.hpp"
#include "aqc/numcore/linalg.hpp"

namespace aqc::geo {

void validate(const Station& s) {
    if (!(s.latitude >= -90.0 && s.latitude <= 90.0)) {
        throw DataError("station " + s.id + ": latitude out of range");
    }
    if (!(s.longitude > -180.0 && s.longitude <= 180.0)) {
        throw DataError("station " + s.id + ": longitude out of range");
    }
}

double haversine(const Station& a, const Station& b) {
    constexpr double deg = std::numbers::pi / 180.0;
    const double phi1 = a.latitude * deg, phi2 = b.latitude * deg;
    const double dphi = phi2 - phi1;
    const double dlambda = (b.longitude - a.longitude) * deg;
    const double s1 = std::sin(dphi / 2.0), s2 = std::sin(dlambda / 2.0);
    double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    h = std::clamp(h, 0.0, 1.0);
    return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

SensorGraph SensorGraph::from_stations(std::vector<Station> stations,
                                       std::optional<double> max_distance_km) {
    const std::size_t n = stations.size();
    if (n < 2) throw DataError("sensor graph needs at least 2 stations, got " + std::to_string(n));
    std::set<std::string> ids;
    for (const auto& s : stations) {
        validate(s);
        if (!ids.insert(s.id).second) throw DataError("duplicate station id " + s.id);
    }
    Tensor w = Tensor::zeros(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = haversine(stations[i], stations[j]);
            if (d == 0.0) {
                throw DataError("degenerate graph: stations " + stations[i].id + " and " +
                                stations[j].id + " share coordinates");
            }
            const double wij = (max_distance_km && d > *max_distance_km) ? 0.0 : 1.0 / d;
            w(i, j) = wij;
            w(j, i) = wij;
        }
    }
    return SensorGraph(std::move(stations), std::move(w));
}

std::size_t SensorGraph::index_of(const std::string& id) const {
    for (std::size_t i = 0; i < stations_.size(); ++i)
        if (stations_[i].id == id) return i;
    throw ReferenceError("unknown station id '" + id + "'");
}

SensorGraph distance_adjacency(std::vector<Station> stations, std::optional<double> max_distance_km) {
    return SensorGraph::from_stations(std::move(stations), max_distance_km);
}

double power_iteration_lambda_max(const Tensor& m, double tol, int max_iter) {
    const std::size_t n = m.rows();
    if (m.cols() != n) throw DimensionError("power iteration needs a square matrix");
    if (!(tol > 0.0)) throw ContractError("power iteration: tol must be positive");
    double scale = 0.0;
    for (double x : m.values()) scale = std::max(scale, std::abs(x));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (std::abs(m(i, j) - m(j, i)) > 1e-12 * scale) {
                throw ContractError("power iteration: matrix is not symmetric");
            }

    // Iterates are scaled to unit max-norm so that exactly representable
    // eigenvectors (e.g. (1, -1)) stay exact.
    auto normalize = [](std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s = std::max(s, std::abs(x));
        if (s > 0.0)
            for (double& x : v) x /= s;
        return s;
    };
    auto apply = [&](const std::vector<double>& v) {
        std::vector<double> out(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) out[i] += m(i, j) * v[j];
        return out;
    };
    auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    };

    auto iterate = [&](std::vector<double> v) {
        std::vector<double> mv = apply(v);
        double residual = 0.0;
        for (int it = 0; it < max_iter; ++it) {
            const double vv = dot(v, v);
            const double lambda = dot(v, mv) / vv;
            residual = 0.0;
            for (std::size_t i = 0; i < n; ++i) residual += (mv[i] - lambda * v[i]) * (mv[i] - lambda * v[i]);
            residual = std::sqrt(residual / vv);
            if (residual <= tol) return lambda;
            v = mv;
            if (normalize(v) == 0.0) return 0.0;
            mv = apply(v);
        }
        throw NumericError("power iteration did not converge after " + std::to_string(max_iter) +
                           " iterations (residual " + std::to_string(residual) + ")");
    };

    // All-ones can be orthogonal to the dominant eigenvector (a lone edge
    // beside an isolated node converges to 1, not 2), so a fixed irregular
    // start vector runs as well and the larger magnitude wins.
    std::vector<double> irregular(n);
    for (std::size_t i = 0; i < n; ++i) irregular[i] = 1.0 + std::fmod(0.6180339887498949 * (i + 1), 1.0);
    const double from_ones = iterate(std::vector<double>(n, 1.0));
    const double from_irregular = iterate(irregular);
    return std::abs(from_irregular) > std::abs(from_ones) ? from_irregular : from_ones;
}

ScaledLaplacian scaled_laplacian(const Tensor& w, LaplacianSource source) {
    if (w.rank() != 2 || w.rows() != w.cols()) {
        throw DimensionError("scaled_laplacian: expected a square matrix, got " + num::to_string(w.shape()));
    }
    const std::size_t n = w.rows();
    Tensor lbar = num::normalized_adjacency(w);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) lbar(i, j) = (i == j ? 1.0 : 0.0) - lbar(i, j);

    const double lambda =
        source == LaplacianSource::distance ? power_iteration_lambda_max(lbar) : 2.0;
    Tensor l = Tensor::zeros(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) l(i, j) = 2.0 * lbar(i, j) / lambda - (i == j ? 1.0 : 0.0);
    return {std::move(l), lambda, source};
}

std::vector<Station> read_stations(const std::string& path) {
    std::vector<Station> out;
    std::set<std::string> ids;
    for (const auto& row : csv::read(path, {"station_id", "latitude", "longitude"})) {
        Station s{row.fields[0], csv::to_double(row.fields[1], row.line, "latitude"),
                  csv::to_double(row.fields[2], row.line, "longitude")};
        if (s.id.empty()) throw ParseError(path + ":" + std::to_string(row.line) + ": empty station_id");
        if (!ids.insert(s.id).second) {
            throw DataError(path + ":" + std::to_string(row.line) + ": duplicate station id " + s.id);
        }
        validate(s);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace aqc::geo
