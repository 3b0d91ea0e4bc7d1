#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aqc/numcore/tensor.hpp"

namespace aqc::geo {

using num::Tensor;

inline constexpr double kEarthRadiusKm = 6371.0;

struct Station {
    std::string id;
    double latitude = 0.0;   // degrees, [-90, 90]
    double longitude = 0.0;  // degrees, (-180, 180]
};

/// Throws DataError if the coordinates are out of range.
void validate(const Station& s);

/// Great-circle distance in km.
double haversine(const Station& a, const Station& b);

/// Sensor network with inverse-distance weights W(i,j) = 1 / d(i,j) km^-1.
class SensorGraph {
public:
    /// Complete graph over the stations. With `max_distance_km` set, pairs
    /// farther apart than the cutoff get weight zero.
    static SensorGraph from_stations(std::vector<Station> stations,
                                     std::optional<double> max_distance_km = std::nullopt);

    const std::vector<Station>& stations() const { return stations_; }
    const Tensor& weights() const { return weights_; }
    std::size_t size() const { return stations_.size(); }

    /// Index of the station with this id; ReferenceError if unknown.
    std::size_t index_of(const std::string& id) const;

private:
    SensorGraph(std::vector<Station> stations, Tensor weights)
        : stations_(std::move(stations)), weights_(std::move(weights)) {}

    std::vector<Station> stations_;
    Tensor weights_;
};

/// Same as SensorGraph::from_stations.
SensorGraph distance_adjacency(std::vector<Station> stations,
                               std::optional<double> max_distance_km = std::nullopt);

enum class LaplacianSource { distance, flow_field };

struct ScaledLaplacian {
    Tensor matrix;
    double lambda_max = 0.0;
    LaplacianSource source = LaplacianSource::distance;
};

/// Dominant eigenvalue of a symmetric matrix by power iteration from the
/// normalized all-ones vector. Converged when the residual
/// ||M v - lambda v|| drops below `tol`.
double power_iteration_lambda_max(const Tensor& m, double tol = 1e-12, int max_iter = 100000);

/// 2 Lbar / lambda_max - I with Lbar = I - D^{-1/2} W D^{-1/2} and
/// D(i,i) = sum_j |W(i,j)|. Isolated rows keep the identity row in Lbar.
/// lambda_max comes from power iteration for distance graphs and is fixed at
/// 2 for flow-field graphs, whose Lbar is not symmetric.
ScaledLaplacian scaled_laplacian(const Tensor& w, LaplacianSource source);

/// Stations CSV with header `station_id,latitude,longitude`.
std::vector<Station> read_stations(const std::string& path);

}  // namespace aqc::geo
