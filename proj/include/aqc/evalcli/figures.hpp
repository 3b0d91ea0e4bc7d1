#pragma once

// SVG figures: a station heat map with wind arrows and a diffusion-flux map.

#include <string>
#include <vector>

#include "aqc/geo_graph/graph.hpp"

namespace aqc::eval {

using num::Tensor;

struct Rgb {
    int r = 0, g = 0, b = 0;
};

/// Linear map of [0, max] through green (0), yellow (max/2) and red (max).
/// Values are clamped; max <= 0 maps everything to green.
Rgb concentration_color(double value, double max);
/// Linear map of [-m, m] through blue (-m), white (0) and red (+m).
Rgb flux_color(double flux, double m);

struct Canvas {
    double width = 800.0;
    double height = 600.0;
    double margin = 60.0;
    double arrow_px_per_mps = 12.0;
};

/// Mercator projection of the stations onto the canvas, north up, with the
/// aspect ratio kept. A single station sits in the centre.
std::vector<std::pair<double, double>> project(const std::vector<geo::Station>& stations, const Canvas& c);

/// One circle per station coloured by its value and one arrow per nonzero
/// wind vector (N x 2, u east and v north, m/s) with length proportional to
/// speed. DimensionError on size mismatches; DataError on negative values.
std::string wind_heatmap_svg(const std::vector<geo::Station>& stations, const std::vector<double>& values,
                             const Tensor& wind, const Canvas& c = {});

struct Flux {
    std::size_t to = 0;
    double value = 0.0;  // positive means outflow from the source
};

/// k W(i, j) (X_i - X_j) for every neighbour j of `source` with W(i, j) > 0.
std::vector<Flux> diffusion_fluxes(const Tensor& weights, const std::vector<double>& values, std::size_t source,
                                   double k);

/// Lines from the source station to each neighbour coloured by flux, with a
/// legend. ReferenceError for an unknown station id.
std::string diffusion_lines_svg(const geo::SensorGraph& graph, const std::vector<double>& values,
                                const std::string& source_id, double k, const Canvas& c = {});

/// Writes text to `path`; IoError on failure.
void write_text_file(const std::string& path, const std::string& text);

}  // namespace aqc::eval
