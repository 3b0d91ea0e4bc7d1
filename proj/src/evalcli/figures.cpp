#include "aqc/evalcli/figures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "aqc/errors.hpp"

namespace aqc::eval {

namespace {

Rgb lerp(const Rgb& a, const Rgb& b, double t) {
    const auto mix = [t](int x, int y) { return static_cast<int>(std::lround(x + (y - x) * t)); };
    return {mix(a.r, b.r), mix(a.g, b.g), mix(a.b, b.b)};
}

std::string hex(const Rgb& c) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
    return buf;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", std::abs(v) < 5e-3 ? 0.0 : v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += ch;
        }
    }
    return out;
}

const Rgb kGreen{26, 152, 80}, kYellow{254, 224, 139}, kRed{215, 48, 39};
const Rgb kBlue{33, 102, 172}, kWhite{247, 247, 247};

std::string header(const Canvas& c) {
    return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
           "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(c.width) + "\" height=\"" + num(c.height) +
           "\" viewBox=\"0 0 " + num(c.width) + " " + num(c.height) + "\">\n"
           "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
}

std::string gradient_legend(const Canvas& c, const std::string& id, const Rgb& lo, const Rgb& mid, const Rgb& hi,
                            const std::string& lo_label, const std::string& hi_label, const std::string& title) {
    const double x = c.width - c.margin - 160.0, y = c.height - c.margin / 2.0 - 12.0;
    std::string s;
    s += "<defs><linearGradient id=\"" + id + "\" x1=\"0\" x2=\"1\" y1=\"0\" y2=\"0\">";
    s += "<stop offset=\"0\" stop-color=\"" + hex(lo) + "\"/>";
    s += "<stop offset=\"0.5\" stop-color=\"" + hex(mid) + "\"/>";
    s += "<stop offset=\"1\" stop-color=\"" + hex(hi) + "\"/>";
    s += "</linearGradient></defs>\n";
    s += "<g class=\"legend\">";
    s += "<text x=\"" + num(x) + "\" y=\"" + num(y - 6) + "\" font-size=\"12\">" + escape(title) + "</text>";
    s += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"160.00\" height=\"12.00\" fill=\"url(#" + id +
         ")\" stroke=\"#333333\"/>";
    s += "<text x=\"" + num(x) + "\" y=\"" + num(y + 26) + "\" font-size=\"11\">" + escape(lo_label) + "</text>";
    s += "<text x=\"" + num(x + 160) + "\" y=\"" + num(y + 26) + "\" font-size=\"11\" text-anchor=\"end\">" +
         escape(hi_label) + "</text>";
    s += "</g>\n";
    return s;
}

}  // namespace

Rgb concentration_color(double value, double max) {
    if (!(max > 0.0)) return kGreen;
    const double t = std::clamp(value / max, 0.0, 1.0);
    return t < 0.5 ? lerp(kGreen, kYellow, t / 0.5) : lerp(kYellow, kRed, (t - 0.5) / 0.5);
}

Rgb flux_color(double flux, double m) {
    if (!(m > 0.0)) return kWhite;
    const double t = std::clamp(flux / m, -1.0, 1.0);
    return t < 0.0 ? lerp(kWhite, kBlue, -t) : lerp(kWhite, kRed, t);
}

std::vector<std::pair<double, double>> project(const std::vector<geo::Station>& stations, const Canvas& c) {
    std::vector<std::pair<double, double>> xy;
    for (const auto& s : stations) {
        geo::validate(s);
        const double lon = s.longitude * std::numbers::pi / 180.0, lat = s.latitude * std::numbers::pi / 180.0;
        xy.emplace_back(lon, std::log(std::tan(std::numbers::pi / 4.0 + lat / 2.0)));
    }
    if (xy.empty()) return xy;
    double x0 = xy[0].first, x1 = x0, y0 = xy[0].second, y1 = y0;
    for (const auto& [x, y] : xy) {
        x0 = std::min(x0, x), x1 = std::max(x1, x);
        y0 = std::min(y0, y), y1 = std::max(y1, y);
    }
    const double span = std::max(x1 - x0, y1 - y0);
    const double avail_w = c.width - 2 * c.margin, avail_h = c.height - 2 * c.margin;
    const double scale = span > 0.0 ? std::min(avail_w, avail_h) / span : 0.0;
    const double cx = c.width / 2.0, cy = c.height / 2.0;
    const double mx = (x0 + x1) / 2.0, my = (y0 + y1) / 2.0;
    for (auto& [x, y] : xy) {
        x = cx + (x - mx) * scale;
        y = cy - (y - my) * scale;
    }
    return xy;
}

std::string wind_heatmap_svg(const std::vector<geo::Station>& stations, const std::vector<double>& values,
                             const Tensor& wind, const Canvas& c) {
    const std::size_t n = stations.size();
    if (values.size() != n || wind.shape() != num::Shape{n, 2}) {
        throw DimensionError("wind heatmap: " + std::to_string(n) + " stations need as many values and an N x 2 wind");
    }
    double max = 0.0;
    for (double v : values) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw DataError("wind heatmap: values must be finite and nonnegative");
        max = std::max(max, v);
    }
    const auto xy = project(stations, c);
    std::string s = header(c);
    s += "<defs><marker id=\"head\" viewBox=\"0 0 10 10\" refX=\"9\" refY=\"5\" markerWidth=\"6\" markerHeight=\"6\" "
         "orient=\"auto\"><path d=\"M0,0 L10,5 L0,10 z\" fill=\"#222222\"/></marker></defs>\n";
    for (std::size_t i = 0; i < n; ++i) {
        s += "<circle class=\"station\" cx=\"" + num(xy[i].first) + "\" cy=\"" + num(xy[i].second) +
             "\" r=\"14.00\" fill=\"" + hex(concentration_color(values[i], max)) + "\" stroke=\"#333333\"><title>" +
             escape(stations[i].id) + ": " + num(values[i]) + "</title></circle>\n";
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double u = wind(i, 0), v = wind(i, 1);
        if (u == 0.0 && v == 0.0) continue;
        const double x2 = xy[i].first + u * c.arrow_px_per_mps, y2 = xy[i].second - v * c.arrow_px_per_mps;
        s += "<line class=\"arrow\" x1=\"" + num(xy[i].first) + "\" y1=\"" + num(xy[i].second) + "\" x2=\"" +
             num(x2) + "\" y2=\"" + num(y2) + "\" stroke=\"#222222\" stroke-width=\"2\" marker-end=\"url(#head)\"/>\n";
    }
    for (std::size_t i = 0; i < n; ++i) {
        s += "<text class=\"label\" x=\"" + num(xy[i].first + 16) + "\" y=\"" + num(xy[i].second - 16) +
             "\" font-size=\"11\">" + escape(stations[i].id) + "</text>\n";
    }
    s += gradient_legend(c, "pm25", kGreen, kYellow, kRed, "0", num(max), "PM2.5 (ug/m3)");
    s += "</svg>\n";
    return s;
}

std::vector<Flux> diffusion_fluxes(const Tensor& weights, const std::vector<double>& values, std::size_t source,
                                   double k) {
    const std::size_t n = values.size();
    if (weights.rank() != 2 || weights.rows() != n || weights.cols() != n) {
        throw DimensionError("diffusion fluxes: weights must be N x N for N values");
    }
    if (source >= n) throw ReferenceError("diffusion fluxes: source index out of range");
    std::vector<Flux> out;
    for (std::size_t j = 0; j < n; ++j) {
        if (j == source || !(weights(source, j) > 0.0)) continue;
        out.push_back({j, k * weights(source, j) * (values[source] - values[j])});
    }
    return out;
}

std::string diffusion_lines_svg(const geo::SensorGraph& graph, const std::vector<double>& values,
                                const std::string& source_id, double k, const Canvas& c) {
    const std::size_t src = graph.index_of(source_id);
    const auto fluxes = diffusion_fluxes(graph.weights(), values, src, k);
    double m = 0.0;
    for (const auto& f : fluxes) m = std::max(m, std::abs(f.value));
    const auto xy = project(graph.stations(), c);
    std::string s = header(c);
    for (const auto& f : fluxes) {
        s += "<line class=\"flux\" x1=\"" + num(xy[src].first) + "\" y1=\"" + num(xy[src].second) + "\" x2=\"" +
             num(xy[f.to].first) + "\" y2=\"" + num(xy[f.to].second) + "\" stroke=\"" + hex(flux_color(f.value, m)) +
             "\" stroke-width=\"4\"><title>" + escape(graph.stations()[f.to].id) + ": " + num(f.value) +
             "</title></line>\n";
    }
    for (std::size_t i = 0; i < graph.size(); ++i) {
        s += "<circle class=\"station\" cx=\"" + num(xy[i].first) + "\" cy=\"" + num(xy[i].second) + "\" r=\"" +
             (i == src ? "9.00" : "6.00") + "\" fill=\"" + (i == src ? "#000000" : "#777777") + "\"/>\n";
        s += "<text class=\"label\" x=\"" + num(xy[i].first + 10) + "\" y=\"" + num(xy[i].second - 10) +
             "\" font-size=\"11\">" + escape(graph.stations()[i].id) + "</text>\n";
    }
    s += gradient_legend(c, "flux", kBlue, kWhite, kRed, num(-m), num(m), "diffusive flux from " + source_id);
    s += "</svg>\n";
    return s;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    out.flush();
    if (!out) throw IoError("failed writing " + path);
}

}  // namespace aqc::eval
