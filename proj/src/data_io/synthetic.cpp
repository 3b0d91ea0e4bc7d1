#include "aqc/data_io/synthetic.hpp"

#include <random>

#include "aqc/errors.hpp"
#include "aqc/physics_de/reference.hpp"

namespace aqc::data {

Dataset synthetic_diffusion_dataset(const SyntheticSpec& spec) {
    if (spec.nodes < 2 || spec.steps == 0 || spec.min_episode == 0 || spec.max_episode < spec.min_episode ||
        !(spec.k > 0.0) || !(spec.noise >= 0.0) || !(spec.high > spec.low) || !(spec.low > 0.0)) {
        throw ConfigError("invalid synthetic dataset specification");
    }
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> offset(-0.25, 0.25), level(spec.low, spec.high);
    std::uniform_int_distribution<std::size_t> episode(spec.min_episode, spec.max_episode);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Dataset d;
    d.start_time = spec.start_time;
    for (std::size_t i = 0; i < spec.nodes; ++i) {
        d.stations.push_back({"S" + std::to_string(i + 1), 39.9 + offset(rng), 116.4 + offset(rng)});
    }
    const Tensor w = geo::SensorGraph::from_stations(d.stations).weights();

    const std::size_t n = spec.nodes;
    d.pm25 = Tensor::zeros(spec.steps, n);
    d.wind = Tensor(num::Shape{spec.steps, n, 2}, 0.0);
    Tensor x = Tensor::zeros(n, 1);
    Tensor wind = Tensor::zeros(n, 2);
    std::size_t left = 0;
    for (std::size_t s = 0; s < spec.steps; ++s) {
        if (left == 0) {
            for (std::size_t i = 0; i < n; ++i) x[i] = level(rng);
            for (double& v : wind.values()) v = 2.0 * gauss(rng);
            left = episode(rng);
        } else {
            x = physics::simulate_diffusion_reference(w, x, spec.k, 1.0);
        }
        --left;
        for (std::size_t i = 0; i < n; ++i) {
            d.pm25(s, i) = std::max(0.0, x[i] * (1.0 + spec.noise * gauss(rng)));
            d.wind[(s * n + i) * 2] = wind(i, 0);
            d.wind[(s * n + i) * 2 + 1] = wind(i, 1);
        }
    }
    d.validate();
    return d;
}

}  // namespace aqc::data
