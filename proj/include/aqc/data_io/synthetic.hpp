#pragma once

// Synthetic PM2.5 series driven by the reference diffusion dynamics.

#include <cstdint>

#include "aqc/data_io/dataset.hpp"

namespace aqc::data {

struct SyntheticSpec {
    std::size_t nodes = 6;
    std::size_t steps = 447;        // 3-hour steps
    double k = 2.0;                 // diffusion coefficient, km per step
    double noise = 0.01;            // relative observation noise
    std::size_t min_episode = 24;   // steps between state resets
    std::size_t max_episode = 48;
    double low = 20.0, high = 200.0;  // range of reset concentrations
    std::uint64_t seed = 1;
    std::int64_t start_time = 1398902400;  // 2014-05-01T00:00:00Z
};

/// Stations scattered around a city centre. The series is a chain of
/// episodes: each starts from uniform random concentrations and evolves by
/// exact graph diffusion over the inverse-distance network; observations
/// carry multiplicative Gaussian noise. Winds are random per episode.
Dataset synthetic_diffusion_dataset(const SyntheticSpec& spec);

}  // namespace aqc::data
