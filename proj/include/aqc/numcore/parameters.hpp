#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "aqc/numcore/autodiff.hpp"

namespace aqc::num {

/// Owns a model's Parameters in registration order. Addresses stay stable for
/// the lifetime of the store, including across moves.
class ParameterStore {
public:
    /// Registers a new Parameter; names must be unique.
    Parameter& add(std::string name, Tensor value);

    Parameter* find(const std::string& name);
    const Parameter* find(const std::string& name) const;

    std::vector<Parameter*> all();
    std::vector<const Parameter*> all() const;
    std::size_t size() const { return params_.size(); }

    void zero_grad();

private:
    std::vector<std::unique_ptr<Parameter>> params_;
};

using Rng = std::mt19937_64;

/// Entries drawn uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)].
Tensor uniform_init(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng);

}  // namespace aqc::num
