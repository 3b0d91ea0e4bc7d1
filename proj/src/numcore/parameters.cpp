#include "aqc/numcore/parameters.hpp"

#include <cmath>

#include "aqc/errors.hpp"

namespace aqc::num {

Parameter& ParameterStore::add(std::string name, Tensor value) {
    if (find(name)) throw ContractError("duplicate parameter name " + name);
    params_.push_back(std::make_unique<Parameter>(std::move(name), std::move(value)));
    return *params_.back();
}

Parameter* ParameterStore::find(const std::string& name) {
    for (auto& p : params_)
        if (p->name() == name) return p.get();
    return nullptr;
}

const Parameter* ParameterStore::find(const std::string& name) const {
    for (const auto& p : params_)
        if (p->name() == name) return p.get();
    return nullptr;
}

std::vector<Parameter*> ParameterStore::all() {
    std::vector<Parameter*> out;
    for (auto& p : params_) out.push_back(p.get());
    return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
    std::vector<const Parameter*> out;
    for (const auto& p : params_) out.push_back(p.get());
    return out;
}

void ParameterStore::zero_grad() {
    for (auto& p : params_) p->zero_grad();
}

Tensor uniform_init(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Tensor t = Tensor::zeros(rows, cols);
    for (double& v : t.values()) v = u(rng);
    return t;
}

}  // namespace aqc::num
