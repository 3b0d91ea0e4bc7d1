#include "aqc/seq_model/checkpoint.hpp"

#include <set>

#include "aqc/container.hpp"
#include "aqc/errors.hpp"

namespace aqc::model {

namespace {

constexpr const char* kKind = "checkpoint";
constexpr const char* kNormArray = "normalization";
constexpr const char* kLambdaArray = "graph.lambda_max";

}  // namespace

void save_checkpoint(const std::string& path, const AirPhyNet& model) {
    if (!model.normalization()) throw ConfigError("cannot save a model without normalization statistics");
    io::Container c;
    c.kind = kKind;
    c.meta["config"] = to_json(model.config());
    const auto& lap = model.dynamics().distance_laplacian();
    c.arrays.push_back({kLaplacianArray, lap.matrix});
    c.arrays.push_back({kLambdaArray, Tensor::scalar(lap.lambda_max)});
    c.arrays.push_back({kNormArray, Tensor::vector({model.normalization()->mean, model.normalization()->std})});
    for (const auto* p : model.parameters().all()) c.arrays.push_back({p->name(), p->value()});
    io::write_container(path, c);
}

std::unique_ptr<AirPhyNet> load_checkpoint(const std::string& path, std::optional<std::size_t> expected_nodes) {
    const io::Container c = io::read_container(path, kKind);
    ModelConfig cfg;
    try {
        cfg = model_config_from_json(c.meta.at("config"));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": checkpoint has no model configuration: " + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(path + ": invalid model configuration: " + e.what());
    }

    const Tensor& lap = c.array(kLaplacianArray);
    if (lap.rank() != 2 || lap.rows() != lap.cols() || lap.rows() < 2) {
        throw ShapeError(path + ": array '" + kLaplacianArray + "' has shape " + num::to_string(lap.shape()));
    }
    if (expected_nodes && lap.rows() != *expected_nodes) {
        throw ShapeError(path + ": array '" + std::string(kLaplacianArray) + "' has shape " +
                         num::to_string(lap.shape()) + " but the graph has " + std::to_string(*expected_nodes) +
                         " nodes");
    }
    const Tensor& lambda = c.array(kLambdaArray);
    const Tensor& norm = c.array(kNormArray);
    if (lambda.size() != 1 || norm.size() != 2) throw ShapeError(path + ": malformed graph or normalization arrays");

    auto model = std::make_unique<AirPhyNet>(
        cfg, geo::ScaledLaplacian{lap, lambda.item(), geo::LaplacianSource::distance});
    try {
        model->set_normalization({norm[0], norm[1]});
    } catch (const ConfigError& e) {
        throw FormatError(path + ": " + e.what());
    }

    std::set<std::string> expected = {kLaplacianArray, kLambdaArray, kNormArray};
    for (auto* p : model->parameters().all()) {
        expected.insert(p->name());
        if (!c.has(p->name())) throw FormatError(path + ": missing array '" + p->name() + "'");
        const Tensor& v = c.array(p->name());
        if (v.shape() != p->value().shape()) {
            throw ShapeError(path + ": array '" + p->name() + "' has shape " + num::to_string(v.shape()) +
                             ", expected " + num::to_string(p->value().shape()));
        }
        p->value() = v;
    }
    for (const auto& a : c.arrays) {
        if (!expected.count(a.name)) throw FormatError(path + ": unexpected array '" + a.name + "'");
    }
    return model;
}

}  // namespace aqc::model
