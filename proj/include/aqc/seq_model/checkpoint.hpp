#pragma once

#include <memory>
#include <optional>
#include <string>

#include "aqc/seq_model/model.hpp"

namespace aqc::model {

/// Name of the stored distance Laplacian; its shape fixes the node count.
inline constexpr const char* kLaplacianArray = "graph.laplacian";

/// Writes configuration, every Parameter, the distance Laplacian and the
/// normalization statistics. ConfigError if the model has no normalization.
void save_checkpoint(const std::string& path, const AirPhyNet& model);

/// Rebuilds a model from a checkpoint. With `expected_nodes` set, a graph of
/// another size raises ShapeError naming the Laplacian array. Any missing,
/// extra or misshaped array raises FormatError (ShapeError for shapes); no
/// partially loaded model is ever returned.
std::unique_ptr<AirPhyNet> load_checkpoint(const std::string& path,
                                           std::optional<std::size_t> expected_nodes = std::nullopt);

}  // namespace aqc::model
