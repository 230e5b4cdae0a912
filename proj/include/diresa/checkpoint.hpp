#pragma once

#include <memory>
#include <string>

#include "json.hpp"

#include "diresa/method.hpp"
#include "diresa/train.hpp"

namespace diresa {

/// Writes a trained autoencoder: length-prefixed JSON header followed by the
/// raw little-endian float64 state blob in declared layer order (including
/// batch-norm running statistics). `extra` is merged into the header.
void save_nn_checkpoint(const ModelParams& model, const nlohmann::json& extra,
                        const std::string& path);

/// Same container for the PCA baseline, tagged variant "PCA"; the blob holds
/// mean, components (row-major), and all eigenvalues.
void save_pca_checkpoint(const PcaModel& model, const nlohmann::json& extra,
                         const std::string& path);

struct LoadedCheckpoint {
    std::unique_ptr<DrMethod> method;
    nlohmann::json header;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

/// Compact JSON view of a training history for checkpoint headers.
nlohmann::json history_to_json(const TrainHistory& history);

/// JSON round trip for model specs (used by checkpoints and run configs).
nlohmann::json spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);

} // namespace diresa
