#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "diresa/kpi.hpp"
#include "diresa/lorenz.hpp"
#include "diresa/models.hpp"
#include "diresa/train.hpp"

namespace diresa {

/// Where a run's data comes from: exactly one of a generator preset, a binary
/// dataset file, or a CSV file.
struct DatasetConfig {
    std::optional<LorenzParams> generator;
    std::string path; // binary dataset written by this toolkit
    std::string csv;  // plain CSV, one row per sample
};

/// KPI knobs plus the scatter-export anchor count.
struct EvaluationConfig {
    std::size_t location_param = 50;
    std::size_t sample_count = 0; // 0 = every test row is an anchor
    double log_offset = 1.0;
    std::size_t scatter_anchors = 200;
};

/// One benchmark row: a display name plus the model that produces it. PCA
/// entries carry only the latent dimension of their spec.
struct MethodConfig {
    std::string name;
    bool is_pca = false;
    ModelSpec spec;
};

/// Declarative description of a full run, parsed from a JSON config file.
/// Unknown keys anywhere in the document are rejected with their exact path.
struct RunConfig {
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    std::optional<std::size_t> threads; // unset = flag / environment decides

    DatasetConfig dataset;

    std::optional<MethodConfig> model; // single-model commands (train, analyze)

    TrainConfig training;                          // shared by every trained method
    std::optional<std::size_t> batch_size_config;  // explicit override, else variant preset
    std::optional<bool> drop_partial_config;

    EvaluationConfig evaluation;

    std::vector<MethodConfig> methods; // bench row set

    /// Training config for one variant: variant batch preset unless the file
    /// pinned batch_size / drop_partial_batch explicitly.
    TrainConfig training_for(Variant variant) const;
};

RunConfig parse_run_config(const nlohmann::json& root);
RunConfig load_run_config(const std::string& path);

/// Canonical checksum of a config (key-sorted JSON dump).
std::string config_checksum(const nlohmann::json& root);

/// Default display name for a method spec: the variant name, with the
/// distance-loss suffix for DIRESA (e.g. "DIRESA_MSE").
std::string default_method_name(const ModelSpec& spec);

/// One pipeline stage in the run manifest: its derived seed and the
/// checksummed files it read and wrote.
struct StageRecord {
    std::string name;
    std::optional<std::uint64_t> seed;
    std::vector<std::pair<std::string, std::string>> inputs;  // path, checksum
    std::vector<std::pair<std::string, std::string>> outputs; // path, checksum
    double seconds = 0.0;
};

/// Reproducibility record for a run: config hash, toolkit version, and every
/// emitted file with its checksum.
struct RunManifest {
    std::string config_checksum;
    std::string toolkit_version;
    std::uint64_t seed = 0;
    std::vector<StageRecord> stages;

    StageRecord& add_stage(const std::string& name);
};

/// Records `path` (with its on-disk checksum) as a stage input or output.
void record_input(StageRecord& stage, const std::string& path);
void record_output(StageRecord& stage, const std::string& path);

nlohmann::json manifest_to_json(const RunManifest& manifest);
void write_manifest(const RunManifest& manifest, const std::string& path);

extern const char* const kToolkitVersion;

} // namespace diresa
