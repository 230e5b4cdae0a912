#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "diresa/config.hpp"

namespace diresa {

/// Resolved execution context shared by every subcommand: the parsed config
/// with flag overrides applied, its canonical checksum, and the output
/// directory (created on demand).
struct RunContext {
    RunConfig config;
    std::string config_hash;
    std::string out_dir;
    std::size_t threads = 1;
};

/// Applies --out / --seed / --threads overrides onto the raw config document,
/// parses it, and resolves the thread count (flag, then config, then the
/// DIRESA_THREADS environment variable, then 1).
RunContext make_context(nlohmann::json config_json, const std::optional<std::string>& out_override,
                        const std::optional<std::uint64_t>& seed_override,
                        const std::optional<std::size_t>& threads_override);

/// Writes the configured generator's dataset plus a manifest.
void cmd_generate(RunContext& ctx);

/// Trains the configured model (or fits PCA directly) and writes the selected
/// checkpoint, the training history CSV, and a manifest. A run where every
/// restart diverges still writes the partial history before rethrowing.
void cmd_train(RunContext& ctx);

/// Evaluates the KPI suite for each checkpoint (the literal name "identity"
/// adds the debug embedding) over the dataset's test split; writes the KPI
/// table, the pairwise Welch p-value table, and a manifest.
void cmd_evaluate(RunContext& ctx, const std::vector<std::string>& checkpoints);

/// Latent-space analysis of one checkpoint: component ordering report and the
/// nearest-distances scatter export.
void cmd_analyze(RunContext& ctx, const std::string& checkpoint_path);

/// Full benchmark: generate (or load) the dataset, train every configured
/// method, evaluate, analyze, and render the summary tables. Per-method
/// failures are isolated and reported as missing rows.
void cmd_bench(RunContext& ctx);

} // namespace diresa
