#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "diresa/errors.hpp"
#include "diresa/pipeline.hpp"
#include "diresa/train.hpp"

namespace {

nlohmann::json load_config_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw diresa::IoError("cannot open config file: " + path);
    std::ostringstream text;
    text << in.rdbuf();
    try {
        return nlohmann::json::parse(text.str());
    } catch (const nlohmann::json::exception& e) {
        throw diresa::ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
}

/// Flags shared by every subcommand; presence is tracked so flags only
/// override config values the user actually set.
struct CommonFlags {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    std::size_t threads = 0;
    CLI::Option* out_opt = nullptr;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* threads_opt = nullptr;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config, "JSON run configuration")->required();
        out_opt = cmd->add_option("--out", out, "output directory (overrides the config)");
        seed_opt = cmd->add_option("--seed", seed, "global seed (overrides the config)");
        threads_opt =
            cmd->add_option("--threads", threads, "worker threads (overrides the config)");
    }

    diresa::RunContext context() const {
        return diresa::make_context(
            load_config_json(config),
            out_opt->count() ? std::optional<std::string>(out) : std::nullopt,
            seed_opt->count() ? std::optional<std::uint64_t>(seed) : std::nullopt,
            threads_opt->count() ? std::optional<std::size_t>(threads) : std::nullopt);
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distance-regularized dimensionality-reduction toolkit"};
    app.require_subcommand(1);

    CommonFlags generate_flags;
    CLI::App* generate = app.add_subcommand("generate", "write the configured dataset");
    generate_flags.attach(generate);

    CommonFlags train_flags;
    CLI::App* train = app.add_subcommand("train", "train the configured model");
    train_flags.attach(train);

    CommonFlags evaluate_flags;
    std::vector<std::string> checkpoints;
    CLI::App* evaluate =
        app.add_subcommand("evaluate", "run the distance-preservation KPI suite");
    evaluate_flags.attach(evaluate);
    evaluate
        ->add_option("checkpoints", checkpoints,
                     "checkpoint files; the literal name \"identity\" adds the debug embedding")
        ->required();

    CommonFlags analyze_flags;
    std::string checkpoint;
    CLI::App* analyze = app.add_subcommand("analyze", "latent-component analysis of a checkpoint");
    analyze_flags.attach(analyze);
    analyze->add_option("checkpoint", checkpoint, "checkpoint file")->required();

    CommonFlags bench_flags;
    CLI::App* bench = app.add_subcommand("bench", "full benchmark: generate, train, evaluate, analyze");
    bench_flags.attach(bench);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2; // usage problems are config errors
    }

    try {
        if (generate->parsed()) {
            auto ctx = generate_flags.context();
            diresa::cmd_generate(ctx);
        } else if (train->parsed()) {
            auto ctx = train_flags.context();
            diresa::cmd_train(ctx);
        } else if (evaluate->parsed()) {
            auto ctx = evaluate_flags.context();
            diresa::cmd_evaluate(ctx, checkpoints);
        } else if (analyze->parsed()) {
            auto ctx = analyze_flags.context();
            diresa::cmd_analyze(ctx, checkpoint);
        } else if (bench->parsed()) {
            auto ctx = bench_flags.context();
            diresa::cmd_bench(ctx);
        }
        return 0;
    } catch (const diresa::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const diresa::DimensionError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const diresa::DivergenceError& e) {
        std::fprintf(stderr, "divergence: %s\n", e.what());
        return 3;
    } catch (const diresa::DegenerateError& e) {
        std::fprintf(stderr, "degenerate input: %s\n", e.what());
        return 3;
    } catch (const diresa::FormatError& e) {
        std::fprintf(stderr, "file format error: %s\n", e.what());
        return 4;
    } catch (const diresa::IoError& e) {
        std::fprintf(stderr, "I/O error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
