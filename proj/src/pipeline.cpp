#include "diresa/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string_view>
#include <utility>

#include "diresa/binio.hpp"
#include "diresa/checkpoint.hpp"
#include "diresa/dataset.hpp"
#include "diresa/errors.hpp"
#include "diresa/kpi.hpp"
#include "diresa/latent.hpp"
#include "diresa/losses.hpp"
#include "diresa/pca.hpp"
#include "diresa/rng.hpp"

namespace diresa {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Method names double as file stems; anything outside [A-Za-z0-9_-] is
/// replaced so names never escape the output directory.
std::string file_stem(const std::string& name) {
    std::string out = name;
    for (char& c : out) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '_' || c == '-';
        if (!ok) c = '_';
    }
    return out;
}

std::string join_path(const std::string& dir, const std::string& file) {
    return (fs::path(dir) / file).string();
}

void ensure_out_dir(const RunContext& ctx) {
    std::error_code ec;
    fs::create_directories(ctx.out_dir, ec);
    if (ec) {
        throw IoError("cannot create output directory " + ctx.out_dir + ": " + ec.message());
    }
}

RunManifest new_manifest(const RunContext& ctx) {
    RunManifest manifest;
    manifest.config_checksum = ctx.config_hash;
    manifest.toolkit_version = kToolkitVersion;
    manifest.seed = ctx.config.seed;
    return manifest;
}

void finish_manifest(const RunContext& ctx, const RunManifest& manifest) {
    write_manifest(manifest, join_path(ctx.out_dir, "manifest.json"));
}

/// Loads or generates the run's dataset; file sources are checksummed into
/// the stage record.
Dataset obtain_dataset(const RunContext& ctx, StageRecord& stage) {
    const DatasetConfig& ds = ctx.config.dataset;
    if (ds.generator) return generate_dataset(*ds.generator);
    if (!ds.path.empty()) {
        record_input(stage, ds.path);
        return load_dataset(ds.path);
    }
    record_input(stage, ds.csv);
    return load_csv(ds.csv);
}

struct TrainedArtifacts {
    std::string checkpoint_path;
    std::string history_path; // empty for PCA (no epochs to log)
};

/// Trains (or, for PCA, fits) one configured method; writes its checkpoint
/// and history and records them in `stage`. A fully diverged run still
/// leaves the partial history CSV behind before the error propagates.
TrainedArtifacts train_method(const RunContext& ctx, const Dataset& dataset,
                              const MethodConfig& method, StageRecord& stage) {
    TrainedArtifacts art;
    const std::string stem = file_stem(method.name);
    art.checkpoint_path = join_path(ctx.out_dir, stem + ".ckpt");

    nlohmann::json extra;
    extra["name"] = method.name;
    extra["dataset_provenance"] = dataset.provenance;

    if (method.is_pca) {
        const PcaModel model = fit_pca(dataset.split_rows(Split::train), method.spec.latent_dim);
        save_pca_checkpoint(model, extra, art.checkpoint_path);
        record_output(stage, art.checkpoint_path);
        return art;
    }

    ModelSpec spec = method.spec;
    spec.input_dim = dataset.data.cols();
    spec.validate();

    TrainConfig tcfg = ctx.config.training_for(spec.variant);
    tcfg.seed = derive_seed(ctx.config.seed, std::string("train-") + method.name);
    tcfg.threads = ctx.threads;
    stage.seed = tcfg.seed;

    art.history_path = join_path(ctx.out_dir, stem + "_history.csv");
    RestartsResult result;
    try {
        result = train_restarts(spec, dataset, tcfg);
    } catch (const TrainDivergence& e) {
        write_history_csv(e.history, art.history_path);
        record_output(stage, art.history_path);
        throw;
    }

    write_history_csv(result.best.history, art.history_path);

    extra["train_seed"] = tcfg.seed;
    extra["best_restart"] = {{"index", result.best_index},
                             {"seed", result.best.seed},
                             {"final_val_loss", result.best.final_val_loss}};
    nlohmann::json restarts = nlohmann::json::array();
    for (const RestartSummary& r : result.restarts) {
        nlohmann::json entry;
        entry["seed"] = r.seed;
        entry["diverged"] = r.diverged;
        if (!r.diverged) entry["final_val_loss"] = r.final_val_loss;
        restarts.push_back(std::move(entry));
    }
    extra["restarts"] = std::move(restarts);
    extra["history"] = history_to_json(result.best.history);
    save_nn_checkpoint(result.best.model, extra, art.checkpoint_path);

    record_output(stage, art.checkpoint_path);
    record_output(stage, art.history_path);
    return art;
}

/// Unweighted test-split loss components for the summary's loss table.
LossComponents method_test_losses(const DrMethod& method, const Dataset& dataset,
                                  std::uint64_t pairs_seed) {
    const LossWeights weights{1.0, 1.0, 1.0, 1.0};
    if (const auto* nn = dynamic_cast<const NnMethod*>(&method)) {
        ModelParams model = nn->model(); // eval_batch takes a mutable model
        if (model.spec.uses_distance_loss()) {
            PairedDataset pairs = make_shuffled_pairs(dataset, Split::test, pairs_seed);
            return eval_batch(model, pairs.primary, &pairs.shuffled, weights, nullptr,
                              PassMode::infer, nullptr)
                .comps;
        }
        const Matrix test = dataset.split_rows(Split::test);
        return eval_batch(model, test, nullptr, weights, nullptr, PassMode::infer, nullptr).comps;
    }
    const Matrix test = dataset.split_rows(Split::test);
    LossComponents comps;
    comps.recon = loss_recon(test, method.decode(method.encode(test)));
    comps.total = *comps.recon;
    return comps;
}

/// (original, latent) distance pairs of the l latent-nearest neighbors for
/// each anchor, in anchor order; the Fig.-style scatter payload.
void write_nearest_scatter(const Matrix& data, const Matrix& latent, std::size_t anchor_count,
                           std::size_t location_param, std::uint64_t seed,
                           const std::string& path) {
    const std::size_t n = data.rows();
    std::vector<double> sel_orig;
    std::vector<double> sel_lat;
    if (n >= 2) {
        const std::size_t l = std::min(location_param, n - 1);
        const std::vector<std::size_t> anchors = pick_anchors(n, anchor_count, seed);
        sel_orig.reserve(anchors.size() * l);
        sel_lat.reserve(anchors.size() * l);
        std::vector<double> d_orig;
        std::vector<double> d_lat;
        std::vector<std::size_t> idx;
        for (const std::size_t anchor : anchors) {
            anchor_distances(data, latent, anchor, d_orig, d_lat);
            idx.resize(d_lat.size());
            std::iota(idx.begin(), idx.end(), 0);
            std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(l),
                              idx.end(), [&](std::size_t a, std::size_t b) {
                                  if (d_lat[a] != d_lat[b]) return d_lat[a] < d_lat[b];
                                  return a < b;
                              });
            for (std::size_t k = 0; k < l; ++k) {
                sel_orig.push_back(d_orig[idx[k]]);
                sel_lat.push_back(d_lat[idx[k]]);
            }
        }
    }
    export_scatter(sel_orig, sel_lat, path);
}

std::string fmt_sig(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string fmt_fixed(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

} // namespace

RunContext make_context(nlohmann::json config_json, const std::optional<std::string>& out_override,
                        const std::optional<std::uint64_t>& seed_override,
                        const std::optional<std::size_t>& threads_override) {
    if (out_override) config_json["output_dir"] = *out_override;
    if (seed_override) config_json["seed"] = *seed_override;
    if (threads_override) config_json["threads"] = *threads_override;

    RunContext ctx;
    ctx.config = parse_run_config(config_json);
    ctx.config_hash = config_checksum(config_json);
    ctx.out_dir = ctx.config.output_dir;

    if (ctx.config.threads) {
        ctx.threads = *ctx.config.threads;
    } else if (const char* env = std::getenv("DIRESA_THREADS")) {
        std::size_t value = 0;
        const char* end = env + std::string_view(env).size();
        const auto [ptr, ec] = std::from_chars(env, end, value);
        if (ec != std::errc() || ptr != end || value == 0) {
            throw ConfigError("DIRESA_THREADS must be a positive integer");
        }
        ctx.threads = value;
    } else {
        ctx.threads = 1;
    }
    if (ctx.threads == 0) throw ConfigError("thread count must be positive");
    return ctx;
}

void cmd_generate(RunContext& ctx) {
    if (!ctx.config.dataset.generator) {
        throw ConfigError("generate needs a dataset.generator section");
    }
    ensure_out_dir(ctx);
    RunManifest manifest = new_manifest(ctx);

    const auto t0 = Clock::now();
    StageRecord& stage = manifest.add_stage("generate");
    const Dataset dataset = generate_dataset(*ctx.config.dataset.generator);
    const std::string path = join_path(ctx.out_dir, "dataset.drsa");
    save_dataset(dataset, path);
    record_output(stage, path);
    stage.seconds = seconds_since(t0);

    finish_manifest(ctx, manifest);
}

void cmd_train(RunContext& ctx) {
    if (!ctx.config.model) throw ConfigError("train needs a model section");
    ensure_out_dir(ctx);
    RunManifest manifest = new_manifest(ctx);

    auto t0 = Clock::now();
    StageRecord& dstage = manifest.add_stage("dataset");
    const Dataset dataset = obtain_dataset(ctx, dstage);
    dstage.seconds = seconds_since(t0);

    t0 = Clock::now();
    StageRecord& tstage = manifest.add_stage("train-" + ctx.config.model->name);
    try {
        train_method(ctx, dataset, *ctx.config.model, tstage);
    } catch (...) {
        tstage.seconds = seconds_since(t0);
        finish_manifest(ctx, manifest); // keep the partial-history record
        throw;
    }
    tstage.seconds = seconds_since(t0);

    finish_manifest(ctx, manifest);
}

void cmd_evaluate(RunContext& ctx, const std::vector<std::string>& checkpoints) {
    if (checkpoints.empty()) {
        throw ConfigError("evaluate needs at least one checkpoint (or \"identity\")");
    }
    ensure_out_dir(ctx);
    RunManifest manifest = new_manifest(ctx);

    auto t0 = Clock::now();
    StageRecord& dstage = manifest.add_stage("dataset");
    const Dataset dataset = obtain_dataset(ctx, dstage);
    dstage.seconds = seconds_since(t0);

    t0 = Clock::now();
    StageRecord& estage = manifest.add_stage("evaluate");
    const Matrix test = dataset.split_rows(Split::test);

    struct Entry {
        std::string name;
        std::unique_ptr<DrMethod> method;
    };
    std::vector<Entry> entries;
    for (const std::string& arg : checkpoints) {
        Entry entry;
        if (arg == "identity") {
            entry.name = "identity";
            entry.method = std::make_unique<IdentityMethod>(test.cols());
        } else {
            record_input(estage, arg);
            LoadedCheckpoint loaded = load_checkpoint(arg);
            entry.name = loaded.header.value("name", loaded.method->kind());
            entry.method = std::move(loaded.method);
        }
        for (const Entry& other : entries) {
            if (other.name == entry.name) {
                throw ConfigError("evaluate method name \"" + entry.name +
                                  "\" appears more than once");
            }
        }
        entries.push_back(std::move(entry));
    }

    std::optional<std::size_t> latent_dim;
    for (const Entry& entry : entries) {
        if (entry.method->input_dim() != test.cols()) {
            throw ConfigError("method \"" + entry.name + "\" expects " +
                              std::to_string(entry.method->input_dim()) +
                              " inputs but the dataset has " + std::to_string(test.cols()) +
                              " columns");
        }
        if (entry.name == "identity") continue; // debug embedding, any width
        if (latent_dim && *latent_dim != entry.method->latent_dim()) {
            throw ConfigError("latent dimensions disagree across methods: " +
                              std::to_string(*latent_dim) + " vs " +
                              std::to_string(entry.method->latent_dim()) + " (\"" + entry.name +
                              "\")");
        }
        latent_dim = entry.method->latent_dim();
    }

    KpiConfig kpi;
    kpi.location_param = ctx.config.evaluation.location_param;
    kpi.sample_count = ctx.config.evaluation.sample_count;
    kpi.log_offset = ctx.config.evaluation.log_offset;
    kpi.rng_seed = derive_seed(ctx.config.seed, "kpi-anchors");
    estage.seed = kpi.rng_seed;

    std::vector<std::pair<std::string, KpiReport>> reports;
    reports.reserve(entries.size());
    for (const Entry& entry : entries) {
        const Matrix latent = entry.method->encode(test);
        reports.emplace_back(entry.name, evaluate_embedding(test, latent, kpi));
    }

    const std::string kpi_path = join_path(ctx.out_dir, "kpi.csv");
    const std::string pvalue_path = join_path(ctx.out_dir, "pvalues.csv");
    write_kpi_csv(reports, kpi_path);
    write_pvalues_csv(reports, pvalue_path);
    record_output(estage, kpi_path);
    record_output(estage, pvalue_path);
    estage.seconds = seconds_since(t0);

    finish_manifest(ctx, manifest);
}

void cmd_analyze(RunContext& ctx, const std::string& checkpoint_path) {
    ensure_out_dir(ctx);
    RunManifest manifest = new_manifest(ctx);

    auto t0 = Clock::now();
    StageRecord& dstage = manifest.add_stage("dataset");
    const Dataset dataset = obtain_dataset(ctx, dstage);
    dstage.seconds = seconds_since(t0);

    t0 = Clock::now();
    LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);
    const std::string name = loaded.header.value("name", loaded.method->kind());
    StageRecord& astage = manifest.add_stage("analyze-" + name);
    record_input(astage, checkpoint_path);

    const Matrix test = dataset.split_rows(Split::test);
    if (loaded.method->input_dim() != test.cols()) {
        throw ConfigError("checkpoint \"" + name + "\" expects " +
                          std::to_string(loaded.method->input_dim()) +
                          " inputs but the dataset has " + std::to_string(test.cols()) +
                          " columns");
    }

    const ComponentOrdering ordering = order_components(*loaded.method, test);
    const std::string stem = file_stem(name);
    const std::string component_path = join_path(ctx.out_dir, stem + "_components.csv");
    write_component_csv(ordering, component_path);
    record_output(astage, component_path);

    const std::uint64_t scatter_seed = derive_seed(ctx.config.seed, "scatter-anchors");
    astage.seed = scatter_seed;
    const std::string scatter_path = join_path(ctx.out_dir, stem + "_scatter.csv");
    write_nearest_scatter(test, loaded.method->encode(test), ctx.config.evaluation.scatter_anchors,
                          ctx.config.evaluation.location_param, scatter_seed, scatter_path);
    record_output(astage, scatter_path);
    astage.seconds = seconds_since(t0);

    finish_manifest(ctx, manifest);
}

namespace {

struct BenchRow {
    MethodConfig cfg;
    std::unique_ptr<DrMethod> method; // null once a stage fails
    std::string checkpoint_file;      // basename, for the provenance footnotes
    std::string checkpoint_hash;
    std::optional<LossComponents> losses;
    std::optional<std::size_t> report_idx;
    std::string failure;
};

std::string render_summary(const RunContext& ctx, const Dataset& dataset,
                           const std::vector<BenchRow>& rows,
                           const std::vector<std::pair<std::string, KpiReport>>& reports,
                           const std::optional<CanberraBaseline>& baseline,
                           std::size_t location_param) {
    std::ostringstream out;
    const std::string l_tag = std::to_string(location_param);

    out << "Dimensionality-reduction benchmark summary\n";
    out << "===========================================\n";
    out << "toolkit version: " << kToolkitVersion << "\n";
    out << "config checksum: " << ctx.config_hash << "\n";
    out << "global seed: " << ctx.config.seed << "\n";
    out << "dataset: " << dataset.provenance << "\n";
    out << "rows: " << dataset.data.rows() << " (train " << dataset.train.size()
        << ", validation " << dataset.validation.size() << ", test " << dataset.test.size()
        << ")\n\n";

    const std::size_t name_w = 16;
    const std::size_t cell_w = 11;
    auto cell = [&](const std::string& s) { return pad(s, cell_w); };

    out << "Losses (test split)\n";
    out << "-------------------\n";
    out << pad("method", name_w) << cell("recon_mse") << cell("cov_loss") << cell("dist_loss")
        << cell("kl_loss") << "ref\n";
    std::size_t footnote = 0;
    std::vector<std::string> footnotes;
    for (const BenchRow& row : rows) {
        out << pad(row.cfg.name, name_w);
        if (row.losses) {
            const LossComponents& c = *row.losses;
            out << cell(c.recon ? fmt_sig(*c.recon) : "-")
                << cell(c.cov ? fmt_sig(*c.cov) : "-") << cell(c.dist ? fmt_sig(*c.dist) : "-")
                << cell(c.kl ? fmt_sig(*c.kl) : "-");
        } else {
            out << cell("-") << cell("-") << cell("-") << cell("-");
        }
        if (!row.checkpoint_hash.empty()) {
            ++footnote;
            out << "[" << footnote << "]";
            footnotes.push_back("[" + std::to_string(footnote) + "] " + row.cfg.name + ": " +
                                row.checkpoint_file + " fnv1a64 " + row.checkpoint_hash);
        } else {
            out << "-";
        }
        out << "\n";
    }
    out << "\n";

    auto kpi_table = [&](const char* title, auto stat_of) {
        out << title << "\n" << std::string(std::string_view(title).size(), '-') << "\n";
        out << pad("method", name_w) << cell("Corr") << cell("LogCorr") << cell("Can" + l_tag)
            << cell("Pear" + l_tag) << cell("Spear" + l_tag) << cell("Ken" + l_tag) << "\n";
        for (const BenchRow& row : rows) {
            out << pad(row.cfg.name, name_w);
            if (row.report_idx) {
                const KpiReport& r = reports[*row.report_idx].second;
                out << cell(fmt_fixed(stat_of(r.corr))) << cell(fmt_fixed(stat_of(r.logcorr)))
                    << cell(fmt_fixed(stat_of(r.can_l))) << cell(fmt_fixed(stat_of(r.pear_l)))
                    << cell(fmt_fixed(stat_of(r.spear_l))) << cell(fmt_fixed(stat_of(r.ken_l)));
            } else {
                for (int i = 0; i < 6; ++i) out << cell("-");
            }
            out << "\n";
        }
        out << "\n";
    };

    kpi_table("Mean distance-ordering preservation (test split)",
              [](const KpiStats& s) { return s.mean; });
    kpi_table("Median distance-ordering preservation (test split)",
              [](const KpiStats& s) { return s.median; });

    out << "Standard error of the mean\n";
    out << "--------------------------\n";
    out << pad("method", name_w) << cell("Corr") << cell("LogCorr") << cell("Can" + l_tag)
        << cell("Pear" + l_tag) << cell("Spear" + l_tag) << cell("Ken" + l_tag) << "\n";
    for (const BenchRow& row : rows) {
        out << pad(row.cfg.name, name_w);
        if (row.report_idx) {
            const KpiReport& r = reports[*row.report_idx].second;
            out << cell(fmt_sig(r.corr.stderr_of_mean)) << cell(fmt_sig(r.logcorr.stderr_of_mean))
                << cell(fmt_sig(r.can_l.stderr_of_mean)) << cell(fmt_sig(r.pear_l.stderr_of_mean))
                << cell(fmt_sig(r.spear_l.stderr_of_mean))
                << cell(fmt_sig(r.ken_l.stderr_of_mean));
        } else {
            for (int i = 0; i < 6; ++i) out << cell("-");
        }
        out << "\n";
    }
    out << "\n";

    out << "Pairwise Welch p-values on the per-anchor Corr samples: pvalues.csv\n\n";

    if (baseline) {
        out << "Random-rank Canberra baseline (location parameter " << l_tag << "): mean "
            << fmt_sig(baseline->mean) << ", stderr " << fmt_sig(baseline->stderr_of_mean)
            << " over " << baseline->trials << " trials.\n";
        out << "Note: under this report's normalization (per-anchor Canberra rank sum over the "
            << l_tag << " latent-nearest neighbors, divided by " << l_tag
            << ", reference ranks capped at " << location_param + 1
            << "), independent random rank lists score about " << fmt_fixed(baseline->mean)
            << ". Reference values of about 1.42 quoted for random lists elsewhere use a "
            << "different normalization constant (about "
            << fmt_fixed(1.42 / std::max(baseline->mean, 1e-12))
            << "x this one); all Can" << l_tag
            << " figures above are internally consistent under the normalization stated here.\n\n";
    }

    out << "Method failures\n";
    out << "---------------\n";
    bool any_failure = false;
    for (const BenchRow& row : rows) {
        if (!row.failure.empty()) {
            any_failure = true;
            out << row.cfg.name << ": " << row.failure << "\n";
        }
    }
    if (!any_failure) out << "none\n";
    out << "\n";

    out << "Checkpoint provenance\n";
    out << "---------------------\n";
    for (const std::string& note : footnotes) out << note << "\n";
    if (footnotes.empty()) out << "none\n";
    return out.str();
}

} // namespace

void cmd_bench(RunContext& ctx) {
    if (ctx.config.methods.empty()) throw ConfigError("bench needs a non-empty methods list");
    ensure_out_dir(ctx);
    RunManifest manifest = new_manifest(ctx);

    auto t0 = Clock::now();
    StageRecord& gstage = manifest.add_stage("generate");
    const Dataset dataset = obtain_dataset(ctx, gstage);
    if (ctx.config.dataset.generator) {
        const std::string path = join_path(ctx.out_dir, "dataset.drsa");
        save_dataset(dataset, path);
        record_output(gstage, path);
    }
    gstage.seconds = seconds_since(t0);

    std::vector<BenchRow> rows;
    rows.reserve(ctx.config.methods.size());
    for (const MethodConfig& method : ctx.config.methods) {
        t0 = Clock::now();
        StageRecord& stage = manifest.add_stage("train-" + method.name);
        BenchRow row;
        row.cfg = method;
        try {
            const TrainedArtifacts art = train_method(ctx, dataset, method, stage);
            row.checkpoint_file = fs::path(art.checkpoint_path).filename().string();
            row.checkpoint_hash = file_checksum_hex(art.checkpoint_path);
            LoadedCheckpoint loaded = load_checkpoint(art.checkpoint_path);
            row.method = std::move(loaded.method);
        } catch (const std::exception& e) {
            row.failure = e.what();
            row.method.reset();
        }
        stage.seconds = seconds_since(t0);
        rows.push_back(std::move(row));
    }

    std::optional<std::size_t> latent_dim;
    for (const BenchRow& row : rows) {
        if (!row.method) continue;
        if (latent_dim && *latent_dim != row.method->latent_dim()) {
            throw ConfigError("bench methods disagree on the latent dimension: " +
                              std::to_string(*latent_dim) + " vs " +
                              std::to_string(row.method->latent_dim()) + " (\"" + row.cfg.name +
                              "\")");
        }
        latent_dim = row.method->latent_dim();
    }

    t0 = Clock::now();
    StageRecord& estage = manifest.add_stage("evaluate");
    const Matrix test = dataset.split_rows(Split::test);

    KpiConfig kpi;
    kpi.location_param = ctx.config.evaluation.location_param;
    kpi.sample_count = ctx.config.evaluation.sample_count;
    kpi.log_offset = ctx.config.evaluation.log_offset;
    kpi.rng_seed = derive_seed(ctx.config.seed, "kpi-anchors");
    estage.seed = kpi.rng_seed;
    const std::uint64_t pairs_seed = derive_seed(ctx.config.seed, "pairs-test");

    std::vector<std::pair<std::string, KpiReport>> reports;
    for (BenchRow& row : rows) {
        if (!row.method) continue;
        try {
            const Matrix latent = row.method->encode(test);
            reports.emplace_back(row.cfg.name, evaluate_embedding(test, latent, kpi));
            row.report_idx = reports.size() - 1;
            row.losses = method_test_losses(*row.method, dataset, pairs_seed);
        } catch (const std::exception& e) {
            row.failure = e.what();
            row.method.reset();
        }
    }
    const std::string kpi_path = join_path(ctx.out_dir, "kpi.csv");
    const std::string pvalue_path = join_path(ctx.out_dir, "pvalues.csv");
    write_kpi_csv(reports, kpi_path);
    write_pvalues_csv(reports, pvalue_path);
    record_output(estage, kpi_path);
    record_output(estage, pvalue_path);
    estage.seconds = seconds_since(t0);

    t0 = Clock::now();
    StageRecord& astage = manifest.add_stage("analyze");
    const std::uint64_t scatter_seed = derive_seed(ctx.config.seed, "scatter-anchors");
    astage.seed = scatter_seed;
    for (BenchRow& row : rows) {
        if (!row.method) continue;
        try {
            const std::string stem = file_stem(row.cfg.name);
            const std::string component_path =
                join_path(ctx.out_dir, stem + "_components.csv");
            write_component_csv(order_components(*row.method, test), component_path);
            record_output(astage, component_path);
            const std::string scatter_path = join_path(ctx.out_dir, stem + "_scatter.csv");
            write_nearest_scatter(test, row.method->encode(test),
                                  ctx.config.evaluation.scatter_anchors,
                                  ctx.config.evaluation.location_param, scatter_seed,
                                  scatter_path);
            record_output(astage, scatter_path);
        } catch (const std::exception& e) {
            row.failure = e.what();
        }
    }
    astage.seconds = seconds_since(t0);

    t0 = Clock::now();
    StageRecord& sstage = manifest.add_stage("summary");
    std::optional<CanberraBaseline> baseline;
    if (test.rows() >= 2) {
        const std::size_t universe = test.rows() - 1;
        const std::size_t l = std::min(ctx.config.evaluation.location_param, universe);
        if (l >= 1) {
            baseline = canberra_random_baseline(
                l, universe, 20000, derive_seed(ctx.config.seed, "canberra-baseline"));
        }
    }
    const std::string summary = render_summary(ctx, dataset, rows, reports, baseline,
                                               ctx.config.evaluation.location_param);
    const std::string summary_path = join_path(ctx.out_dir, "summary.txt");
    write_file_atomic(summary_path, summary);
    record_output(sstage, summary_path);
    sstage.seconds = seconds_since(t0);

    finish_manifest(ctx, manifest);
}

} // namespace diresa
