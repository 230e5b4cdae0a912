#include "diresa/checkpoint.hpp"

#include <span>
#include <variant>

#include "diresa/binio.hpp"
#include "diresa/errors.hpp"

namespace diresa {

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

/// Full serialized state of a stack, running statistics included.
void append_state(const LayerStack& stack, std::vector<double>& out) {
    for (const Layer& layer : stack.layers) {
        if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
            const auto& w = dense->weights.storage();
            out.insert(out.end(), w.begin(), w.end());
            out.insert(out.end(), dense->bias.begin(), dense->bias.end());
        } else {
            const auto& bn = std::get<BatchNormLayer>(layer);
            out.insert(out.end(), bn.gamma.begin(), bn.gamma.end());
            out.insert(out.end(), bn.beta.begin(), bn.beta.end());
            out.insert(out.end(), bn.running_mean.begin(), bn.running_mean.end());
            out.insert(out.end(), bn.running_var.begin(), bn.running_var.end());
        }
    }
}

std::size_t load_state(LayerStack& stack, std::span<const double> flat,
                       std::uint64_t error_offset) {
    std::size_t pos = 0;
    auto take = [&](double* dst, std::size_t count) {
        if (pos + count > flat.size()) {
            throw FormatError("checkpoint blob too short for the declared spec", error_offset);
        }
        for (std::size_t i = 0; i < count; ++i) dst[i] = flat[pos + i];
        pos += count;
    };
    for (Layer& layer : stack.layers) {
        if (auto* dense = std::get_if<DenseLayer>(&layer)) {
            take(dense->weights.storage().data(), dense->weights.size());
            take(dense->bias.data(), dense->bias.size());
        } else {
            auto& bn = std::get<BatchNormLayer>(layer);
            take(bn.gamma.data(), bn.gamma.size());
            take(bn.beta.data(), bn.beta.size());
            take(bn.running_mean.data(), bn.running_mean.size());
            take(bn.running_var.data(), bn.running_var.size());
        }
    }
    return pos;
}

std::vector<double> model_state(const ModelParams& model) {
    std::vector<double> state;
    append_state(model.encoder, state);
    append_state(model.vae_mean_head, state);
    append_state(model.vae_logvar_head, state);
    append_state(model.decoder, state);
    return state;
}

void write_container(const nlohmann::json& header, const std::vector<double>& blob,
                     const std::string& path) {
    const std::string header_text = header.dump();
    ByteWriter w;
    w.put_u64(header_text.size());
    w.put_str(header_text);
    for (double v : blob) w.put_f64(v);
    write_file_atomic(path, w.bytes);
}

} // namespace

nlohmann::json spec_to_json(const ModelSpec& spec) {
    nlohmann::json j;
    j["variant"] = variant_name(spec.variant);
    j["input_dim"] = spec.input_dim;
    j["hidden_widths"] = spec.hidden_widths;
    j["latent_dim"] = spec.latent_dim;
    if (spec.uses_distance_loss()) j["distance_loss"] = distance_kind_name(spec.distance_loss);
    return j;
}

ModelSpec spec_from_json(const nlohmann::json& j) {
    ModelSpec spec;
    try {
        spec.variant = variant_from_name(j.at("variant").get<std::string>());
        spec.input_dim = j.at("input_dim").get<std::size_t>();
        spec.hidden_widths = j.at("hidden_widths").get<std::vector<std::size_t>>();
        spec.latent_dim = j.at("latent_dim").get<std::size_t>();
        if (spec.uses_distance_loss()) {
            spec.distance_loss =
                distance_kind_from_name(j.at("distance_loss").get<std::string>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad model spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

nlohmann::json history_to_json(const TrainHistory& history) {
    nlohmann::json j;
    j["epochs"] = history.epochs.size();
    j["degenerate_dist_batches"] = history.degenerate_dist_batches;
    j["final_anneal_weight"] = history.final_anneal_weight;
    if (history.anneal_stopped_epoch) {
        j["anneal_stopped_epoch"] = *history.anneal_stopped_epoch;
    }
    nlohmann::json lr = nlohmann::json::array();
    nlohmann::json weight = nlohmann::json::array();
    for (const EpochRecord& r : history.epochs) {
        lr.push_back(r.lr);
        weight.push_back(r.anneal_weight);
    }
    j["lr_trace"] = std::move(lr);
    j["anneal_trace"] = std::move(weight);
    if (!history.epochs.empty()) {
        const LossComponents& last = history.epochs.back().val_loss;
        nlohmann::json final_val;
        final_val["total"] = last.total;
        if (last.recon) final_val["recon"] = *last.recon;
        if (last.cov) final_val["cov"] = *last.cov;
        if (last.dist) final_val["dist"] = *last.dist;
        if (last.kl) final_val["kl"] = *last.kl;
        j["final_val"] = std::move(final_val);
    }
    return j;
}

void save_nn_checkpoint(const ModelParams& model, const nlohmann::json& extra,
                        const std::string& path) {
    const std::vector<double> blob = model_state(model);
    nlohmann::json header = extra;
    header["format_version"] = kCheckpointVersion;
    header["variant"] = variant_name(model.spec.variant);
    header["spec"] = spec_to_json(model.spec);
    header["value_count"] = blob.size();
    write_container(header, blob, path);
}

void save_pca_checkpoint(const PcaModel& model, const nlohmann::json& extra,
                         const std::string& path) {
    std::vector<double> blob;
    blob.reserve(model.mean.size() + model.components.size() + model.eigenvalues.size());
    blob.insert(blob.end(), model.mean.begin(), model.mean.end());
    const auto& comp = model.components.storage();
    blob.insert(blob.end(), comp.begin(), comp.end());
    blob.insert(blob.end(), model.eigenvalues.begin(), model.eigenvalues.end());

    nlohmann::json header = extra;
    header["format_version"] = kCheckpointVersion;
    header["variant"] = "PCA";
    header["input_dim"] = model.input_dim();
    header["latent_dim"] = model.latent_dim();
    header["value_count"] = blob.size();
    write_container(header, blob, path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    ByteReader r(bytes);
    const std::uint64_t header_len = r.get_u64();
    const std::size_t header_at = r.offset;
    const std::string header_text = r.get_str(header_len);

    LoadedCheckpoint loaded;
    try {
        loaded.header = nlohmann::json::parse(header_text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad checkpoint header JSON: ") + e.what(), header_at);
    }

    std::uint32_t version = 0;
    std::string variant;
    std::uint64_t value_count = 0;
    try {
        version = loaded.header.at("format_version").get<std::uint32_t>();
        variant = loaded.header.at("variant").get<std::string>();
        value_count = loaded.header.at("value_count").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad checkpoint header fields: ") + e.what(), header_at);
    }
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint format version " + std::to_string(version),
                          header_at);
    }

    std::vector<double> blob(value_count);
    for (double& v : blob) v = r.get_f64();
    if (!r.exhausted()) throw FormatError("trailing bytes after checkpoint blob", r.offset);

    if (variant == "PCA") {
        std::size_t input_dim = 0;
        std::size_t latent_dim = 0;
        try {
            input_dim = loaded.header.at("input_dim").get<std::size_t>();
            latent_dim = loaded.header.at("latent_dim").get<std::size_t>();
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("bad PCA checkpoint fields: ") + e.what(), header_at);
        }
        if (latent_dim == 0 || latent_dim > input_dim ||
            blob.size() != input_dim + latent_dim * input_dim + input_dim) {
            throw FormatError("PCA checkpoint blob size mismatch", header_at);
        }
        PcaModel model;
        model.mean.assign(blob.begin(), blob.begin() + static_cast<std::ptrdiff_t>(input_dim));
        model.components = Matrix(latent_dim, input_dim);
        std::size_t pos = input_dim;
        for (double& v : model.components.storage()) v = blob[pos++];
        model.eigenvalues.assign(blob.begin() + static_cast<std::ptrdiff_t>(pos), blob.end());
        loaded.method = std::make_unique<PcaMethod>(std::move(model));
        return loaded;
    }

    ModelSpec spec = spec_from_json(loaded.header.at("spec"));
    if (variant != variant_name(spec.variant)) {
        throw FormatError("checkpoint variant tag disagrees with its spec", header_at);
    }
    ModelParams model = build_model(spec, 0);
    const std::span<const double> flat(blob);
    std::size_t pos = load_state(model.encoder, flat, header_at);
    pos += load_state(model.vae_mean_head, flat.subspan(pos), header_at);
    pos += load_state(model.vae_logvar_head, flat.subspan(pos), header_at);
    pos += load_state(model.decoder, flat.subspan(pos), header_at);
    if (pos != blob.size()) {
        throw FormatError("checkpoint blob size does not match the declared spec", header_at);
    }
    loaded.method = std::make_unique<NnMethod>(std::move(model));
    return loaded;
}

} // namespace diresa
