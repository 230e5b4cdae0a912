#include "diresa/models.hpp"

#include <cmath>

#include "diresa/errors.hpp"

namespace diresa {

const char* variant_name(Variant v) {
    switch (v) {
    case Variant::AE: return "AE";
    case Variant::BNAE: return "BNAE";
    case Variant::CRAE: return "CRAE";
    case Variant::VAE: return "VAE";
    default: return "DIRESA";
    }
}

Variant variant_from_name(const std::string& name) {
    if (name == "AE") return Variant::AE;
    if (name == "BNAE") return Variant::BNAE;
    if (name == "CRAE") return Variant::CRAE;
    if (name == "VAE") return Variant::VAE;
    if (name == "DIRESA") return Variant::DIRESA;
    throw ConfigError("unknown model variant \"" + name + "\"");
}

const char* distance_kind_name(DistanceKind k) {
    switch (k) {
    case DistanceKind::mse: return "mse";
    case DistanceKind::msle: return "msle";
    case DistanceKind::corr: return "corr";
    default: return "logcorr";
    }
}

DistanceKind distance_kind_from_name(const std::string& name) {
    if (name == "mse") return DistanceKind::mse;
    if (name == "msle") return DistanceKind::msle;
    if (name == "corr") return DistanceKind::corr;
    if (name == "logcorr") return DistanceKind::logcorr;
    throw ConfigError("unknown distance loss kind \"" + name + "\"");
}

void ModelSpec::validate() const {
    if (input_dim == 0) throw ConfigError("model input_dim must be positive");
    if (latent_dim == 0) throw ConfigError("model latent_dim must be positive");
    if (latent_dim >= input_dim) {
        throw ConfigError("model latent_dim must be smaller than input_dim");
    }
    if (hidden_widths.empty()) throw ConfigError("model hidden_widths must be nonempty");
    for (std::size_t w : hidden_widths) {
        if (w == 0) throw ConfigError("model hidden widths must be positive");
    }
}

ModelParams build_model(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    ModelParams model;
    model.spec = spec;

    const auto& widths = spec.hidden_widths;
    std::size_t prev = spec.input_dim;
    for (std::size_t w : widths) {
        model.encoder.layers.emplace_back(make_dense(prev, w, Activation::relu, rng));
        prev = w;
    }
    if (spec.variant == Variant::VAE) {
        model.vae_mean_head.layers.emplace_back(
            make_dense(prev, spec.latent_dim, Activation::linear, rng));
        model.vae_logvar_head.layers.emplace_back(
            make_dense(prev, spec.latent_dim, Activation::linear, rng));
    } else {
        model.encoder.layers.emplace_back(
            make_dense(prev, spec.latent_dim, Activation::linear, rng));
        if (spec.variant == Variant::BNAE) {
            model.encoder.layers.emplace_back(make_batchnorm(spec.latent_dim));
        }
    }

    prev = spec.latent_dim;
    for (std::size_t i = widths.size(); i-- > 0;) {
        model.decoder.layers.emplace_back(make_dense(prev, widths[i], Activation::relu, rng));
        prev = widths[i];
    }
    model.decoder.layers.emplace_back(make_dense(prev, spec.input_dim, Activation::linear, rng));
    return model;
}

std::vector<double> distance_layer(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw DimensionError("distance layer requires equal shapes");
    std::vector<double> d(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* x = a.row(i).data();
        const double* y = b.row(i).data();
        double acc = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const double diff = x[j] - y[j];
            acc += diff * diff;
        }
        d[i] = std::sqrt(acc);
    }
    return d;
}

ForwardBundle forward(ModelParams& model, const Matrix& batch, const Matrix* twin_batch,
                      Rng* rng, PassMode mode, ForwardTapes* tapes) {
    const ModelSpec& spec = model.spec;
    if (spec.uses_distance_loss() && twin_batch == nullptr) {
        throw ConfigError("DIRESA forward requires a twin batch");
    }
    if (!spec.uses_distance_loss() && twin_batch != nullptr) {
        throw ConfigError("twin batch given to a non-DIRESA model");
    }
    if (twin_batch != nullptr && !twin_batch->same_shape(batch)) {
        throw DimensionError("twin batch shape does not match batch");
    }

    ForwardBundle out;
    auto run = [&](LayerStack& stack, const Matrix& input, Tape* slot) -> Matrix {
        if (slot != nullptr || mode == PassMode::train) {
            Tape tape = stack_forward(stack, input, mode);
            Matrix result = tape.output;
            if (slot != nullptr) *slot = std::move(tape);
            return result;
        }
        return stack_infer(stack, input);
    };

    if (spec.variant == Variant::VAE) {
        Matrix h = run(model.encoder, batch, tapes ? &tapes->encoder : nullptr);
        out.vae_mean = run(model.vae_mean_head, h, tapes ? &tapes->mean_head : nullptr);
        out.vae_logvar = run(model.vae_logvar_head, h, tapes ? &tapes->logvar_head : nullptr);
        if (mode == PassMode::train) {
            if (rng == nullptr) throw ConfigError("VAE train-mode forward requires an rng");
            const std::size_t n = out.vae_mean.rows();
            const std::size_t l = out.vae_mean.cols();
            out.vae_eps = Matrix(n, l);
            out.vae_sample = Matrix(n, l);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < l; ++j) {
                    const double eps = rng->normal();
                    out.vae_eps(i, j) = eps;
                    out.vae_sample(i, j) =
                        out.vae_mean(i, j) + std::exp(0.5 * out.vae_logvar(i, j)) * eps;
                }
            }
        } else {
            out.vae_sample = out.vae_mean; // deterministic at inference
        }
        out.latent = out.vae_sample;
        out.reconstruction = run(model.decoder, out.latent, tapes ? &tapes->decoder : nullptr);
        return out;
    }

    out.latent = run(model.encoder, batch, tapes ? &tapes->encoder : nullptr);
    if (spec.uses_distance_loss()) {
        out.twin_latent = run(model.encoder, *twin_batch, tapes ? &tapes->twin_encoder : nullptr);
        out.d_x = distance_layer(batch, *twin_batch);
        out.d_z = distance_layer(out.latent, out.twin_latent);
    }
    out.reconstruction = run(model.decoder, out.latent, tapes ? &tapes->decoder : nullptr);
    return out;
}

Matrix encode(const ModelParams& model, const Matrix& batch) {
    Matrix h = stack_infer(model.encoder, batch);
    if (model.spec.variant == Variant::VAE) return stack_infer(model.vae_mean_head, h);
    return h;
}

Matrix decode(const ModelParams& model, const Matrix& latent) {
    return stack_infer(model.decoder, latent);
}

ModelGrads ModelGrads::zeros_like(const ModelParams& model) {
    ModelGrads grads;
    grads.encoder = StackGrads::zeros_like(model.encoder);
    grads.mean_head = StackGrads::zeros_like(model.vae_mean_head);
    grads.logvar_head = StackGrads::zeros_like(model.vae_logvar_head);
    grads.decoder = StackGrads::zeros_like(model.decoder);
    return grads;
}

void ModelGrads::set_zero() {
    encoder.set_zero();
    mean_head.set_zero();
    logvar_head.set_zero();
    decoder.set_zero();
}

std::size_t param_count(const ModelParams& model) {
    return param_count(model.encoder) + param_count(model.vae_mean_head) +
           param_count(model.vae_logvar_head) + param_count(model.decoder);
}

std::vector<double> flatten_params(const ModelParams& model) {
    std::vector<double> flat;
    flat.reserve(param_count(model));
    append_params(model.encoder, flat);
    append_params(model.vae_mean_head, flat);
    append_params(model.vae_logvar_head, flat);
    append_params(model.decoder, flat);
    return flat;
}

std::vector<double> flatten_grads(const ModelGrads& grads) {
    std::vector<double> flat;
    append_grads(grads.encoder, flat);
    append_grads(grads.mean_head, flat);
    append_grads(grads.logvar_head, flat);
    append_grads(grads.decoder, flat);
    return flat;
}

void load_flat_params(ModelParams& model, std::span<const double> flat) {
    std::size_t pos = load_params(model.encoder, flat);
    pos += load_params(model.vae_mean_head, flat.subspan(pos));
    pos += load_params(model.vae_logvar_head, flat.subspan(pos));
    pos += load_params(model.decoder, flat.subspan(pos));
    if (pos != flat.size()) {
        throw DimensionError("flat parameter vector size does not match model");
    }
}

} // namespace diresa
