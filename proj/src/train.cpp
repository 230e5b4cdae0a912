#include "diresa/train.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <thread>

#include "diresa/binio.hpp"

namespace diresa {

void apply_variant_defaults(TrainConfig& config, Variant variant) {
    if (variant == Variant::DIRESA || variant == Variant::CRAE) {
        config.batch_size = 512;
        config.drop_partial_batch = true;
    } else {
        config.batch_size = 128;
        config.drop_partial_batch = false;
    }
}

namespace {

void axpy(Matrix& dst, const Matrix& src, double scale) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst.storage()[i] += scale * src.storage()[i];
}

/// Backpropagates the distance-layer gradient dd into both latent branches.
/// Zero-distance rows get a zero gradient (the direction is undefined there).
void distance_backward(const Matrix& z, const Matrix& z_twin, std::span<const double> d_z,
                       std::span<const double> dd, Matrix& dz, Matrix& dz_twin) {
    constexpr double kTiny = 1e-12;
    for (std::size_t i = 0; i < z.rows(); ++i) {
        if (d_z[i] <= kTiny) continue;
        const double coef = dd[i] / d_z[i];
        const double* a = z.row(i).data();
        const double* b = z_twin.row(i).data();
        double* ga = dz.row(i).data();
        double* gb = dz_twin.row(i).data();
        for (std::size_t j = 0; j < z.cols(); ++j) {
            const double dir = coef * (a[j] - b[j]);
            ga[j] += dir;
            gb[j] -= dir;
        }
    }
}

} // namespace

BatchEval eval_batch(ModelParams& model, const Matrix& batch, const Matrix* twin,
                     const LossWeights& weights, Rng* rng, PassMode mode, ModelGrads* grads) {
    const ModelSpec& spec = model.spec;
    ForwardTapes tapes;
    ForwardBundle bundle =
        forward(model, batch, twin, rng, mode, grads != nullptr ? &tapes : nullptr);

    BatchEval eval;
    LossComponents& comps = eval.comps;
    comps.recon = loss_recon(batch, bundle.reconstruction);
    comps.total = weights.w_recon * *comps.recon;
    if (spec.uses_cov_loss()) {
        comps.cov = loss_cov(bundle.latent);
        comps.total += weights.w_cov * *comps.cov;
    }
    if (spec.uses_distance_loss()) {
        try {
            comps.dist = loss_dist(bundle.d_x, bundle.d_z, spec.distance_loss);
            comps.total += weights.w_dist * *comps.dist;
        } catch (const DegenerateError&) {
            eval.dist_degenerate = true; // skip this batch's distance term
        }
    }
    if (spec.uses_kl_loss()) {
        comps.kl = loss_kl(bundle.vae_mean, bundle.vae_logvar);
        comps.total += weights.w_kl * *comps.kl;
    }
    if (grads == nullptr) return eval;

    grads->set_zero();
    Matrix drecon = grad_loss_recon(batch, bundle.reconstruction);
    if (weights.w_recon != 1.0) {
        for (double& v : drecon.storage()) v *= weights.w_recon;
    }
    Matrix ddec_in = stack_backward(model.decoder, tapes.decoder, drecon, grads->decoder);

    if (spec.variant == Variant::VAE) {
        // ddec_in is the gradient at the reparameterized sample.
        Matrix dmean = ddec_in; // ds/dmean = 1
        Matrix dlogvar(dmean.rows(), dmean.cols());
        if (mode == PassMode::train) {
            for (std::size_t i = 0; i < dlogvar.size(); ++i) {
                const double sigma = std::exp(0.5 * bundle.vae_logvar.storage()[i]);
                dlogvar.storage()[i] =
                    ddec_in.storage()[i] * bundle.vae_eps.storage()[i] * 0.5 * sigma;
            }
        }
        if (weights.w_kl != 0.0) {
            Matrix dmean_kl;
            Matrix dlogvar_kl;
            grad_loss_kl(bundle.vae_mean, bundle.vae_logvar, dmean_kl, dlogvar_kl);
            axpy(dmean, dmean_kl, weights.w_kl);
            axpy(dlogvar, dlogvar_kl, weights.w_kl);
        }
        Matrix dh = stack_backward(model.vae_mean_head, tapes.mean_head, dmean, grads->mean_head);
        Matrix dh_lv = stack_backward(model.vae_logvar_head, tapes.logvar_head, dlogvar,
                                      grads->logvar_head);
        axpy(dh, dh_lv, 1.0);
        stack_backward(model.encoder, tapes.encoder, dh, grads->encoder);
        return eval;
    }

    Matrix dlatent = std::move(ddec_in);
    if (spec.uses_cov_loss() && weights.w_cov != 0.0) {
        axpy(dlatent, grad_loss_cov(bundle.latent), weights.w_cov);
    }
    if (spec.uses_distance_loss() && !eval.dist_degenerate) {
        std::vector<double> dd = grad_loss_dist(bundle.d_x, bundle.d_z, spec.distance_loss);
        if (weights.w_dist != 1.0) {
            for (double& v : dd) v *= weights.w_dist;
        }
        Matrix dtwin(bundle.twin_latent.rows(), bundle.twin_latent.cols());
        distance_backward(bundle.latent, bundle.twin_latent, bundle.d_z, dd, dlatent, dtwin);
        // Twin branch gradients accumulate into the shared encoder storage.
        stack_backward(model.encoder, tapes.twin_encoder, dtwin, grads->encoder);
    }
    stack_backward(model.encoder, tapes.encoder, dlatent, grads->encoder);
    return eval;
}

namespace {

struct ComponentAverager {
    double total = 0.0;
    double recon = 0.0, cov = 0.0, dist = 0.0, kl = 0.0;
    std::size_t n = 0, n_recon = 0, n_cov = 0, n_dist = 0, n_kl = 0;

    void add(const LossComponents& c) {
        total += c.total;
        ++n;
        if (c.recon) { recon += *c.recon; ++n_recon; }
        if (c.cov) { cov += *c.cov; ++n_cov; }
        if (c.dist) { dist += *c.dist; ++n_dist; }
        if (c.kl) { kl += *c.kl; ++n_kl; }
    }

    LossComponents result() const {
        LossComponents c;
        c.total = n ? total / static_cast<double>(n) : 0.0;
        if (n_recon) c.recon = recon / static_cast<double>(n_recon);
        if (n_cov) c.cov = cov / static_cast<double>(n_cov);
        if (n_dist) c.dist = dist / static_cast<double>(n_dist);
        if (n_kl) c.kl = kl / static_cast<double>(n_kl);
        return c;
    }
};

bool finite_components(const LossComponents& c) {
    auto ok = [](const std::optional<double>& v) { return !v || std::isfinite(*v); };
    return std::isfinite(c.total) && ok(c.recon) && ok(c.cov) && ok(c.dist) && ok(c.kl);
}

} // namespace

TrainResult train(const ModelSpec& spec, const Dataset& dataset, const TrainConfig& config) {
    spec.validate();
    if (config.epochs == 0) throw ConfigError("training epochs must be positive");
    if (config.batch_size == 0) throw ConfigError("training batch_size must be positive");
    if (dataset.train.size() == 0) throw ConfigError("dataset has no train split");
    if (dataset.validation.size() == 0) throw ConfigError("dataset has no validation split");
    if (dataset.data.cols() != spec.input_dim) {
        throw ConfigError("dataset width " + std::to_string(dataset.data.cols()) +
                          " does not match model input_dim " + std::to_string(spec.input_dim));
    }

    ModelParams model = build_model(spec, derive_seed(config.seed, "init"));

    const bool paired = spec.uses_distance_loss();
    Matrix train_x = dataset.split_rows(Split::train);
    Matrix train_twin;
    Matrix val_x = dataset.split_rows(Split::validation);
    Matrix val_twin;
    if (paired) {
        PairedDataset tp =
            make_shuffled_pairs(dataset, Split::train, derive_seed(config.seed, "pairs-train"));
        train_twin = std::move(tp.shuffled);
        PairedDataset vp = make_shuffled_pairs(dataset, Split::validation,
                                               derive_seed(config.seed, "pairs-validation"));
        val_twin = std::move(vp.shuffled);
    }

    AdamState adam(param_count(model), config.base_lr);
    ModelGrads grads = ModelGrads::zeros_like(model);
    AnnealState anneal;
    anneal.step = config.anneal_step;
    anneal.target = config.anneal_target;
    const bool annealed = spec.annealed();

    Rng shuffle_rng(derive_seed(config.seed, "shuffle"));
    Rng noise_rng(derive_seed(config.seed, "vae-noise"));

    const std::size_t n_train = train_x.rows();
    std::vector<std::size_t> order(n_train);
    for (std::size_t i = 0; i < n_train; ++i) order[i] = i;

    TrainHistory history;
    history.epochs.reserve(config.epochs);
    std::vector<double> flat_params = flatten_params(model);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        adam.lr = lr_for_epoch(config, epoch, anneal, annealed);
        LossWeights weights;
        weights.w_cov = spec.uses_cov_loss() ? anneal.weight : 0.0;
        weights.w_kl = spec.uses_kl_loss() ? anneal.weight : 0.0;

        fisher_yates(order, shuffle_rng);
        ComponentAverager train_avg;
        std::size_t pos = 0;
        while (pos < n_train) {
            std::size_t count = std::min(config.batch_size, n_train - pos);
            // Partial batches are dropped when the variant preset asks for it
            // (never the epoch's only batch) and single-row remainders always.
            if (count < config.batch_size && ((config.drop_partial_batch && pos > 0) || count < 2))
                break;
            const std::span<const std::size_t> idx(order.data() + pos, count);
            Matrix batch = gather_rows(train_x, idx);
            Matrix twin;
            if (paired) twin = gather_rows(train_twin, idx);

            BatchEval eval = eval_batch(model, batch, paired ? &twin : nullptr, weights,
                                        &noise_rng, PassMode::train, &grads);
            if (eval.dist_degenerate) ++history.degenerate_dist_batches;
            if (!finite_components(eval.comps)) {
                throw TrainDivergence("non-finite training loss at epoch " + std::to_string(epoch),
                                      std::move(history));
            }
            train_avg.add(eval.comps);

            flat_params.clear();
            append_params(model.encoder, flat_params);
            append_params(model.vae_mean_head, flat_params);
            append_params(model.vae_logvar_head, flat_params);
            append_params(model.decoder, flat_params);
            const std::vector<double> flat_grads = flatten_grads(grads);
            try {
                adam_step(adam, flat_params, flat_grads);
            } catch (const DivergenceError& e) {
                throw TrainDivergence(e.what(), std::move(history));
            }
            load_flat_params(model, flat_params);
            pos += count;
        }

        BatchEval val = eval_batch(model, val_x, paired ? &val_twin : nullptr, weights, nullptr,
                                   PassMode::infer, nullptr);
        if (val.dist_degenerate) ++history.degenerate_dist_batches;
        if (!finite_components(val.comps)) {
            throw TrainDivergence("non-finite validation loss at epoch " + std::to_string(epoch),
                                  std::move(history));
        }

        EpochRecord record;
        record.epoch = epoch;
        record.lr = adam.lr;
        record.anneal_weight = anneal.weight;
        record.train_loss = train_avg.result();
        record.val_loss = val.comps;
        history.epochs.push_back(std::move(record));

        if (annealed) {
            const std::optional<double>& observed =
                spec.uses_kl_loss() ? val.comps.kl : val.comps.cov;
            if (observed) anneal = anneal_update(anneal, *observed, epoch);
        }
    }

    history.anneal_stopped_epoch = anneal.stopped_epoch;
    history.final_anneal_weight = anneal.weight;

    TrainResult result;
    result.final_val_loss = history.epochs.back().val_loss.total;
    result.model = std::move(model);
    result.history = std::move(history);
    result.seed = config.seed;
    return result;
}

RestartsResult train_restarts(const ModelSpec& spec, const Dataset& dataset,
                              const TrainConfig& config) {
    if (config.restarts == 0) throw ConfigError("restarts must be at least 1");

    struct Slot {
        std::optional<TrainResult> result;
        bool diverged = false;
        TrainHistory partial; // filled when this restart diverged
        std::exception_ptr error;
        std::uint64_t seed = 0;
    };
    std::vector<Slot> slots(config.restarts);
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        while (true) {
            const std::size_t r = next.fetch_add(1);
            if (r >= config.restarts) return;
            Slot& slot = slots[r];
            TrainConfig run = config;
            run.seed = derive_seed(config.seed, static_cast<std::uint64_t>(r));
            slot.seed = run.seed;
            try {
                slot.result = train(spec, dataset, run);
            } catch (const TrainDivergence& e) {
                slot.diverged = true;
                slot.partial = e.history;
            } catch (...) {
                slot.error = std::current_exception();
            }
        }
    };

    const std::size_t pool = std::max<std::size_t>(1, std::min(config.threads, config.restarts));
    if (pool == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(pool);
        for (std::size_t i = 0; i < pool; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    RestartsResult out;
    out.restarts.reserve(config.restarts);
    std::size_t best = config.restarts;
    for (std::size_t r = 0; r < config.restarts; ++r) {
        Slot& slot = slots[r];
        if (slot.error) std::rethrow_exception(slot.error);
        RestartSummary summary;
        summary.seed = slot.seed;
        summary.diverged = slot.diverged;
        summary.final_val_loss =
            slot.result ? slot.result->final_val_loss : std::numeric_limits<double>::quiet_NaN();
        out.restarts.push_back(summary);
        if (slot.result &&
            (best == config.restarts ||
             slot.result->final_val_loss < slots[best].result->final_val_loss)) {
            best = r;
        }
    }
    if (best == config.restarts) {
        throw TrainDivergence("all " + std::to_string(config.restarts) + " restarts diverged",
                              std::move(slots[0].partial));
    }
    out.best = std::move(*slots[best].result);
    out.best_index = best;
    return out;
}

namespace {

void put_cell(std::ostream& os, const std::optional<double>& v) {
    os << ',';
    if (v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", *v);
        os << buf;
    }
}

} // namespace

void write_history_csv(const TrainHistory& history, const std::string& path) {
    std::ostringstream os;
    os << "epoch,lr,anneal_weight,train_total,train_recon,train_cov,train_dist,train_kl,"
          "val_total,val_recon,val_cov,val_dist,val_kl\n";
    for (const EpochRecord& r : history.epochs) {
        char head[96];
        std::snprintf(head, sizeof(head), "%zu,%.17g,%.17g", r.epoch, r.lr, r.anneal_weight);
        os << head;
        put_cell(os, r.train_loss.total);
        put_cell(os, r.train_loss.recon);
        put_cell(os, r.train_loss.cov);
        put_cell(os, r.train_loss.dist);
        put_cell(os, r.train_loss.kl);
        put_cell(os, r.val_loss.total);
        put_cell(os, r.val_loss.recon);
        put_cell(os, r.val_loss.cov);
        put_cell(os, r.val_loss.dist);
        put_cell(os, r.val_loss.kl);
        os << '\n';
    }
    write_file_atomic(path, os.str());
}

} // namespace diresa
