#include "diresa/nn.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "diresa/errors.hpp"

namespace diresa {

namespace {

std::size_t layer_in_width(const Layer& layer) {
    if (const auto* d = std::get_if<DenseLayer>(&layer)) return d->in_width();
    return std::get<BatchNormLayer>(layer).width();
}

std::size_t layer_out_width(const Layer& layer) {
    if (const auto* d = std::get_if<DenseLayer>(&layer)) return d->out_width();
    return std::get<BatchNormLayer>(layer).width();
}

double activate(double z, Activation act) {
    return act == Activation::relu ? (z > 0.0 ? z : 0.0) : z;
}

double activate_grad(double z, Activation act) {
    return act == Activation::relu ? (z > 0.0 ? 1.0 : 0.0) : 1.0;
}

} // namespace

std::size_t LayerStack::input_width() const {
    if (layers.empty()) throw DimensionError("input_width of empty stack");
    return layer_in_width(layers.front());
}

std::size_t LayerStack::output_width() const {
    if (layers.empty()) throw DimensionError("output_width of empty stack");
    return layer_out_width(layers.back());
}

DenseLayer make_dense(std::size_t in, std::size_t out, Activation act, Rng& rng) {
    if (in == 0 || out == 0) throw DimensionError("dense layer with zero width");
    DenseLayer layer;
    layer.weights = Matrix(out, in);
    layer.bias.assign(out, 0.0);
    layer.activation = act;
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (double& w : layer.weights.storage()) w = rng.uniform(-limit, limit);
    return layer;
}

BatchNormLayer make_batchnorm(std::size_t width) {
    if (width == 0) throw DimensionError("batch norm layer with zero width");
    BatchNormLayer layer;
    layer.gamma.assign(width, 1.0);
    layer.beta.assign(width, 0.0);
    layer.running_mean.assign(width, 0.0);
    layer.running_var.assign(width, 1.0);
    return layer;
}

Matrix dense_forward(const DenseLayer& layer, const Matrix& batch) {
    if (batch.cols() != layer.in_width()) {
        throw DimensionError("dense layer expects width " + std::to_string(layer.in_width()) +
                             ", got batch width " + std::to_string(batch.cols()));
    }
    const std::size_t n = batch.rows();
    const std::size_t out = layer.out_width();
    const std::size_t in = layer.in_width();
    Matrix result(n, out);
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = batch.row(i).data();
        for (std::size_t o = 0; o < out; ++o) {
            const double* w = layer.weights.row(o).data();
            double z = layer.bias[o];
            for (std::size_t k = 0; k < in; ++k) z += x[k] * w[k];
            result(i, o) = activate(z, layer.activation);
        }
    }
    return result;
}

namespace {

/// Shared forward kernel; fills the tape entry and (in train mode) updates the
/// running statistics.
Matrix batchnorm_pass(BatchNormLayer& layer, const Matrix& batch, PassMode mode,
                      BatchNormTape* tape) {
    const std::size_t width = layer.width();
    if (batch.cols() != width) {
        throw DimensionError("batch norm expects width " + std::to_string(width) +
                             ", got batch width " + std::to_string(batch.cols()));
    }
    const std::size_t n = batch.rows();
    if (mode == PassMode::train && n < 2) {
        throw DegenerateError("batch norm needs at least 2 rows in train mode, got " +
                              std::to_string(n));
    }

    std::vector<double> mean(width, 0.0);
    std::vector<double> inv_std(width, 0.0);
    if (mode == PassMode::train) {
        std::vector<double> var(width, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* x = batch.row(i).data();
            for (std::size_t j = 0; j < width; ++j) mean[j] += x[j];
        }
        for (std::size_t j = 0; j < width; ++j) mean[j] /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double* x = batch.row(i).data();
            for (std::size_t j = 0; j < width; ++j) {
                const double c = x[j] - mean[j];
                var[j] += c * c;
            }
        }
        for (std::size_t j = 0; j < width; ++j) var[j] /= static_cast<double>(n);
        for (std::size_t j = 0; j < width; ++j) {
            inv_std[j] = 1.0 / std::sqrt(var[j] + layer.epsilon);
            layer.running_mean[j] =
                layer.momentum * layer.running_mean[j] + (1.0 - layer.momentum) * mean[j];
            layer.running_var[j] =
                layer.momentum * layer.running_var[j] + (1.0 - layer.momentum) * var[j];
        }
    } else {
        for (std::size_t j = 0; j < width; ++j) {
            mean[j] = layer.running_mean[j];
            inv_std[j] = 1.0 / std::sqrt(layer.running_var[j] + layer.epsilon);
        }
    }

    Matrix result(n, width);
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = batch.row(i).data();
        double* y = result.row(i).data();
        for (std::size_t j = 0; j < width; ++j) {
            y[j] = layer.gamma[j] * (x[j] - mean[j]) * inv_std[j] + layer.beta[j];
        }
    }
    if (tape != nullptr) {
        tape->input = batch;
        tape->mean = std::move(mean);
        tape->inv_std = std::move(inv_std);
        tape->mode = mode;
    }
    return result;
}

} // namespace

Matrix batchnorm_forward(BatchNormLayer& layer, const Matrix& batch, PassMode mode) {
    return batchnorm_pass(layer, batch, mode, nullptr);
}

Tape stack_forward(LayerStack& stack, const Matrix& batch, PassMode mode) {
    Tape tape;
    tape.batch_size = batch.rows();
    tape.entries.reserve(stack.layers.size());
    Matrix current = batch;
    for (Layer& layer : stack.layers) {
        if (auto* dense = std::get_if<DenseLayer>(&layer)) {
            DenseTape entry;
            entry.input = current;
            const std::size_t n = current.rows();
            const std::size_t out = dense->out_width();
            const std::size_t in = dense->in_width();
            if (current.cols() != in) {
                throw DimensionError("dense layer expects width " + std::to_string(in) +
                                     ", got batch width " + std::to_string(current.cols()));
            }
            entry.pre_activation = Matrix(n, out);
            Matrix activated(n, out);
            for (std::size_t i = 0; i < n; ++i) {
                const double* x = current.row(i).data();
                for (std::size_t o = 0; o < out; ++o) {
                    const double* w = dense->weights.row(o).data();
                    double z = dense->bias[o];
                    for (std::size_t k = 0; k < in; ++k) z += x[k] * w[k];
                    entry.pre_activation(i, o) = z;
                    activated(i, o) = activate(z, dense->activation);
                }
            }
            current = std::move(activated);
            tape.entries.push_back(std::move(entry));
        } else {
            auto& bn = std::get<BatchNormLayer>(layer);
            BatchNormTape entry;
            current = batchnorm_pass(bn, current, mode, &entry);
            tape.entries.push_back(std::move(entry));
        }
    }
    tape.output = std::move(current);
    return tape;
}

Matrix stack_infer(const LayerStack& stack, const Matrix& batch) {
    Matrix current = batch;
    for (const Layer& layer : stack.layers) {
        if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
            current = dense_forward(*dense, current);
        } else {
            // Running statistics are read-only in infer mode; cast away the
            // const to reuse the kernel without copying the layer.
            auto& bn = const_cast<BatchNormLayer&>(std::get<BatchNormLayer>(layer));
            current = batchnorm_pass(bn, current, PassMode::infer, nullptr);
        }
    }
    return current;
}

StackGrads StackGrads::zeros_like(const LayerStack& stack) {
    StackGrads grads;
    grads.layers.reserve(stack.layers.size());
    for (const Layer& layer : stack.layers) {
        if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
            DenseGrads g;
            g.dweights = Matrix(dense->out_width(), dense->in_width());
            g.dbias.assign(dense->out_width(), 0.0);
            grads.layers.push_back(std::move(g));
        } else {
            const auto& bn = std::get<BatchNormLayer>(layer);
            BatchNormGrads g;
            g.dgamma.assign(bn.width(), 0.0);
            g.dbeta.assign(bn.width(), 0.0);
            grads.layers.push_back(std::move(g));
        }
    }
    return grads;
}

void StackGrads::set_zero() {
    for (LayerGrads& layer : layers) {
        if (auto* dense = std::get_if<DenseGrads>(&layer)) {
            std::fill(dense->dweights.storage().begin(), dense->dweights.storage().end(), 0.0);
            std::fill(dense->dbias.begin(), dense->dbias.end(), 0.0);
        } else {
            auto& bn = std::get<BatchNormGrads>(layer);
            std::fill(bn.dgamma.begin(), bn.dgamma.end(), 0.0);
            std::fill(bn.dbeta.begin(), bn.dbeta.end(), 0.0);
        }
    }
}

namespace {

Matrix dense_backward(const DenseLayer& layer, const DenseTape& tape, const Matrix& dout,
                      DenseGrads& grads) {
    const std::size_t n = tape.input.rows();
    const std::size_t out = layer.out_width();
    const std::size_t in = layer.in_width();
    if (dout.rows() != n || dout.cols() != out) {
        throw DimensionError("dense backward: gradient shape mismatch");
    }

    // dZ = dY * act'(Z), folded into the loops below.
    Matrix dinput(n, in);
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = tape.input.row(i).data();
        const double* z = tape.pre_activation.row(i).data();
        const double* dy = dout.row(i).data();
        double* dx = dinput.row(i).data();
        for (std::size_t o = 0; o < out; ++o) {
            const double dz = dy[o] * activate_grad(z[o], layer.activation);
            if (dz == 0.0) continue;
            grads.dbias[o] += dz;
            const double* w = layer.weights.row(o).data();
            double* dw = grads.dweights.row(o).data();
            for (std::size_t k = 0; k < in; ++k) {
                dw[k] += dz * x[k];
                dx[k] += dz * w[k];
            }
        }
    }
    return dinput;
}

Matrix batchnorm_backward(const BatchNormLayer& layer, const BatchNormTape& tape,
                          const Matrix& dout, BatchNormGrads& grads) {
    const std::size_t n = tape.input.rows();
    const std::size_t width = layer.width();
    if (dout.rows() != n || dout.cols() != width) {
        throw DimensionError("batch norm backward: gradient shape mismatch");
    }
    Matrix dinput(n, width);

    if (tape.mode == PassMode::infer) {
        // Statistics are constants in infer mode.
        for (std::size_t i = 0; i < n; ++i) {
            const double* x = tape.input.row(i).data();
            const double* dy = dout.row(i).data();
            double* dx = dinput.row(i).data();
            for (std::size_t j = 0; j < width; ++j) {
                const double xhat = (x[j] - tape.mean[j]) * tape.inv_std[j];
                grads.dgamma[j] += dy[j] * xhat;
                grads.dbeta[j] += dy[j];
                dx[j] = dy[j] * layer.gamma[j] * tape.inv_std[j];
            }
        }
        return dinput;
    }

    // Train mode: batch statistics depend on the input, so the chain rule
    // picks up the d(var) and d(mean) contributions as well.
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> sum_dxhat(width, 0.0);
    std::vector<double> sum_dxhat_xc(width, 0.0); // sum of dxhat * (x - mean)
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = tape.input.row(i).data();
        const double* dy = dout.row(i).data();
        for (std::size_t j = 0; j < width; ++j) {
            const double xc = x[j] - tape.mean[j];
            const double xhat = xc * tape.inv_std[j];
            grads.dgamma[j] += dy[j] * xhat;
            grads.dbeta[j] += dy[j];
            const double dxhat = dy[j] * layer.gamma[j];
            sum_dxhat[j] += dxhat;
            sum_dxhat_xc[j] += dxhat * xc;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = tape.input.row(i).data();
        const double* dy = dout.row(i).data();
        double* dx = dinput.row(i).data();
        for (std::size_t j = 0; j < width; ++j) {
            const double xc = x[j] - tape.mean[j];
            const double s = tape.inv_std[j];
            const double dxhat = dy[j] * layer.gamma[j];
            const double dvar = sum_dxhat_xc[j] * (-0.5) * s * s * s;
            const double dmean = -s * sum_dxhat[j]; // the dvar mean term cancels
            dx[j] = dxhat * s + dvar * 2.0 * xc * inv_n + dmean * inv_n;
        }
    }
    return dinput;
}

} // namespace

Matrix stack_backward(const LayerStack& stack, const Tape& tape, const Matrix& output_grad,
                      StackGrads& grads) {
    const std::size_t count = stack.layers.size();
    if (tape.entries.size() != count || grads.layers.size() != count) {
        throw DimensionError("stack backward: tape or gradient layout does not match stack");
    }
    Matrix current = output_grad;
    for (std::size_t idx = count; idx-- > 0;) {
        const Layer& layer = stack.layers[idx];
        if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
            const auto* entry = std::get_if<DenseTape>(&tape.entries[idx]);
            auto* g = std::get_if<DenseGrads>(&grads.layers[idx]);
            if (entry == nullptr || g == nullptr) {
                throw DimensionError("stack backward: layer kind mismatch at index " +
                                     std::to_string(idx));
            }
            current = dense_backward(*dense, *entry, current, *g);
        } else {
            const auto& bn = std::get<BatchNormLayer>(layer);
            const auto* entry = std::get_if<BatchNormTape>(&tape.entries[idx]);
            auto* g = std::get_if<BatchNormGrads>(&grads.layers[idx]);
            if (entry == nullptr || g == nullptr) {
                throw DimensionError("stack backward: layer kind mismatch at index " +
                                     std::to_string(idx));
            }
            current = batchnorm_backward(bn, *entry, current, *g);
        }
    }
    return current;
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw DimensionError("adam step: parameter/gradient/state size mismatch");
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) {
            throw DivergenceError("non-finite gradient at parameter index " + std::to_string(i));
        }
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

std::size_t param_count(const LayerStack& stack) {
    std::size_t total = 0;
    for (const Layer& layer : stack.layers) {
        if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
            total += dense->weights.size() + dense->bias.size();
        } else {
            total += 2 * std::get<BatchNormLayer>(layer).width();
        }
    }
    return total;
}

void append_params(const LayerStack& stack, std::vector<double>& out) {
    for (const Layer& layer : stack.layers) {
        if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
            const auto& w = dense->weights.storage();
            out.insert(out.end(), w.begin(), w.end());
            out.insert(out.end(), dense->bias.begin(), dense->bias.end());
        } else {
            const auto& bn = std::get<BatchNormLayer>(layer);
            out.insert(out.end(), bn.gamma.begin(), bn.gamma.end());
            out.insert(out.end(), bn.beta.begin(), bn.beta.end());
        }
    }
}

void append_grads(const StackGrads& grads, std::vector<double>& out) {
    for (const LayerGrads& layer : grads.layers) {
        if (const auto* dense = std::get_if<DenseGrads>(&layer)) {
            const auto& w = dense->dweights.storage();
            out.insert(out.end(), w.begin(), w.end());
            out.insert(out.end(), dense->dbias.begin(), dense->dbias.end());
        } else {
            const auto& bn = std::get<BatchNormGrads>(layer);
            out.insert(out.end(), bn.dgamma.begin(), bn.dgamma.end());
            out.insert(out.end(), bn.dbeta.begin(), bn.dbeta.end());
        }
    }
}

std::size_t load_params(LayerStack& stack, std::span<const double> flat) {
    std::size_t pos = 0;
    auto take = [&](double* dst, std::size_t count) {
        if (pos + count > flat.size()) {
            throw DimensionError("load params: flat vector too short");
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
        }
    }
    return pos;
}

} // namespace diresa
