#pragma once

#include <span>
#include <variant>
#include <vector>

#include "diresa/matrix.hpp"
#include "diresa/rng.hpp"

namespace diresa {

enum class Activation { relu, linear };
enum class PassMode { train, infer };

/// Fully connected layer. Weights are out x in, applied as act(x W^T + b).
struct DenseLayer {
    Matrix weights;
    std::vector<double> bias;
    Activation activation = Activation::linear;

    std::size_t in_width() const { return weights.cols(); }
    std::size_t out_width() const { return weights.rows(); }
};

/// Batch normalization over columns. Train mode normalizes by batch statistics
/// and folds them into the running estimates; infer mode uses the running ones.
struct BatchNormLayer {
    std::vector<double> gamma;
    std::vector<double> beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double epsilon = 1e-3;
    double momentum = 0.99;

    std::size_t width() const { return gamma.size(); }
};

using Layer = std::variant<DenseLayer, BatchNormLayer>;

/// Ordered layer pipeline; the building block for encoders and decoders.
struct LayerStack {
    std::vector<Layer> layers;

    std::size_t input_width() const;
    std::size_t output_width() const;
};

/// Glorot-uniform dense layer (limit sqrt(6/(in+out))), zero bias.
DenseLayer make_dense(std::size_t in, std::size_t out, Activation act, Rng& rng);

/// Identity-initialized batch norm (gamma 1, beta 0, running mean 0, var 1).
BatchNormLayer make_batchnorm(std::size_t width);

Matrix dense_forward(const DenseLayer& layer, const Matrix& batch);
Matrix batchnorm_forward(BatchNormLayer& layer, const Matrix& batch, PassMode mode);

// ---------------------------------------------------------------------------
// Reverse-mode machinery. A forward pass records one tape entry per layer;
// backward consumes the tape and accumulates parameter gradients.
// ---------------------------------------------------------------------------

struct DenseTape {
    Matrix input;
    Matrix pre_activation;
};

struct BatchNormTape {
    Matrix input;
    std::vector<double> mean;    // statistics actually used by the pass
    std::vector<double> inv_std; // 1/sqrt(var + eps)
    PassMode mode = PassMode::train;
};

using LayerTape = std::variant<DenseTape, BatchNormTape>;

struct Tape {
    std::vector<LayerTape> entries;
    std::size_t batch_size = 0;
    Matrix output;
};

/// Runs the stack over a batch, recording the tape. Train mode updates batch
/// norm running statistics as a side effect.
Tape stack_forward(LayerStack& stack, const Matrix& batch, PassMode mode);

/// Inference-only forward pass; never mutates the stack.
Matrix stack_infer(const LayerStack& stack, const Matrix& batch);

struct DenseGrads {
    Matrix dweights;
    std::vector<double> dbias;
};

struct BatchNormGrads {
    std::vector<double> dgamma;
    std::vector<double> dbeta;
};

using LayerGrads = std::variant<DenseGrads, BatchNormGrads>;

/// Gradient accumulator mirroring a stack's parameter layout.
struct StackGrads {
    std::vector<LayerGrads> layers;

    static StackGrads zeros_like(const LayerStack& stack);
    void set_zero();
};

/// Backpropagates output_grad through the taped pass, accumulating parameter
/// gradients into `grads` (so shared-weight stacks can sum several passes).
/// Returns the gradient with respect to the stack input.
Matrix stack_backward(const LayerStack& stack, const Tape& tape, const Matrix& output_grad,
                      StackGrads& grads);

// ---------------------------------------------------------------------------
// Adam optimizer over a flat parameter vector.
// ---------------------------------------------------------------------------

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-7;
    double lr = 1e-3;

    explicit AdamState(std::size_t n, double learning_rate = 1e-3)
        : m(n, 0.0), v(n, 0.0), lr(learning_rate) {}
};

/// Bias-corrected Adam update, in place. Throws DivergenceError naming the
/// first non-finite gradient index.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

// ---------------------------------------------------------------------------
// Flat parameter views, in declared layer order.
// Dense: weights row-major then bias. Batch norm: gamma then beta (running
// statistics are not trainable and live only in the layer).
// ---------------------------------------------------------------------------

std::size_t param_count(const LayerStack& stack);
void append_params(const LayerStack& stack, std::vector<double>& out);
void append_grads(const StackGrads& grads, std::vector<double>& out);

/// Writes `flat` back into the stack's parameters; returns values consumed.
std::size_t load_params(LayerStack& stack, std::span<const double> flat);

} // namespace diresa
