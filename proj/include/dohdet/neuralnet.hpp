#pragma once

#include "dohdet/rng.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dohdet::nn {

/// Row-major dense matrix. Batches are stored one sample per row.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

enum class Activation { ReLU, Identity };

const char* to_string(Activation a);
std::optional<Activation> activation_from_string(const std::string& s);

/// Per-unit scale/shift with running statistics. Batch statistics use the
/// population variance (divide by B).
struct BatchNorm {
    std::vector<double> gamma, beta, running_mean, running_var;
    double momentum = 0.99;
    double eps = 1e-5;

    explicit BatchNorm(std::size_t units = 0)
        : gamma(units, 1.0), beta(units, 0.0), running_mean(units, 0.0),
          running_var(units, 1.0) {}
};

/// Affine transform, optional batch norm (applied before the activation),
/// then the activation.
struct Layer {
    Matrix W; // out x in
    std::vector<double> b;
    std::optional<BatchNorm> bn;
    Activation act = Activation::ReLU;

    std::size_t in_size() const { return W.cols; }
    std::size_t out_size() const { return W.rows; }
};

struct Network {
    std::vector<Layer> layers;

    std::size_t input_size() const { return layers.empty() ? 0 : layers.front().in_size(); }
    std::size_t output_size() const { return layers.empty() ? 0 : layers.back().out_size(); }

    /// Trainable parameter count: W, b and, for batch-norm layers, gamma and
    /// beta. Running statistics are state, not parameters.
    std::size_t param_count() const;
    void copy_params(std::span<double> out) const;
    void load_params(std::span<const double> in);
};

/// He-uniform initialized layer; bias zero, batch-norm at identity.
Layer make_layer(std::size_t in, std::size_t out, Activation act, bool batch_norm, Rng& rng,
                 double bn_momentum = 0.99, double bn_eps = 1e-5);

enum class Mode { Train, Infer };

struct LayerTrace {
    Matrix z;    // affine output
    Matrix xhat; // normalized, before gamma/beta (batch-norm layers only)
    Matrix y;    // activation input
    Matrix h;    // activation output
    std::vector<double> batch_mean, batch_var;
};

struct ForwardTrace {
    Matrix input;
    std::vector<LayerTrace> layers;

    const Matrix& output() const { return layers.empty() ? input : layers.back().h; }
};

/// Pure forward pass. Train mode normalizes with batch statistics (batch of
/// at least 2 required when batch norm is present) and records them in the
/// trace; Infer mode uses running statistics. Running statistics are not
/// modified; apply update_running_stats with the trace to advance them.
ForwardTrace forward(const Network& net, const Matrix& batch, Mode mode);

void update_running_stats(Network& net, const ForwardTrace& trace);

struct BackpropResult {
    std::vector<double> grads; // aligned with copy_params/load_params order
    Matrix input_grad;
};

/// Reverse-mode gradients given dL/d(output). The trace must come from a
/// Train-mode forward pass on the same batch.
BackpropResult backprop(const Network& net, const ForwardTrace& trace, const Matrix& output_grad);

/// Mean over the batch of per-sample mean squared error.
double mse_loss(const Matrix& output, const Matrix& targets);

struct MseBackwardResult {
    double loss = 0.0;
    std::vector<double> grads;
    Matrix input_grad;
};

MseBackwardResult mse_backward(const Network& net, const ForwardTrace& trace,
                               const Matrix& targets);

/// Adam accumulators over a flat parameter vector.
struct AdamState {
    std::vector<double> m, v;
    long t = 0;
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState(std::size_t n, double learning_rate)
        : m(n, 0.0), v(n, 0.0), lr(learning_rate) {}
};

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

} // namespace dohdet::nn
