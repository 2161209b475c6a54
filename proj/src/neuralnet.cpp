#include "dohdet/neuralnet.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dohdet::nn {

const char* to_string(Activation a) {
    return a == Activation::ReLU ? "relu" : "identity";
}

std::optional<Activation> activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::ReLU;
    if (s == "identity") return Activation::Identity;
    return std::nullopt;
}

std::size_t Network::param_count() const {
    std::size_t n = 0;
    for (const Layer& layer : layers) {
        n += layer.W.data.size() + layer.b.size();
        if (layer.bn) n += layer.bn->gamma.size() + layer.bn->beta.size();
    }
    return n;
}

void Network::copy_params(std::span<double> out) const {
    std::size_t pos = 0;
    auto put = [&](const std::vector<double>& v) {
        for (double x : v) out[pos++] = x;
    };
    for (const Layer& layer : layers) {
        put(layer.W.data);
        put(layer.b);
        if (layer.bn) {
            put(layer.bn->gamma);
            put(layer.bn->beta);
        }
    }
}

void Network::load_params(std::span<const double> in) {
    std::size_t pos = 0;
    auto take = [&](std::vector<double>& v) {
        for (double& x : v) x = in[pos++];
    };
    for (Layer& layer : layers) {
        take(layer.W.data);
        take(layer.b);
        if (layer.bn) {
            take(layer.bn->gamma);
            take(layer.bn->beta);
        }
    }
}

Layer make_layer(std::size_t in, std::size_t out, Activation act, bool batch_norm, Rng& rng,
                 double bn_momentum, double bn_eps) {
    Layer layer;
    layer.W = Matrix(out, in);
    double limit = std::sqrt(6.0 / static_cast<double>(in));
    for (double& w : layer.W.data) w = rng.uniform(-limit, limit);
    layer.b.assign(out, 0.0);
    layer.act = act;
    if (batch_norm) {
        layer.bn = BatchNorm(out);
        layer.bn->momentum = bn_momentum;
        layer.bn->eps = bn_eps;
    }
    return layer;
}

namespace {

Matrix affine(const Matrix& x, const Layer& layer) {
    const std::size_t B = x.rows, in = layer.in_size(), out = layer.out_size();
    Matrix z(B, out);
    for (std::size_t b = 0; b < B; ++b) {
        const double* xr = &x.data[b * in];
        double* zr = &z.data[b * out];
        for (std::size_t o = 0; o < out; ++o) {
            const double* wr = &layer.W.data[o * in];
            double acc = layer.b[o];
            for (std::size_t i = 0; i < in; ++i) acc += wr[i] * xr[i];
            zr[o] = acc;
        }
    }
    return z;
}

} // namespace

ForwardTrace forward(const Network& net, const Matrix& batch, Mode mode) {
    if (net.layers.empty()) {
        ForwardTrace trace;
        trace.input = batch;
        return trace;
    }
    if (batch.cols != net.input_size())
        throw std::invalid_argument("forward: batch width " + std::to_string(batch.cols) +
                                    " does not match input size " +
                                    std::to_string(net.input_size()));
    if (batch.rows == 0) throw std::invalid_argument("forward: empty batch");

    ForwardTrace trace;
    trace.input = batch;
    trace.layers.reserve(net.layers.size());

    const Matrix* prev = &trace.input;
    for (const Layer& layer : net.layers) {
        LayerTrace lt;
        lt.z = affine(*prev, layer);
        const std::size_t B = lt.z.rows, out = layer.out_size();

        if (layer.bn) {
            if (mode == Mode::Train && B < 2)
                throw std::invalid_argument("forward: batch norm needs a batch of at least 2 in train mode");
            const BatchNorm& bn = *layer.bn;
            lt.xhat = Matrix(B, out);
            lt.y = Matrix(B, out);
            lt.batch_mean.assign(out, 0.0);
            lt.batch_var.assign(out, 0.0);

            const std::vector<double>* mean = &bn.running_mean;
            const std::vector<double>* var = &bn.running_var;
            if (mode == Mode::Train) {
                for (std::size_t o = 0; o < out; ++o) {
                    double sum = 0.0;
                    for (std::size_t b = 0; b < B; ++b) sum += lt.z.at(b, o);
                    lt.batch_mean[o] = sum / static_cast<double>(B);
                }
                for (std::size_t o = 0; o < out; ++o) {
                    double ss = 0.0;
                    for (std::size_t b = 0; b < B; ++b) {
                        double d = lt.z.at(b, o) - lt.batch_mean[o];
                        ss += d * d;
                    }
                    lt.batch_var[o] = ss / static_cast<double>(B);
                }
                mean = &lt.batch_mean;
                var = &lt.batch_var;
            }
            for (std::size_t o = 0; o < out; ++o) {
                double inv_std = 1.0 / std::sqrt((*var)[o] + bn.eps);
                for (std::size_t b = 0; b < B; ++b) {
                    double xh = (lt.z.at(b, o) - (*mean)[o]) * inv_std;
                    lt.xhat.at(b, o) = xh;
                    lt.y.at(b, o) = bn.gamma[o] * xh + bn.beta[o];
                }
            }
        } else {
            lt.y = lt.z;
        }

        lt.h = lt.y;
        if (layer.act == Activation::ReLU) {
            for (double& v : lt.h.data) v = v > 0.0 ? v : 0.0;
        }
        trace.layers.push_back(std::move(lt));
        prev = &trace.layers.back().h;
    }
    return trace;
}

void update_running_stats(Network& net, const ForwardTrace& trace) {
    if (trace.layers.size() != net.layers.size())
        throw std::invalid_argument("update_running_stats: trace does not match network");
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        Layer& layer = net.layers[k];
        if (!layer.bn) continue;
        const LayerTrace& lt = trace.layers[k];
        if (lt.batch_mean.empty())
            throw std::invalid_argument("update_running_stats: trace is not from a train-mode pass");
        BatchNorm& bn = *layer.bn;
        for (std::size_t o = 0; o < bn.gamma.size(); ++o) {
            bn.running_mean[o] = bn.momentum * bn.running_mean[o] + (1.0 - bn.momentum) * lt.batch_mean[o];
            bn.running_var[o] = bn.momentum * bn.running_var[o] + (1.0 - bn.momentum) * lt.batch_var[o];
        }
    }
}

BackpropResult backprop(const Network& net, const ForwardTrace& trace, const Matrix& output_grad) {
    if (trace.layers.size() != net.layers.size())
        throw std::invalid_argument("backprop: trace does not match network");

    BackpropResult result;
    result.grads.assign(net.param_count(), 0.0);

    // Flat offsets per layer, matching copy_params order.
    std::vector<std::size_t> offsets(net.layers.size());
    std::size_t pos = 0;
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        offsets[k] = pos;
        const Layer& layer = net.layers[k];
        pos += layer.W.data.size() + layer.b.size();
        if (layer.bn) pos += 2 * layer.bn->gamma.size();
    }

    Matrix dh = output_grad;
    for (std::size_t k = net.layers.size(); k-- > 0;) {
        const Layer& layer = net.layers[k];
        const LayerTrace& lt = trace.layers[k];
        const Matrix& input = k == 0 ? trace.input : trace.layers[k - 1].h;
        const std::size_t B = dh.rows, out = layer.out_size(), in = layer.in_size();

        if (dh.rows != lt.h.rows || dh.cols != lt.h.cols)
            throw std::invalid_argument("backprop: gradient shape mismatch");

        // activation
        Matrix dy = dh;
        if (layer.act == Activation::ReLU) {
            for (std::size_t idx = 0; idx < dy.data.size(); ++idx)
                if (lt.y.data[idx] <= 0.0) dy.data[idx] = 0.0;
        }

        double* gW = &result.grads[offsets[k]];
        double* gb = gW + layer.W.data.size();

        // batch norm
        Matrix dz;
        if (layer.bn) {
            const BatchNorm& bn = *layer.bn;
            if (lt.batch_mean.empty())
                throw std::invalid_argument("backprop: trace is not from a train-mode pass");
            double* ggamma = gb + layer.b.size();
            double* gbeta = ggamma + bn.gamma.size();

            dz = Matrix(B, out);
            for (std::size_t o = 0; o < out; ++o) {
                const double inv_std = 1.0 / std::sqrt(lt.batch_var[o] + bn.eps);
                double dgamma = 0.0, dbeta = 0.0;
                double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                for (std::size_t b = 0; b < B; ++b) {
                    const double dyv = dy.at(b, o);
                    const double xh = lt.xhat.at(b, o);
                    dgamma += dyv * xh;
                    dbeta += dyv;
                    const double dxhat = dyv * bn.gamma[o];
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * xh;
                }
                ggamma[o] = dgamma;
                gbeta[o] = dbeta;
                // dz = (inv_std / B) * (B*dxhat - sum(dxhat) - xhat * sum(dxhat*xhat))
                const double nB = static_cast<double>(B);
                for (std::size_t b = 0; b < B; ++b) {
                    const double dxhat = dy.at(b, o) * bn.gamma[o];
                    dz.at(b, o) = (inv_std / nB) *
                                  (nB * dxhat - sum_dxhat - lt.xhat.at(b, o) * sum_dxhat_xhat);
                }
            }
        } else {
            dz = std::move(dy);
        }

        // affine: dW = dz^T * input, db = column sums of dz, dinput = dz * W
        for (std::size_t b = 0; b < B; ++b) {
            const double* dzr = &dz.data[b * out];
            const double* xr = &input.data[b * in];
            for (std::size_t o = 0; o < out; ++o) {
                const double d = dzr[o];
                if (d == 0.0) continue;
                double* gWr = gW + o * in;
                for (std::size_t i = 0; i < in; ++i) gWr[i] += d * xr[i];
                gb[o] += d;
            }
        }
        Matrix dinput(B, in);
        for (std::size_t b = 0; b < B; ++b) {
            const double* dzr = &dz.data[b * out];
            double* dir = &dinput.data[b * in];
            for (std::size_t o = 0; o < out; ++o) {
                const double d = dzr[o];
                if (d == 0.0) continue;
                const double* wr = &layer.W.data[o * in];
                for (std::size_t i = 0; i < in; ++i) dir[i] += d * wr[i];
            }
        }
        dh = std::move(dinput);
    }
    result.input_grad = std::move(dh);
    return result;
}

double mse_loss(const Matrix& output, const Matrix& targets) {
    if (output.rows != targets.rows || output.cols != targets.cols)
        throw std::invalid_argument("mse_loss: shape mismatch");
    double total = 0.0;
    for (std::size_t idx = 0; idx < output.data.size(); ++idx) {
        double d = output.data[idx] - targets.data[idx];
        total += d * d;
    }
    return total / static_cast<double>(output.rows * output.cols);
}

MseBackwardResult mse_backward(const Network& net, const ForwardTrace& trace,
                               const Matrix& targets) {
    const Matrix& output = trace.output();
    MseBackwardResult result;
    result.loss = mse_loss(output, targets);

    Matrix dout(output.rows, output.cols);
    const double scale = 2.0 / static_cast<double>(output.rows * output.cols);
    for (std::size_t idx = 0; idx < output.data.size(); ++idx)
        dout.data[idx] = scale * (output.data[idx] - targets.data[idx]);

    BackpropResult bp = backprop(net, trace, dout);
    result.grads = std::move(bp.grads);
    result.input_grad = std::move(bp.input_grad);
    return result;
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam_step: size mismatch");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

} // namespace dohdet::nn
