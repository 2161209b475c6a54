#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dohdet/autoencoder.hpp"
#include "dohdet/neuralnet.hpp"
#include "dohdet/rng.hpp"

#include <cmath>
#include <stdexcept>

using namespace dohdet;
using nn::Matrix;

namespace {

nn::Layer plain_layer(std::size_t in, std::size_t out, nn::Activation act) {
    nn::Layer layer;
    layer.W = Matrix(out, in);
    layer.b.assign(out, 0.0);
    layer.act = act;
    return layer;
}

nn::Network identity_network(std::size_t width, std::size_t depth) {
    nn::Network net;
    for (std::size_t k = 0; k < depth; ++k) {
        nn::Layer layer = plain_layer(width, width, nn::Activation::Identity);
        for (std::size_t i = 0; i < width; ++i) layer.W.at(i, i) = 1.0;
        net.layers.push_back(std::move(layer));
    }
    return net;
}

Matrix random_batch(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = rng.uniform();
    return m;
}

// central finite differences over the flat parameter vector
std::vector<double> fd_gradients(nn::Network& net, const Matrix& batch, const Matrix& targets,
                                 double step) {
    std::vector<double> params(net.param_count());
    net.copy_params(params);
    std::vector<double> grads(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + step;
        net.load_params(params);
        double up = nn::mse_loss(nn::forward(net, batch, nn::Mode::Train).output(), targets);
        params[i] = saved - step;
        net.load_params(params);
        double down = nn::mse_loss(nn::forward(net, batch, nn::Mode::Train).output(), targets);
        params[i] = saved;
        grads[i] = (up - down) / (2.0 * step);
    }
    net.load_params(params);
    return grads;
}

double rel_err(double a, double b) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-6});
}

} // namespace

TEST_CASE("identity network reproduces its input") {
    nn::Network net = identity_network(4, 3);
    Rng rng(1);
    Matrix batch = random_batch(5, 4, rng);
    Matrix out = nn::forward(net, batch, nn::Mode::Infer).output();
    for (std::size_t i = 0; i < batch.data.size(); ++i) CHECK(out.data[i] == batch.data[i]);
}

TEST_CASE("single dense ReLU layer, hand arithmetic") {
    nn::Layer layer = plain_layer(1, 1, nn::Activation::ReLU);
    layer.W.at(0, 0) = 2.0;
    layer.b[0] = 1.0;
    nn::Network net;
    net.layers.push_back(layer);

    Matrix in(1, 1);
    in.at(0, 0) = -3.0;
    CHECK(nn::forward(net, in, nn::Mode::Infer).output().at(0, 0) == 0.0);
    in.at(0, 0) = 3.0;
    CHECK(nn::forward(net, in, nn::Mode::Infer).output().at(0, 0) == 7.0);
}

TEST_CASE("batch norm in train mode standardizes a two-sample batch") {
    // identity affine feeding a BN unit: batch {1,3} has mean 2, variance 1
    nn::Layer layer = plain_layer(1, 1, nn::Activation::Identity);
    layer.W.at(0, 0) = 1.0;
    layer.bn = nn::BatchNorm(1);
    nn::Network net;
    net.layers.push_back(layer);

    Matrix batch(2, 1);
    batch.at(0, 0) = 1.0;
    batch.at(1, 0) = 3.0;
    Matrix out = nn::forward(net, batch, nn::Mode::Train).output();
    CHECK(out.at(0, 0) == doctest::Approx(-1.0).epsilon(1e-4)); // (1-2)/sqrt(1+1e-5)
    CHECK(out.at(1, 0) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("batch norm requires at least two samples in train mode") {
    nn::Layer layer = plain_layer(2, 2, nn::Activation::Identity);
    layer.bn = nn::BatchNorm(2);
    nn::Network net;
    net.layers.push_back(layer);
    Matrix one(1, 2);
    CHECK_THROWS_AS(nn::forward(net, one, nn::Mode::Train), std::invalid_argument);
    CHECK_NOTHROW(nn::forward(net, one, nn::Mode::Infer));
}

TEST_CASE("dimension mismatch is rejected") {
    nn::Network net = identity_network(4, 1);
    Matrix bad(2, 3);
    CHECK_THROWS_AS(nn::forward(net, bad, nn::Mode::Infer), std::invalid_argument);
}

TEST_CASE("zero-error batch yields zero gradients") {
    nn::Network net = identity_network(3, 2);
    Rng rng(2);
    Matrix batch = random_batch(4, 3, rng);
    nn::ForwardTrace trace = nn::forward(net, batch, nn::Mode::Train);
    nn::MseBackwardResult r = nn::mse_backward(net, trace, batch);
    CHECK(r.loss == 0.0);
    for (double g : r.grads) CHECK(g == 0.0);
}

TEST_CASE("one-layer scalar network, hand-differentiated") {
    nn::Layer layer = plain_layer(1, 1, nn::Activation::Identity);
    layer.W.at(0, 0) = 1.0;
    nn::Network net;
    net.layers.push_back(layer);

    Matrix x(1, 1), target(1, 1);
    x.at(0, 0) = 2.0;
    target.at(0, 0) = 0.0;
    nn::ForwardTrace trace = nn::forward(net, x, nn::Mode::Train);
    nn::MseBackwardResult r = nn::mse_backward(net, trace, target);
    CHECK(r.loss == 4.0);
    CHECK(r.grads[0] == 8.0); // dL/dW
    CHECK(r.grads[1] == 4.0); // dL/db
}

TEST_CASE("autoencoder stack gradients match central finite differences") {
    ae::Architecture arch{{16, 62, 9}};
    nn::Network net = ae::build_autoencoder(arch, 99);
    Rng rng(3);
    Matrix batch = random_batch(8, 16, rng);

    nn::ForwardTrace trace = nn::forward(net, batch, nn::Mode::Train);
    nn::MseBackwardResult analytic = nn::mse_backward(net, trace, batch);
    std::vector<double> numeric = fd_gradients(net, batch, batch, 1e-5);

    REQUIRE(analytic.grads.size() == numeric.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < numeric.size(); ++i)
        worst = std::max(worst, rel_err(analytic.grads[i], numeric[i]));
    CHECK(worst < 1e-4);
}

TEST_CASE("train-mode batch norm output is standardized before gamma/beta") {
    ae::Architecture arch{{16, 30, 5}};
    nn::Network net = ae::build_autoencoder(arch, 5);
    Rng rng(4);
    Matrix batch = random_batch(32, 16, rng);
    nn::ForwardTrace trace = nn::forward(net, batch, nn::Mode::Train);

    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        if (!net.layers[k].bn) continue;
        const Matrix& xhat = trace.layers[k].xhat;
        for (std::size_t o = 0; o < xhat.cols; ++o) {
            double mean = 0.0;
            for (std::size_t b = 0; b < xhat.rows; ++b) mean += xhat.at(b, o);
            mean /= static_cast<double>(xhat.rows);
            double var = 0.0;
            for (std::size_t b = 0; b < xhat.rows; ++b) {
                double d = xhat.at(b, o) - mean;
                var += d * d;
            }
            var /= static_cast<double>(xhat.rows);
            CHECK(std::fabs(mean) < 1e-6);
            CHECK(std::fabs(var - 1.0) < 1e-4);
        }
    }
}

TEST_CASE("infer-mode forward is deterministic and side-effect-free") {
    ae::Architecture arch{{16, 20, 3}};
    nn::Network net = ae::build_autoencoder(arch, 7);
    Rng rng(8);
    Matrix batch = random_batch(4, 16, rng);

    std::vector<double> before(net.param_count());
    net.copy_params(before);
    std::vector<double> running = net.layers[0].bn->running_mean;

    Matrix out1 = nn::forward(net, batch, nn::Mode::Infer).output();
    Matrix out2 = nn::forward(net, batch, nn::Mode::Infer).output();
    CHECK(out1.data == out2.data);

    std::vector<double> after(net.param_count());
    net.copy_params(after);
    CHECK(before == after);
    CHECK(running == net.layers[0].bn->running_mean);
}

TEST_CASE("loss is non-negative and zero only at equality") {
    Rng rng(9);
    Matrix a = random_batch(3, 5, rng);
    Matrix b = a;
    CHECK(nn::mse_loss(a, b) == 0.0);
    b.at(1, 2) += 0.5;
    CHECK(nn::mse_loss(a, b) > 0.0);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    std::vector<double> params = {1.0, -2.0, 0.5};
    std::vector<double> grads = {0.0, 0.0, 0.0};
    nn::AdamState state(3, 0.001);
    nn::adam_step(state, params, grads);
    CHECK(params == std::vector<double>{1.0, -2.0, 0.5});
    CHECK(state.t == 1);
}

TEST_CASE("adam: first scalar step, hand-evaluated") {
    std::vector<double> params = {1.0};
    std::vector<double> grads = {1.0};
    nn::AdamState state(1, 0.001);
    nn::adam_step(state, params, grads);
    // m_hat = v_hat = 1 after bias correction at t=1
    const double expected = 1.0 - 0.001 * (1.0 / (1.0 + 1e-8));
    CHECK(params[0] == expected);
    CHECK(params[0] == doctest::Approx(0.999).epsilon(1e-6));
}

TEST_CASE("adam: two steps match a scripted oracle") {
    // textbook recurrence replayed independently
    auto oracle = [](double theta, const std::vector<double>& gs, double lr) {
        double m = 0.0, v = 0.0;
        int t = 0;
        for (double g : gs) {
            ++t;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            double mhat = m / (1.0 - std::pow(0.9, t));
            double vhat = v / (1.0 - std::pow(0.999, t));
            theta -= lr * mhat / (std::sqrt(vhat) + 1e-8);
        }
        return theta;
    };

    SUBCASE("scalar, constant gradient") {
        std::vector<double> params = {1.0};
        nn::AdamState state(1, 0.001);
        std::vector<double> g = {1.0};
        nn::adam_step(state, params, g);
        nn::adam_step(state, params, g);
        CHECK(params[0] == doctest::Approx(oracle(1.0, {1.0, 1.0}, 0.001)).epsilon(1e-12));
    }

    SUBCASE("vector, varying gradients") {
        std::vector<double> params = {1.0, -0.5, 2.0};
        std::vector<double> g1 = {0.3, -1.2, 0.0};
        std::vector<double> g2 = {-0.7, 0.4, 2.5};
        nn::AdamState state(3, 0.01);
        nn::adam_step(state, params, g1);
        nn::adam_step(state, params, g2);
        for (std::size_t i = 0; i < params.size(); ++i) {
            double expected = oracle(i == 0 ? 1.0 : (i == 1 ? -0.5 : 2.0), {g1[i], g2[i]}, 0.01);
            CHECK(params[i] == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("adam rejects mismatched sizes") {
    std::vector<double> params = {1.0};
    std::vector<double> grads = {1.0, 2.0};
    nn::AdamState state(1, 0.001);
    CHECK_THROWS_AS(nn::adam_step(state, params, grads), std::invalid_argument);
}
