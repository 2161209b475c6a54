#include "dohdet/autoencoder.hpp"

#include "dohdet/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

using nlohmann::json;

namespace dohdet::ae {

void Architecture::validate() const {
    if (encoder_sizes.size() < 2)
        throw std::invalid_argument("architecture: need at least input and embedding sizes");
    if (encoder_sizes.front() != static_cast<int>(kFeatureCount))
        throw std::invalid_argument("architecture: input layer must have 16 neurons");
    for (std::size_t i = 0; i < encoder_sizes.size(); ++i) {
        if (encoder_sizes[i] < 1)
            throw std::invalid_argument("architecture: layer sizes must be positive");
        if (i > 0 && encoder_sizes[i] >= encoder_sizes[i - 1])
            throw std::invalid_argument("architecture: encoder sizes must strictly decrease");
    }
}

std::vector<int> Architecture::full_sizes() const {
    validate();
    std::vector<int> sizes = encoder_sizes;
    for (std::size_t i = encoder_sizes.size() - 1; i-- > 0;)
        sizes.push_back(encoder_sizes[i]);
    return sizes;
}

std::string Architecture::to_string() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < encoder_sizes.size(); ++i) {
        if (i > 0) os << ',';
        os << encoder_sizes[i];
    }
    return os.str();
}

Architecture Architecture::parse(const std::string& s) {
    Architecture arch;
    std::size_t begin = 0;
    while (begin <= s.size()) {
        auto comma = s.find(',', begin);
        std::string token = s.substr(begin, comma == std::string::npos ? comma : comma - begin);
        // tolerate spaces, as in "16, 62, 9"
        std::erase(token, ' ');
        try {
            std::size_t pos = 0;
            int v = std::stoi(token, &pos);
            if (pos != token.size()) throw std::invalid_argument(token);
            arch.encoder_sizes.push_back(v);
        } catch (const std::exception&) {
            throw std::invalid_argument("architecture: bad size '" + token + "' in '" + s + "'");
        }
        if (comma == std::string::npos) break;
        begin = comma + 1;
    }
    arch.validate();
    return arch;
}

nn::Network build_autoencoder(const Architecture& arch, std::uint64_t seed, double bn_momentum,
                              double bn_eps) {
    std::vector<int> sizes = arch.full_sizes();
    Rng rng(seed);
    nn::Network net;
    for (std::size_t k = 1; k < sizes.size(); ++k) {
        bool last = k + 1 == sizes.size();
        net.layers.push_back(nn::make_layer(
            static_cast<std::size_t>(sizes[k - 1]), static_cast<std::size_t>(sizes[k]),
            last ? nn::Activation::Identity : nn::Activation::ReLU, !last, rng, bn_momentum,
            bn_eps));
    }
    return net;
}

namespace {

void check_scaled(const std::vector<FeatureVector>& features, const char* who) {
    for (const FeatureVector& f : features)
        for (double v : f)
            if (!(v >= 0.0 && v <= 1.0))
                throw std::invalid_argument(std::string(who) +
                                            ": features must be scaled to [0,1]");
}

nn::Matrix to_matrix(const std::vector<FeatureVector>& features) {
    nn::Matrix m(features.size(), kFeatureCount);
    for (std::size_t r = 0; r < features.size(); ++r)
        for (std::size_t c = 0; c < kFeatureCount; ++c) m.at(r, c) = features[r][c];
    return m;
}

nn::Matrix gather_rows(const nn::Matrix& all, const std::vector<std::size_t>& idx,
                       std::size_t begin, std::size_t end) {
    nn::Matrix m(end - begin, all.cols);
    for (std::size_t r = begin; r < end; ++r)
        std::copy_n(&all.data[idx[r] * all.cols], all.cols, &m.data[(r - begin) * all.cols]);
    return m;
}

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i-- > 1;) {
        std::size_t j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)));
        std::swap(idx[i], idx[j]);
    }
}

struct MseStats {
    double mean = 0.0;
    double stddev = 0.0;
};

MseStats per_sample_mse_stats(const std::vector<double>& scores) {
    MseStats stats;
    for (double s : scores) stats.mean += s;
    stats.mean /= static_cast<double>(scores.size());
    double ss = 0.0;
    for (double s : scores) ss += (s - stats.mean) * (s - stats.mean);
    stats.stddev = std::sqrt(ss / static_cast<double>(scores.size()));
    return stats;
}

double sample_mse(const nn::Matrix& out, std::size_t row, const nn::Matrix& target) {
    double total = 0.0;
    for (std::size_t c = 0; c < out.cols; ++c) {
        double d = out.at(row, c) - target.at(row, c);
        total += d * d;
    }
    return total / static_cast<double>(out.cols);
}

} // namespace

TrainedModel train_autoencoder(const Architecture& arch,
                               const std::vector<FeatureVector>& scaled_features,
                               const TrainConfig& config, const Scaler& scaler) {
    arch.validate();
    if (config.batch_size < 2) throw std::invalid_argument("train: batch size must be >= 2");
    if (scaled_features.size() < static_cast<std::size_t>(config.batch_size))
        throw std::invalid_argument("train: fewer samples than batch size");
    check_scaled(scaled_features, "train");

    Rng rng(config.seed);
    nn::Network net;
    {
        // weight init and shuffling share one seed stream
        std::vector<int> sizes = arch.full_sizes();
        for (std::size_t k = 1; k < sizes.size(); ++k) {
            bool last = k + 1 == sizes.size();
            net.layers.push_back(nn::make_layer(
                static_cast<std::size_t>(sizes[k - 1]), static_cast<std::size_t>(sizes[k]),
                last ? nn::Activation::Identity : nn::Activation::ReLU, !last, rng,
                config.bn_momentum, config.bn_eps));
        }
    }

    const nn::Matrix all = to_matrix(scaled_features);
    const std::size_t n = all.rows;
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;

    std::vector<double> params(net.param_count());
    nn::AdamState adam(params.size(), config.learning_rate);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_indices(idx, rng);
        for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
            std::size_t end = std::min(n, begin + config.batch_size);
            if (end - begin < 2) break; // final partial batch too small for batch norm
            nn::Matrix batch = gather_rows(all, idx, begin, end);

            nn::ForwardTrace trace = nn::forward(net, batch, nn::Mode::Train);
            nn::update_running_stats(net, trace);
            nn::MseBackwardResult bw = nn::mse_backward(net, trace, batch);
            if (!std::isfinite(bw.loss))
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch " +
                                         std::to_string(begin / config.batch_size));

            net.copy_params(params);
            nn::adam_step(adam, params, bw.grads);
            net.load_params(params);
        }
    }

    TrainedModel model;
    model.arch = arch;
    model.net = std::move(net);
    model.scaler = scaler;
    model.seed = config.seed;
    model.epochs = config.epochs;

    nn::ForwardTrace trace = nn::forward(model.net, all, nn::Mode::Infer);
    std::vector<double> scores(n);
    for (std::size_t r = 0; r < n; ++r) scores[r] = sample_mse(trace.output(), r, all);
    MseStats stats = per_sample_mse_stats(scores);
    model.train_mse_mean = stats.mean;
    model.train_mse_std = stats.stddev;
    return model;
}

double reconstruction_mse(const TrainedModel& model, const FeatureVector& scaled) {
    nn::Matrix input(1, kFeatureCount);
    for (std::size_t c = 0; c < kFeatureCount; ++c) {
        if (!(scaled[c] >= 0.0 && scaled[c] <= 1.0))
            throw std::invalid_argument("reconstruction_mse: input not scaled to [0,1]");
        input.at(0, c) = scaled[c];
    }
    nn::ForwardTrace trace = nn::forward(model.net, input, nn::Mode::Infer);
    return sample_mse(trace.output(), 0, input);
}

double score_raw(const TrainedModel& model, const FeatureVector& raw) {
    return reconstruction_mse(model, model.scaler.apply(raw));
}

// ---------------------------------------------------------------------------
// VAE

namespace {

nn::Matrix head_forward(const nn::Layer& head, const nn::Matrix& a) {
    const std::size_t B = a.rows, in = head.in_size(), out = head.out_size();
    nn::Matrix r(B, out);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t o = 0; o < out; ++o) {
            double acc = head.b[o];
            for (std::size_t i = 0; i < in; ++i) acc += head.W.at(o, i) * a.at(b, i);
            r.at(b, o) = acc;
        }
    return r;
}

// Accumulates head gradients into gW/gb and returns dL/d(input).
nn::Matrix head_backward(const nn::Layer& head, const nn::Matrix& a, const nn::Matrix& dout,
                         double* gW, double* gb) {
    const std::size_t B = a.rows, in = head.in_size(), out = head.out_size();
    nn::Matrix da(B, in);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t o = 0; o < out; ++o) {
            const double d = dout.at(b, o);
            gb[o] += d;
            for (std::size_t i = 0; i < in; ++i) {
                gW[o * in + i] += d * a.at(b, i);
                da.at(b, i) += d * head.W.at(o, i);
            }
        }
    return da;
}

std::size_t layer_param_count(const nn::Layer& layer) {
    std::size_t n = layer.W.data.size() + layer.b.size();
    if (layer.bn) n += 2 * layer.bn->gamma.size();
    return n;
}

std::size_t vae_param_count(const VaeModel& m) {
    return m.trunk.param_count() + layer_param_count(m.mean_head) +
           layer_param_count(m.logvar_head) + m.decoder.param_count();
}

void vae_copy_params(const VaeModel& m, std::span<double> out) {
    std::size_t pos = 0;
    m.trunk.copy_params(out.subspan(pos, m.trunk.param_count()));
    pos += m.trunk.param_count();
    auto put_layer = [&](const nn::Layer& layer) {
        for (double v : layer.W.data) out[pos++] = v;
        for (double v : layer.b) out[pos++] = v;
    };
    put_layer(m.mean_head);
    put_layer(m.logvar_head);
    m.decoder.copy_params(out.subspan(pos, m.decoder.param_count()));
}

void vae_load_params(VaeModel& m, std::span<const double> in) {
    std::size_t pos = 0;
    m.trunk.load_params(in.subspan(pos, m.trunk.param_count()));
    pos += m.trunk.param_count();
    auto take_layer = [&](nn::Layer& layer) {
        for (double& v : layer.W.data) v = in[pos++];
        for (double& v : layer.b) v = in[pos++];
    };
    take_layer(m.mean_head);
    take_layer(m.logvar_head);
    m.decoder.load_params(in.subspan(pos, m.decoder.param_count()));
}

struct VaeBatchTrace {
    nn::ForwardTrace trunk;
    nn::Matrix mean, logvar, z;
    nn::ForwardTrace dec;
};

VaeBatchTrace vae_forward(const VaeModel& m, const nn::Matrix& batch, const nn::Matrix* eps,
                          nn::Mode mode) {
    VaeBatchTrace t;
    t.trunk = nn::forward(m.trunk, batch, mode);
    const nn::Matrix& a = t.trunk.output();
    t.mean = head_forward(m.mean_head, a);
    t.logvar = head_forward(m.logvar_head, a);
    if (eps) {
        t.z = t.mean;
        for (std::size_t i = 0; i < t.z.data.size(); ++i)
            t.z.data[i] += std::exp(0.5 * t.logvar.data[i]) * eps->data[i];
    } else {
        t.z = t.mean;
    }
    t.dec = nn::forward(m.decoder, t.z, mode);
    return t;
}

} // namespace

double gaussian_kl(const std::vector<double>& mean, const std::vector<double>& logvar) {
    if (mean.size() != logvar.size())
        throw std::invalid_argument("gaussian_kl: size mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < mean.size(); ++i)
        kl += 0.5 * (mean[i] * mean[i] + std::exp(logvar[i]) - logvar[i] - 1.0);
    return kl;
}

VaeModel build_vae(const Architecture& arch, std::uint64_t seed, double bn_momentum,
                   double bn_eps) {
    arch.validate();
    VaeModel m;
    m.arch = arch;
    m.seed = seed;
    Rng rng(seed);

    const std::vector<int>& enc = arch.encoder_sizes;
    const std::size_t p = static_cast<std::size_t>(enc.back());
    const std::size_t hidden = static_cast<std::size_t>(enc[enc.size() - 2]);

    for (std::size_t k = 1; k + 1 < enc.size(); ++k)
        m.trunk.layers.push_back(nn::make_layer(static_cast<std::size_t>(enc[k - 1]),
                                                static_cast<std::size_t>(enc[k]),
                                                nn::Activation::ReLU, true, rng, bn_momentum,
                                                bn_eps));
    m.mean_head = nn::make_layer(hidden, p, nn::Activation::Identity, false, rng);
    m.logvar_head = nn::make_layer(hidden, p, nn::Activation::Identity, false, rng);

    std::vector<int> dec_sizes(enc.rbegin(), enc.rend());
    for (std::size_t k = 1; k < dec_sizes.size(); ++k) {
        bool last = k + 1 == dec_sizes.size();
        m.decoder.layers.push_back(nn::make_layer(
            static_cast<std::size_t>(dec_sizes[k - 1]), static_cast<std::size_t>(dec_sizes[k]),
            last ? nn::Activation::Identity : nn::Activation::ReLU, !last, rng, bn_momentum,
            bn_eps));
    }
    return m;
}

double vae_batch_loss(const VaeModel& model, const nn::Matrix& batch, const nn::Matrix& eps,
                      double kl_weight) {
    VaeBatchTrace t = vae_forward(model, batch, &eps, nn::Mode::Train);
    double loss = nn::mse_loss(t.dec.output(), batch);
    const std::size_t B = batch.rows, p = t.mean.cols;
    double kl = 0.0;
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t j = 0; j < p; ++j) {
            double mu = t.mean.at(b, j), lv = t.logvar.at(b, j);
            kl += 0.5 * (mu * mu + std::exp(lv) - lv - 1.0);
        }
    return loss + kl_weight * kl / static_cast<double>(B);
}

VaeModel train_vae(const Architecture& arch, const std::vector<FeatureVector>& scaled_features,
                   const VaeConfig& config, const Scaler& scaler) {
    if (config.kl_weight < 0.0) throw std::invalid_argument("train_vae: kl_weight must be >= 0");
    if (config.train.batch_size < 2)
        throw std::invalid_argument("train_vae: batch size must be >= 2");
    if (scaled_features.size() < static_cast<std::size_t>(config.train.batch_size))
        throw std::invalid_argument("train_vae: fewer samples than batch size");
    check_scaled(scaled_features, "train_vae");

    VaeModel model = build_vae(arch, config.train.seed, config.train.bn_momentum,
                               config.train.bn_eps);
    model.kl_weight = config.kl_weight;
    model.epochs = config.train.epochs;
    model.scaler = scaler;

    Rng rng(derive_seed(config.train.seed, 0x7AE5)); // shuffle + noise stream
    const nn::Matrix all = to_matrix(scaled_features);
    const std::size_t n = all.rows;
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;

    const std::size_t total_params = vae_param_count(model);
    std::vector<double> params(total_params);
    std::vector<double> grads(total_params);
    nn::AdamState adam(total_params, config.train.learning_rate);

    const std::size_t trunk_n = model.trunk.param_count();
    const std::size_t head_n = layer_param_count(model.mean_head);
    const std::size_t mean_off = trunk_n;
    const std::size_t logvar_off = trunk_n + head_n;
    const std::size_t dec_off = trunk_n + 2 * head_n;

    for (int epoch = 0; epoch < config.train.epochs; ++epoch) {
        shuffle_indices(idx, rng);
        for (std::size_t begin = 0; begin < n; begin += config.train.batch_size) {
            std::size_t end = std::min(n, begin + config.train.batch_size);
            if (end - begin < 2) break;
            nn::Matrix batch = gather_rows(all, idx, begin, end);
            const std::size_t B = batch.rows;

            nn::Matrix eps(B, model.mean_head.out_size());
            for (double& v : eps.data) v = rng.normal();

            VaeBatchTrace t = vae_forward(model, batch, &eps, nn::Mode::Train);
            nn::update_running_stats(model.trunk, t.trunk);
            nn::update_running_stats(model.decoder, t.dec);

            const nn::Matrix& xhat = t.dec.output();
            double loss = nn::mse_loss(xhat, batch);
            const std::size_t p = t.mean.cols;
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t j = 0; j < p; ++j) {
                    double mu = t.mean.at(b, j), lv = t.logvar.at(b, j);
                    loss += config.kl_weight * 0.5 * (mu * mu + std::exp(lv) - lv - 1.0) /
                            static_cast<double>(B);
                }
            if (!std::isfinite(loss))
                throw std::runtime_error("train_vae: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch " +
                                         std::to_string(begin / config.train.batch_size));

            std::fill(grads.begin(), grads.end(), 0.0);

            // reconstruction gradient through the decoder
            nn::Matrix dxhat(B, xhat.cols);
            const double scale = 2.0 / static_cast<double>(B * xhat.cols);
            for (std::size_t i = 0; i < dxhat.data.size(); ++i)
                dxhat.data[i] = scale * (xhat.data[i] - batch.data[i]);
            nn::BackpropResult dec_bp = nn::backprop(model.decoder, t.dec, dxhat);
            std::copy(dec_bp.grads.begin(), dec_bp.grads.end(), grads.begin() + dec_off);

            // reparameterization + KL gradients
            const double klw = config.kl_weight / static_cast<double>(B);
            nn::Matrix dmean = dec_bp.input_grad;
            nn::Matrix dlogvar(B, p);
            for (std::size_t i = 0; i < dmean.data.size(); ++i) {
                dmean.data[i] += klw * t.mean.data[i];
                dlogvar.data[i] = dec_bp.input_grad.data[i] * eps.data[i] *
                                      std::exp(0.5 * t.logvar.data[i]) * 0.5 +
                                  klw * 0.5 * (std::exp(t.logvar.data[i]) - 1.0);
            }

            const nn::Matrix& a = t.trunk.output();
            nn::Matrix da = head_backward(model.mean_head, a, dmean, &grads[mean_off],
                                          &grads[mean_off + model.mean_head.W.data.size()]);
            nn::Matrix da2 = head_backward(model.logvar_head, a, dlogvar, &grads[logvar_off],
                                           &grads[logvar_off + model.logvar_head.W.data.size()]);
            for (std::size_t i = 0; i < da.data.size(); ++i) da.data[i] += da2.data[i];

            if (!model.trunk.layers.empty()) {
                nn::BackpropResult trunk_bp = nn::backprop(model.trunk, t.trunk, da);
                std::copy(trunk_bp.grads.begin(), trunk_bp.grads.end(), grads.begin());
            }

            vae_copy_params(model, params);
            nn::adam_step(adam, params, grads);
            vae_load_params(model, params);
        }
    }

    std::vector<double> scores(n);
    for (std::size_t r = 0; r < n; ++r) {
        nn::Matrix one(1, kFeatureCount);
        std::copy_n(&all.data[r * kFeatureCount], kFeatureCount, one.data.begin());
        VaeBatchTrace t = vae_forward(model, one, nullptr, nn::Mode::Infer);
        scores[r] = sample_mse(t.dec.output(), 0, one);
    }
    MseStats stats = per_sample_mse_stats(scores);
    model.train_score_mean = stats.mean;
    model.train_score_std = stats.stddev;
    return model;
}

double vae_score(const VaeModel& model, const FeatureVector& scaled) {
    nn::Matrix input(1, kFeatureCount);
    for (std::size_t c = 0; c < kFeatureCount; ++c) {
        if (!(scaled[c] >= 0.0 && scaled[c] <= 1.0))
            throw std::invalid_argument("vae_score: input not scaled to [0,1]");
        input.at(0, c) = scaled[c];
    }
    VaeBatchTrace t = vae_forward(model, input, nullptr, nn::Mode::Infer);
    return sample_mse(t.dec.output(), 0, input);
}

double vae_score_raw(const VaeModel& model, const FeatureVector& raw) {
    return vae_score(model, model.scaler.apply(raw));
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json layer_to_json(const nn::Layer& layer) {
    json j;
    j["in"] = layer.in_size();
    j["out"] = layer.out_size();
    j["activation"] = nn::to_string(layer.act);
    j["W"] = layer.W.data;
    j["b"] = layer.b;
    if (layer.bn) {
        j["batch_norm"] = {{"gamma", layer.bn->gamma},
                           {"beta", layer.bn->beta},
                           {"running_mean", layer.bn->running_mean},
                           {"running_var", layer.bn->running_var},
                           {"momentum", layer.bn->momentum},
                           {"eps", layer.bn->eps}};
    } else {
        j["batch_norm"] = nullptr;
    }
    return j;
}

nn::Layer layer_from_json(const json& j) {
    nn::Layer layer;
    std::size_t in = j.at("in").get<std::size_t>();
    std::size_t out = j.at("out").get<std::size_t>();
    auto act = nn::activation_from_string(j.at("activation").get<std::string>());
    if (!act) throw InputError("model file: unknown activation");
    layer.act = *act;
    layer.W = nn::Matrix(out, in);
    layer.W.data = j.at("W").get<std::vector<double>>();
    layer.b = j.at("b").get<std::vector<double>>();
    if (layer.W.data.size() != in * out || layer.b.size() != out)
        throw InputError("model file: layer shape mismatch");
    if (!j.at("batch_norm").is_null()) {
        const json& bj = j.at("batch_norm");
        nn::BatchNorm bn(out);
        bn.gamma = bj.at("gamma").get<std::vector<double>>();
        bn.beta = bj.at("beta").get<std::vector<double>>();
        bn.running_mean = bj.at("running_mean").get<std::vector<double>>();
        bn.running_var = bj.at("running_var").get<std::vector<double>>();
        bn.momentum = bj.at("momentum").get<double>();
        bn.eps = bj.at("eps").get<double>();
        if (bn.gamma.size() != out || bn.beta.size() != out || bn.running_mean.size() != out ||
            bn.running_var.size() != out)
            throw InputError("model file: batch-norm shape mismatch");
        layer.bn = std::move(bn);
    }
    return layer;
}

json scaler_to_json(const Scaler& scaler) {
    return {{"min", std::vector<double>(scaler.min().begin(), scaler.min().end())},
            {"max", std::vector<double>(scaler.max().begin(), scaler.max().end())}};
}

Scaler scaler_from_json(const json& j) {
    auto lo = j.at("min").get<std::vector<double>>();
    auto hi = j.at("max").get<std::vector<double>>();
    if (lo.size() != kFeatureCount || hi.size() != kFeatureCount)
        throw InputError("model file: scaler must have 16 columns");
    FeatureVector mn{}, mx{};
    std::copy(lo.begin(), lo.end(), mn.begin());
    std::copy(hi.begin(), hi.end(), mx.begin());
    return Scaler(mn, mx);
}

json model_json_common(const Architecture& arch, const Scaler& scaler, std::uint64_t seed,
                       int epochs, double mean, double stddev) {
    json j;
    j["format_version"] = 1;
    j["architecture"] = arch.encoder_sizes;
    j["hidden_activation"] = "relu";
    j["output_activation"] = "identity";
    j["scaler"] = scaler_to_json(scaler);
    j["training"] = {{"seed", seed}, {"epochs", epochs}, {"mse_mean", mean}, {"mse_std", stddev}};
    return j;
}

json parse_model_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open model file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InputError(path + ": invalid model JSON: " + e.what());
    }
    if (!j.contains("format_version") || j["format_version"].get<int>() != 1)
        throw InputError(path + ": unsupported model format version");
    return j;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open output file: " + path);
    out << text;
}

} // namespace

std::string model_to_json(const TrainedModel& model) {
    json j = model_json_common(model.arch, model.scaler, model.seed, model.epochs,
                               model.train_mse_mean, model.train_mse_std);
    j["model_type"] = "autoencoder";
    json layers = json::array();
    for (const nn::Layer& layer : model.net.layers) layers.push_back(layer_to_json(layer));
    j["layers"] = std::move(layers);
    return j.dump(2) + "\n";
}

std::string model_to_json(const VaeModel& model) {
    json j = model_json_common(model.arch, model.scaler, model.seed, model.epochs,
                               model.train_score_mean, model.train_score_std);
    j["model_type"] = "vae";
    j["kl_weight"] = model.kl_weight;
    json trunk = json::array();
    for (const nn::Layer& layer : model.trunk.layers) trunk.push_back(layer_to_json(layer));
    j["trunk"] = std::move(trunk);
    j["mean_head"] = layer_to_json(model.mean_head);
    j["logvar_head"] = layer_to_json(model.logvar_head);
    json dec = json::array();
    for (const nn::Layer& layer : model.decoder.layers) dec.push_back(layer_to_json(layer));
    j["decoder"] = std::move(dec);
    return j.dump(2) + "\n";
}

void save_model(const TrainedModel& model, const std::string& path) {
    write_text_file(path, model_to_json(model));
}

void save_model(const VaeModel& model, const std::string& path) {
    write_text_file(path, model_to_json(model));
}

ModelKind peek_model_kind(const std::string& path) {
    json j = parse_model_file(path);
    std::string kind = j.at("model_type").get<std::string>();
    if (kind == "autoencoder") return ModelKind::Autoencoder;
    if (kind == "vae") return ModelKind::Vae;
    throw InputError(path + ": unknown model_type '" + kind + "'");
}

TrainedModel load_model(const std::string& path) {
    json j = parse_model_file(path);
    if (j.at("model_type").get<std::string>() != "autoencoder")
        throw InputError(path + ": not an autoencoder model file");

    TrainedModel model;
    model.arch.encoder_sizes = j.at("architecture").get<std::vector<int>>();
    model.arch.validate();
    for (const json& lj : j.at("layers")) model.net.layers.push_back(layer_from_json(lj));

    std::vector<int> sizes = model.arch.full_sizes();
    if (model.net.layers.size() + 1 != sizes.size())
        throw InputError(path + ": layer count does not match architecture");
    for (std::size_t k = 0; k < model.net.layers.size(); ++k) {
        if (model.net.layers[k].in_size() != static_cast<std::size_t>(sizes[k]) ||
            model.net.layers[k].out_size() != static_cast<std::size_t>(sizes[k + 1]))
            throw InputError(path + ": layer shape does not match architecture");
    }

    model.scaler = scaler_from_json(j.at("scaler"));
    const json& t = j.at("training");
    model.seed = t.at("seed").get<std::uint64_t>();
    model.epochs = t.at("epochs").get<int>();
    model.train_mse_mean = t.at("mse_mean").get<double>();
    model.train_mse_std = t.at("mse_std").get<double>();
    return model;
}

VaeModel load_vae_model(const std::string& path) {
    json j = parse_model_file(path);
    if (j.at("model_type").get<std::string>() != "vae")
        throw InputError(path + ": not a vae model file");

    VaeModel model;
    model.arch.encoder_sizes = j.at("architecture").get<std::vector<int>>();
    model.arch.validate();
    for (const json& lj : j.at("trunk")) model.trunk.layers.push_back(layer_from_json(lj));
    model.mean_head = layer_from_json(j.at("mean_head"));
    model.logvar_head = layer_from_json(j.at("logvar_head"));
    for (const json& lj : j.at("decoder")) model.decoder.layers.push_back(layer_from_json(lj));
    model.kl_weight = j.at("kl_weight").get<double>();
    model.scaler = scaler_from_json(j.at("scaler"));
    const json& t = j.at("training");
    model.seed = t.at("seed").get<std::uint64_t>();
    model.epochs = t.at("epochs").get<int>();
    model.train_score_mean = t.at("mse_mean").get<double>();
    model.train_score_std = t.at("mse_std").get<double>();
    return model;
}

} // namespace dohdet::ae
