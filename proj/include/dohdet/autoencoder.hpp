#pragma once

#include "dohdet/flowcore.hpp"
#include "dohdet/neuralnet.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace dohdet::ae {

/// Encoder layer sizes, from the 16-wide input down to the embedding.
/// The decoder mirrors the encoder without duplicating the embedding layer,
/// so [16, 62, 9] expands to the stack 16-62-9-62-16.
struct Architecture {
    std::vector<int> encoder_sizes;

    void validate() const; // first entry 16, strictly decreasing, all positive
    std::vector<int> full_sizes() const;
    std::string to_string() const; // "16,62,9"
    static Architecture parse(const std::string& s);
};

struct TrainConfig {
    int epochs = 30;
    int batch_size = 32;
    double learning_rate = 0.001;
    std::uint64_t seed = 1;
    double bn_momentum = 0.99;
    double bn_eps = 1e-5;
};

/// Trained reconstruction autoencoder plus everything needed to score new
/// flows: the scaler and the benign training-score statistics behind the
/// sigma-rule threshold.
struct TrainedModel {
    Architecture arch;
    nn::Network net;
    Scaler scaler;
    std::uint64_t seed = 0;
    int epochs = 0;
    double train_mse_mean = 0.0;
    double train_mse_std = 0.0;
};

/// Mirrored encoder/decoder stack with He-uniform weights. Hidden layers are
/// batch-normalized ReLU; the output layer is a plain affine map.
nn::Network build_autoencoder(const Architecture& arch, std::uint64_t seed,
                              double bn_momentum = 0.99, double bn_eps = 1e-5);

/// Trains on scaled benign features with shuffled mini-batch Adam on the
/// reconstruction MSE. Deterministic for a given config.
TrainedModel train_autoencoder(const Architecture& arch,
                               const std::vector<FeatureVector>& scaled_features,
                               const TrainConfig& config, const Scaler& scaler);

/// Reconstruction MSE of a scaled feature vector (Infer-mode forward).
/// Rejects inputs outside [0,1], which indicate the scaler was skipped.
double reconstruction_mse(const TrainedModel& model, const FeatureVector& scaled);

/// Applies the model's scaler, then reconstruction_mse.
double score_raw(const TrainedModel& model, const FeatureVector& raw);

struct VaeConfig {
    TrainConfig train;
    double kl_weight = 1.0;
};

/// Variational variant: the embedding layer is replaced by mean/log-variance
/// heads and the loss gains a KL term. Scoring is deterministic (z = mean).
struct VaeModel {
    Architecture arch;
    nn::Network trunk;    // 16 -> ... -> last hidden width
    nn::Layer mean_head;  // hidden -> p
    nn::Layer logvar_head;
    nn::Network decoder; // p -> ... -> 16
    Scaler scaler;
    std::uint64_t seed = 0;
    int epochs = 0;
    double kl_weight = 1.0;
    double train_score_mean = 0.0;
    double train_score_std = 0.0;
};

VaeModel build_vae(const Architecture& arch, std::uint64_t seed, double bn_momentum = 0.99,
                   double bn_eps = 1e-5);

VaeModel train_vae(const Architecture& arch, const std::vector<FeatureVector>& scaled_features,
                   const VaeConfig& config, const Scaler& scaler);

double vae_score(const VaeModel& model, const FeatureVector& scaled);
double vae_score_raw(const VaeModel& model, const FeatureVector& raw);

/// KL(N(mean, exp(logvar)) || N(0, I)) summed over dimensions.
double gaussian_kl(const std::vector<double>& mean, const std::vector<double>& logvar);

/// One VAE training objective evaluation on a batch (used by tests):
/// mean over the batch of per-sample MSE + kl_weight * KL.
double vae_batch_loss(const VaeModel& model, const nn::Matrix& batch, const nn::Matrix& eps,
                      double kl_weight);

// Versioned JSON model files; save -> load -> save is byte-identical.
void save_model(const TrainedModel& model, const std::string& path);
void save_model(const VaeModel& model, const std::string& path);
std::string model_to_json(const TrainedModel& model);
std::string model_to_json(const VaeModel& model);

enum class ModelKind { Autoencoder, Vae };
ModelKind peek_model_kind(const std::string& path);
TrainedModel load_model(const std::string& path);
VaeModel load_vae_model(const std::string& path);

} // namespace dohdet::ae
