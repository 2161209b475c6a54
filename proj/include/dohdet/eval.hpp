#pragma once

#include "dohdet/autoencoder.hpp"
#include "dohdet/baselines.hpp"
#include "dohdet/detect.hpp"
#include "dohdet/flowcore.hpp"
#include "dohdet/synth.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace dohdet::eval {

/// Seeded shuffle of 0..n-1 followed by a contiguous partition into k folds.
/// Fold sizes differ by at most one.
struct FoldPlan {
    int k = 0;
    std::uint64_t seed = 0;
    std::vector<std::vector<std::size_t>> test_folds;

    std::vector<std::size_t> train_indices(int fold) const;
};

FoldPlan make_folds(std::size_t n, int k, std::uint64_t seed);

struct LabeledSet {
    std::vector<FeatureVector> features;
    std::vector<bool> malicious;
};

/// Benign test flows plus malicious samples drawn without replacement so the
/// malicious share of the final set is as close to `ratio` as possible
/// (m = round(ratio/(1-ratio) * benign count)).
LabeledSet compose_test_set(const std::vector<FeatureVector>& benign_test,
                            const std::vector<FeatureVector>& malicious_pool, double ratio,
                            std::uint64_t seed);

struct Metrics {
    double f1 = 0.0;
    double accuracy = 0.0;
    double auc = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    long tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Confusion metrics with malicious as the positive class; AUC uses the
/// rank-statistic form with average ranks for ties.
Metrics compute_metrics(const std::vector<detect::Verdict>& predictions,
                        const std::vector<bool>& labels, const std::vector<double>& scores);

double rank_auc(const std::vector<double>& scores, const std::vector<bool>& labels);

enum class DetectorKind { Autoencoder, Vae, IForest, Lof };
const char* to_string(DetectorKind kind);
std::optional<DetectorKind> detector_from_string(const std::string& s);

struct ExperimentConfig {
    ae::Architecture arch{{16, 62, 9}};
    ae::Architecture vae_arch{{16, 50, 26, 3}};
    ae::TrainConfig train;
    double kl_weight = 1.0;
    baselines::IsoForestParams iforest;
    int lof_k = 20;
    int folds = 5;
    double malicious_ratio = 0.30;
    std::uint64_t seed = 1;
    detect::RocObjective objective = detect::RocObjective::YoudenJ;
    /// 0 selects the ROC threshold; a positive value selects the sigma rule
    /// (autoencoder and VAE only).
    int sigma_s = 0;
};

struct FoldResult {
    Metrics metrics;
    double threshold = 0.0;
    std::vector<detect::RocPoint> roc;
};

struct EvalReport {
    std::string server = "cloudflare";
    std::string malware;
    std::string detector;
    std::vector<FoldResult> folds;
    Metrics median;  // per-metric median across folds
    Metrics stddev;  // per-metric population standard deviation across folds
};

/// One (benign, malicious) dataset pair: per fold, train on the benign split,
/// score the composed test set, threshold, and compute metrics.
EvalReport run_experiment(DetectorKind detector, const std::vector<FeatureVector>& benign_raw,
                          const std::vector<FeatureVector>& malicious_raw,
                          const ExperimentConfig& config);

/// The five benign sources x six malicious classes protocol. Per server and
/// fold, each detector is trained once and reused across malicious classes.
struct GridConfig {
    std::vector<ServerTag> servers = {ServerTag::AdGuard, ServerTag::Google, ServerTag::Quad9,
                                      ServerTag::Cloudflare, ServerTag::Proxy};
    std::vector<FlowLabel> malware = {FlowLabel::DgaSc,   FlowLabel::DgaScRw, FlowLabel::DgaMc,
                                      FlowLabel::Dns2tcp, FlowLabel::Dnscat2, FlowLabel::Iodine};
    std::vector<DetectorKind> detectors = {DetectorKind::Autoencoder, DetectorKind::IForest,
                                           DetectorKind::Lof, DetectorKind::Vae};
    ExperimentConfig base;
    std::size_t benign_count = 2350;
    std::size_t pool_size = 600;
    int jobs = 1;
};

std::vector<EvalReport> run_grid(const GridConfig& config);

/// Architecture sweep over one benign source and a set of malicious pools;
/// per-architecture metrics aggregate all (fold x malware) values. Rows come
/// back sorted by median F1, descending. Invalid architectures are skipped
/// and reported via the returned skip list.
struct SweepRow {
    ae::Architecture arch;
    Metrics median;
    Metrics stddev;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<std::string> skipped; // "arch: reason"
};

SweepResult sweep_architectures(const std::vector<std::string>& arch_specs,
                                const GridConfig& config);

/// The ten stock architectures used as the default sweep grid.
std::vector<std::string> default_sweep_grid();

// CSV writers. Report rows:
//   server,malware,fold,f1,accuracy,auc,precision,recall,tp,fp,fn,tn,threshold
void write_report_csv(std::ostream& out, const std::vector<EvalReport>& reports);
void write_report_csv(const std::string& path, const std::vector<EvalReport>& reports);

/// Rows = benign source, columns = malicious class, cells = median F1.
void write_heatmap_csv(std::ostream& out, const std::vector<EvalReport>& reports,
                       const std::string& detector, const GridConfig& config);
void write_heatmap_csv(const std::string& path, const std::vector<EvalReport>& reports,
                       const std::string& detector, const GridConfig& config);

void write_sweep_csv(std::ostream& out, const SweepResult& result);
void write_sweep_csv(const std::string& path, const SweepResult& result);

} // namespace dohdet::eval
