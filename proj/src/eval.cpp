#include "dohdet/eval.hpp"

#include "dohdet/csv.hpp"
#include "dohdet/errors.hpp"
#include "dohdet/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace dohdet::eval {

std::vector<std::size_t> FoldPlan::train_indices(int fold) const {
    std::vector<std::size_t> train;
    for (int f = 0; f < k; ++f) {
        if (f == fold) continue;
        train.insert(train.end(), test_folds[static_cast<std::size_t>(f)].begin(),
                     test_folds[static_cast<std::size_t>(f)].end());
    }
    return train;
}

FoldPlan make_folds(std::size_t n, int k, std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("make_folds: k must be positive");
    if (n < static_cast<std::size_t>(k))
        throw std::invalid_argument("make_folds: need at least k samples");

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (std::size_t i = n; i-- > 1;) {
        std::size_t j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)));
        std::swap(idx[i], idx[j]);
    }

    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.test_folds.resize(static_cast<std::size_t>(k));
    const std::size_t base = n / static_cast<std::size_t>(k);
    const std::size_t extra = n % static_cast<std::size_t>(k);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < static_cast<std::size_t>(k); ++f) {
        std::size_t size = base + (f < extra ? 1 : 0);
        plan.test_folds[f].assign(idx.begin() + static_cast<std::ptrdiff_t>(pos),
                                  idx.begin() + static_cast<std::ptrdiff_t>(pos + size));
        pos += size;
    }
    return plan;
}

LabeledSet compose_test_set(const std::vector<FeatureVector>& benign_test,
                            const std::vector<FeatureVector>& malicious_pool, double ratio,
                            std::uint64_t seed) {
    if (ratio < 0.0 || ratio >= 1.0)
        throw std::invalid_argument("compose_test_set: ratio must be in [0,1)");
    const std::size_t m = static_cast<std::size_t>(
        std::lround(ratio / (1.0 - ratio) * static_cast<double>(benign_test.size())));
    if (malicious_pool.size() < m)
        throw std::invalid_argument("compose_test_set: malicious pool too small (" +
                                    std::to_string(malicious_pool.size()) + " < " +
                                    std::to_string(m) + ")");

    LabeledSet set;
    set.features = benign_test;
    set.malicious.assign(benign_test.size(), false);

    // partial Fisher-Yates: sample m pool indices without replacement
    std::vector<std::size_t> idx(malicious_pool.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t j = static_cast<std::size_t>(rng.uniform_int(
            static_cast<std::int64_t>(i), static_cast<std::int64_t>(idx.size()) - 1));
        std::swap(idx[i], idx[j]);
        set.features.push_back(malicious_pool[idx[i]]);
        set.malicious.push_back(true);
    }
    return set;
}

double rank_auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
    std::size_t n_pos = 0;
    for (bool b : labels) n_pos += b ? 1 : 0;
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("rank_auc: both classes must be present");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        // average rank of the tied block, 1-based
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t t = i; t < j; ++t)
            if (labels[order[t]]) rank_sum_pos += avg_rank;
        i = j;
    }
    const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

Metrics compute_metrics(const std::vector<detect::Verdict>& predictions,
                        const std::vector<bool>& labels, const std::vector<double>& scores) {
    if (predictions.size() != labels.size() || scores.size() != labels.size())
        throw std::invalid_argument("compute_metrics: length mismatch");
    if (labels.empty()) throw std::invalid_argument("compute_metrics: empty input");

    Metrics m;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool predicted = predictions[i] == detect::Verdict::Malicious;
        if (predicted && labels[i]) ++m.tp;
        else if (predicted && !labels[i]) ++m.fp;
        else if (!predicted && labels[i]) ++m.fn;
        else ++m.tn;
    }
    m.precision = m.tp + m.fp > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
    m.recall = m.tp + m.fn > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
    m.f1 = m.precision + m.recall > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(labels.size());
    m.auc = rank_auc(scores, labels);
    return m;
}

const char* to_string(DetectorKind kind) {
    switch (kind) {
        case DetectorKind::Autoencoder: return "autoencoder";
        case DetectorKind::Vae: return "vae";
        case DetectorKind::IForest: return "iforest";
        case DetectorKind::Lof: return "lof";
    }
    return "autoencoder";
}

std::optional<DetectorKind> detector_from_string(const std::string& s) {
    if (s == "autoencoder" || s == "ae") return DetectorKind::Autoencoder;
    if (s == "vae") return DetectorKind::Vae;
    if (s == "iforest" || s == "if") return DetectorKind::IForest;
    if (s == "lof") return DetectorKind::Lof;
    return std::nullopt;
}

namespace {

std::vector<std::vector<double>> to_rows(const std::vector<FeatureVector>& features) {
    std::vector<std::vector<double>> rows;
    rows.reserve(features.size());
    for (const FeatureVector& f : features) rows.emplace_back(f.begin(), f.end());
    return rows;
}

struct FoldDetectors {
    Scaler scaler;
    std::optional<ae::TrainedModel> ae_model;
    std::optional<ae::VaeModel> vae_model;
    std::optional<baselines::IsolationForest> iforest;
    std::optional<baselines::LofModel> lof;
};

FoldDetectors train_fold_detectors(const std::vector<FeatureVector>& benign,
                                   const std::vector<std::size_t>& train_idx,
                                   const std::vector<DetectorKind>& detectors,
                                   const ExperimentConfig& cfg, std::uint64_t train_seed) {
    std::vector<FeatureVector> train_raw;
    train_raw.reserve(train_idx.size());
    for (std::size_t i : train_idx) train_raw.push_back(benign[i]);

    FoldDetectors out;
    out.scaler = fit_scaler(train_raw);
    std::vector<FeatureVector> train_scaled;
    train_scaled.reserve(train_raw.size());
    for (const FeatureVector& f : train_raw) train_scaled.push_back(out.scaler.apply(f));

    for (DetectorKind kind : detectors) {
        const std::uint64_t seed = derive_seed(train_seed, static_cast<std::uint64_t>(kind));
        switch (kind) {
            case DetectorKind::Autoencoder: {
                ae::TrainConfig tc = cfg.train;
                tc.seed = seed;
                out.ae_model = ae::train_autoencoder(cfg.arch, train_scaled, tc, out.scaler);
                break;
            }
            case DetectorKind::Vae: {
                ae::VaeConfig vc;
                vc.train = cfg.train;
                vc.train.seed = seed;
                vc.kl_weight = cfg.kl_weight;
                out.vae_model = ae::train_vae(cfg.vae_arch, train_scaled, vc, out.scaler);
                break;
            }
            case DetectorKind::IForest:
                out.iforest = baselines::IsolationForest::fit(to_rows(train_scaled), cfg.iforest,
                                                              seed);
                break;
            case DetectorKind::Lof:
                out.lof = baselines::LofModel::fit(to_rows(train_scaled), cfg.lof_k);
                break;
        }
    }
    return out;
}

double detector_score(const FoldDetectors& det, DetectorKind kind, const FeatureVector& scaled) {
    switch (kind) {
        case DetectorKind::Autoencoder: return ae::reconstruction_mse(*det.ae_model, scaled);
        case DetectorKind::Vae: return ae::vae_score(*det.vae_model, scaled);
        case DetectorKind::IForest: return det.iforest->score({scaled.begin(), scaled.end()});
        case DetectorKind::Lof: return det.lof->score({scaled.begin(), scaled.end()});
    }
    return 0.0;
}

FoldResult evaluate_composed(const FoldDetectors& det, DetectorKind kind, const LabeledSet& set,
                             const ExperimentConfig& cfg) {
    std::vector<double> scores;
    scores.reserve(set.features.size());
    for (const FeatureVector& f : set.features)
        scores.push_back(detector_score(det, kind, det.scaler.apply(f)));

    FoldResult result;
    detect::Threshold threshold;
    if (cfg.sigma_s > 0 &&
        (kind == DetectorKind::Autoencoder || kind == DetectorKind::Vae)) {
        const double mu = kind == DetectorKind::Autoencoder ? det.ae_model->train_mse_mean
                                                            : det.vae_model->train_score_mean;
        const double sd = kind == DetectorKind::Autoencoder ? det.ae_model->train_mse_std
                                                            : det.vae_model->train_score_std;
        threshold = detect::sigma_threshold(mu, sd, cfg.sigma_s);
    } else {
        detect::RocResult roc = detect::roc_threshold(scores, set.malicious, cfg.objective);
        threshold = roc.threshold;
        result.roc = std::move(roc.points);
    }
    result.threshold = threshold.value;
    result.metrics = compute_metrics(detect::classify(scores, threshold), set.malicious, scores);
    return result;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double stddev_of(const std::vector<double>& v) {
    double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

void aggregate_report(EvalReport& report) {
    auto collect = [&](auto field) {
        std::vector<double> values;
        values.reserve(report.folds.size());
        for (const FoldResult& fr : report.folds) values.push_back(fr.metrics.*field);
        return values;
    };
    auto fill = [&](Metrics& out, auto reduce) {
        out.f1 = reduce(collect(&Metrics::f1));
        out.accuracy = reduce(collect(&Metrics::accuracy));
        out.auc = reduce(collect(&Metrics::auc));
        out.precision = reduce(collect(&Metrics::precision));
        out.recall = reduce(collect(&Metrics::recall));
    };
    fill(report.median, [](std::vector<double> v) { return median_of(std::move(v)); });
    fill(report.stddev, [](const std::vector<double>& v) { return stddev_of(v); });
}

// Seed streams carved out of the master seed.
constexpr std::uint64_t kFoldStream = 10;
constexpr std::uint64_t kBenignStream = 50;
constexpr std::uint64_t kPoolStream = 80;
constexpr std::uint64_t kTrainStream = 1000;
constexpr std::uint64_t kComposeStream = 5000;

} // namespace

EvalReport run_experiment(DetectorKind detector, const std::vector<FeatureVector>& benign_raw,
                          const std::vector<FeatureVector>& malicious_raw,
                          const ExperimentConfig& config) {
    if (malicious_raw.empty() && config.malicious_ratio > 0.0)
        throw std::invalid_argument("run_experiment: empty malicious set");
    FoldPlan plan = make_folds(benign_raw.size(), config.folds,
                               derive_seed(config.seed, kFoldStream));

    EvalReport report;
    report.detector = to_string(detector);
    for (int fold = 0; fold < plan.k; ++fold) {
        FoldDetectors det = train_fold_detectors(
            benign_raw, plan.train_indices(fold), {detector}, config,
            derive_seed(config.seed, kTrainStream + static_cast<std::uint64_t>(fold)));

        std::vector<FeatureVector> benign_test;
        for (std::size_t i : plan.test_folds[static_cast<std::size_t>(fold)])
            benign_test.push_back(benign_raw[i]);

        LabeledSet set = compose_test_set(
            benign_test, malicious_raw, config.malicious_ratio,
            derive_seed(config.seed, kComposeStream + static_cast<std::uint64_t>(fold)));
        report.folds.push_back(evaluate_composed(det, detector, set, config));
    }
    aggregate_report(report);
    return report;
}

std::vector<EvalReport> run_grid(const GridConfig& config) {
    const std::size_t n_servers = config.servers.size();
    const std::size_t n_malware = config.malware.size();
    const std::size_t n_detectors = config.detectors.size();
    if (n_servers == 0 || n_malware == 0 || n_detectors == 0)
        throw std::invalid_argument("run_grid: empty grid");

    const std::uint64_t master = config.base.seed;

    // data and fold plans up front; training jobs only read them
    std::vector<std::vector<FeatureVector>> benign(n_servers);
    std::vector<FoldPlan> plans(n_servers);
    for (std::size_t si = 0; si < n_servers; ++si) {
        synth::TrafficProfile profile =
            synth::default_profile(FlowLabel::Benign, config.servers[si]);
        benign[si] = synth::gen_features(profile, config.benign_count,
                                         derive_seed(master, kBenignStream + si));
        plans[si] = make_folds(benign[si].size(), config.base.folds,
                               derive_seed(master, kFoldStream + si));
    }
    std::vector<std::vector<FeatureVector>> pools(n_malware);
    for (std::size_t mi = 0; mi < n_malware; ++mi) {
        synth::TrafficProfile profile = synth::default_profile(config.malware[mi]);
        pools[mi] = synth::gen_features(profile, config.pool_size,
                                        derive_seed(master, kPoolStream + mi));
    }

    const int k = config.base.folds;
    // results[si][fold][mi][di]
    std::vector<std::vector<std::vector<std::vector<FoldResult>>>> results(n_servers);
    for (auto& per_fold : results)
        per_fold.assign(static_cast<std::size_t>(k),
                        std::vector<std::vector<FoldResult>>(
                            n_malware, std::vector<FoldResult>(n_detectors)));

    struct WorkItem {
        std::size_t si;
        int fold;
    };
    std::vector<WorkItem> work;
    for (std::size_t si = 0; si < n_servers; ++si)
        for (int fold = 0; fold < k; ++fold) work.push_back({si, fold});

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;

    auto worker = [&]() {
        for (;;) {
            std::size_t w = next.fetch_add(1);
            if (w >= work.size()) return;
            const auto [si, fold] = work[w];
            try {
                const std::uint64_t run_id = si * 64 + static_cast<std::uint64_t>(fold);
                FoldDetectors det = train_fold_detectors(
                    benign[si], plans[si].train_indices(fold), config.detectors, config.base,
                    derive_seed(master, kTrainStream + run_id));

                std::vector<FeatureVector> benign_test;
                for (std::size_t i : plans[si].test_folds[static_cast<std::size_t>(fold)])
                    benign_test.push_back(benign[si][i]);

                for (std::size_t mi = 0; mi < n_malware; ++mi) {
                    LabeledSet set = compose_test_set(
                        benign_test, pools[mi], config.base.malicious_ratio,
                        derive_seed(master, kComposeStream + run_id * 16 + mi));
                    for (std::size_t di = 0; di < n_detectors; ++di)
                        results[si][static_cast<std::size_t>(fold)][mi][di] =
                            evaluate_composed(det, config.detectors[di], set, config.base);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    const int jobs = std::max(1, config.jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
        for (std::thread& t : threads) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    std::vector<EvalReport> reports;
    reports.reserve(n_servers * n_malware * n_detectors);
    for (std::size_t si = 0; si < n_servers; ++si)
        for (std::size_t mi = 0; mi < n_malware; ++mi)
            for (std::size_t di = 0; di < n_detectors; ++di) {
                EvalReport report;
                report.server = to_string(config.servers[si]);
                report.malware = to_string(config.malware[mi]);
                report.detector = to_string(config.detectors[di]);
                for (int fold = 0; fold < k; ++fold)
                    report.folds.push_back(
                        results[si][static_cast<std::size_t>(fold)][mi][di]);
                aggregate_report(report);
                reports.push_back(std::move(report));
            }
    return reports;
}

std::vector<std::string> default_sweep_grid() {
    return {"16,62,9",        "16,26,17,9",  "16,98,9",      "16,86,9",
            "16,62,35,9",     "16,38,23,9",  "16,26,20,14,9", "16,74,38,3",
            "16,50,29,9",     "16,110,56,3"};
}

SweepResult sweep_architectures(const std::vector<std::string>& arch_specs,
                                const GridConfig& config) {
    if (arch_specs.empty()) throw std::invalid_argument("sweep: empty architecture grid");

    SweepResult result;
    for (const std::string& spec : arch_specs) {
        ae::Architecture arch;
        try {
            arch = ae::Architecture::parse(spec);
        } catch (const std::exception& e) {
            result.skipped.push_back(spec + ": " + e.what());
            continue;
        }
        GridConfig run = config;
        run.base.arch = arch;
        run.detectors = {DetectorKind::Autoencoder};
        std::vector<EvalReport> reports = run_grid(run);

        std::vector<double> f1, acc, auc, prec, rec;
        for (const EvalReport& report : reports)
            for (const FoldResult& fr : report.folds) {
                f1.push_back(fr.metrics.f1);
                acc.push_back(fr.metrics.accuracy);
                auc.push_back(fr.metrics.auc);
                prec.push_back(fr.metrics.precision);
                rec.push_back(fr.metrics.recall);
            }
        SweepRow row;
        row.arch = arch;
        row.median.f1 = median_of(f1);
        row.median.accuracy = median_of(acc);
        row.median.auc = median_of(auc);
        row.median.precision = median_of(prec);
        row.median.recall = median_of(rec);
        row.stddev.f1 = stddev_of(f1);
        row.stddev.accuracy = stddev_of(acc);
        row.stddev.auc = stddev_of(auc);
        row.stddev.precision = stddev_of(prec);
        row.stddev.recall = stddev_of(rec);
        result.rows.push_back(std::move(row));
    }

    std::stable_sort(result.rows.begin(), result.rows.end(),
                     [](const SweepRow& a, const SweepRow& b) {
                         if (a.median.f1 != b.median.f1) return a.median.f1 > b.median.f1;
                         return a.arch.to_string() < b.arch.to_string();
                     });
    return result;
}

void write_report_csv(std::ostream& out, const std::vector<EvalReport>& reports) {
    csv::write_record(out, {"server", "malware", "fold", "f1", "accuracy", "auc", "precision",
                            "recall", "tp", "fp", "fn", "tn", "threshold"});
    for (const EvalReport& report : reports) {
        for (std::size_t fold = 0; fold < report.folds.size(); ++fold) {
            const FoldResult& fr = report.folds[fold];
            csv::write_record(
                out, {report.server, report.malware, std::to_string(fold),
                      csv::format_double(fr.metrics.f1), csv::format_double(fr.metrics.accuracy),
                      csv::format_double(fr.metrics.auc),
                      csv::format_double(fr.metrics.precision),
                      csv::format_double(fr.metrics.recall), std::to_string(fr.metrics.tp),
                      std::to_string(fr.metrics.fp), std::to_string(fr.metrics.fn),
                      std::to_string(fr.metrics.tn), csv::format_double(fr.threshold)});
        }
    }
}

void write_report_csv(const std::string& path, const std::vector<EvalReport>& reports) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open output file: " + path);
    write_report_csv(out, reports);
}

void write_heatmap_csv(std::ostream& out, const std::vector<EvalReport>& reports,
                       const std::string& detector, const GridConfig& config) {
    std::vector<std::string> header = {"server"};
    for (FlowLabel label : config.malware) header.push_back(to_string(label));
    csv::write_record(out, header);

    for (ServerTag server : config.servers) {
        std::vector<std::string> row = {to_string(server)};
        for (FlowLabel label : config.malware) {
            double value = 0.0;
            for (const EvalReport& report : reports) {
                if (report.server == to_string(server) && report.malware == to_string(label) &&
                    report.detector == detector) {
                    value = report.median.f1;
                    break;
                }
            }
            row.push_back(csv::format_double(value));
        }
        csv::write_record(out, row);
    }
}

void write_heatmap_csv(const std::string& path, const std::vector<EvalReport>& reports,
                       const std::string& detector, const GridConfig& config) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open output file: " + path);
    write_heatmap_csv(out, reports, detector, config);
}

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
    csv::write_record(out, {"architecture", "f1_median", "f1_std", "accuracy_median",
                            "accuracy_std", "auc_median", "auc_std", "precision_median",
                            "precision_std", "recall_median", "recall_std"});
    for (const SweepRow& row : result.rows) {
        csv::write_record(out, {row.arch.to_string(), csv::format_double(row.median.f1),
                                csv::format_double(row.stddev.f1),
                                csv::format_double(row.median.accuracy),
                                csv::format_double(row.stddev.accuracy),
                                csv::format_double(row.median.auc),
                                csv::format_double(row.stddev.auc),
                                csv::format_double(row.median.precision),
                                csv::format_double(row.stddev.precision),
                                csv::format_double(row.median.recall),
                                csv::format_double(row.stddev.recall)});
    }
}

void write_sweep_csv(const std::string& path, const SweepResult& result) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open output file: " + path);
    write_sweep_csv(out, result);
}

} // namespace dohdet::eval
