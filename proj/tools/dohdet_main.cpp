// dohdet: synthesize, ingest, train on and score DoH flow traffic, and run
// the evaluation protocol. Exit codes: 0 success, 2 bad input/config, 1
// runtime failure.

#include "dohdet/autoencoder.hpp"
#include "dohdet/baselines.hpp"
#include "dohdet/csv.hpp"
#include "dohdet/detect.hpp"
#include "dohdet/errors.hpp"
#include "dohdet/eval.hpp"
#include "dohdet/flowcore.hpp"
#include "dohdet/ingest.hpp"
#include "dohdet/synth.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace dohdet;

namespace {

std::uint64_t pick_seed(const std::optional<std::uint64_t>& opt) {
    if (opt) return *opt;
    auto now = std::chrono::system_clock::now().time_since_epoch();
    std::uint64_t raw =
        static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(now).count());
    std::uint64_t seed = derive_seed(raw, 0);
    std::cerr << "seed: " << seed << " (timestamp-derived; pass --seed to reproduce)\n";
    return seed;
}

std::vector<std::string> split_list(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t begin = 0;
    while (begin <= s.size()) {
        auto pos = s.find(sep, begin);
        std::string token = s.substr(begin, pos == std::string::npos ? pos : pos - begin);
        if (!token.empty()) out.push_back(token);
        if (pos == std::string::npos) break;
        begin = pos + 1;
    }
    return out;
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---------------------------------------------------------------------- synth

struct SynthOptions {
    std::string profile;
    std::size_t count = 0;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string format = "flow";
    std::string server = "cloudflare";
    std::string config_path;
};

void run_synth(const SynthOptions& opt) {
    auto label = flow_label_from_string(opt.profile);
    if (!label)
        throw InputError("unknown profile '" + opt.profile +
                         "' (valid: benign, dga-sc, dga-scrw, dga-mc, dns2tcp, dnscat2, iodine)");
    auto server = server_tag_from_string(opt.server);
    if (!server || *server == ServerTag::Unknown)
        throw InputError("unknown server '" + opt.server +
                         "' (valid: adguard, google, quad9, cloudflare, proxy)");
    if (opt.format != "flow" && opt.format != "packet")
        throw InputError("unknown format '" + opt.format + "' (valid: flow, packet)");
    if (opt.count < 1) throw InputError("--count must be >= 1");

    synth::TrafficProfile profile = synth::default_profile(*label, *server);
    if (!opt.config_path.empty()) profile.apply_config(load_kv_config(opt.config_path));

    const std::uint64_t seed = pick_seed(opt.seed);
    std::vector<Flow> flows = synth::gen_flows(profile, opt.count, seed);

    if (opt.format == "packet") {
        store_packet_csv(opt.out, flows);
    } else {
        std::vector<FlowRow> rows;
        rows.reserve(flows.size());
        for (const Flow& flow : flows) rows.push_back(flow_to_row(flow));
        store_flow_csv(opt.out, rows);
    }
    std::cerr << "wrote " << flows.size() << " " << opt.profile << " flows to " << opt.out << "\n";
}

// --------------------------------------------------------------------- ingest

struct IngestOptions {
    std::string packets_path;
    std::string flows_path;
    std::string out;
    std::string allow_path;
    std::string map_path;
    bool filter = false;
    bool infer_direction = false;
};

void run_ingest(const IngestOptions& opt) {
    if (opt.packets_path.empty() == opt.flows_path.empty())
        throw InputError("ingest needs exactly one of --packets or --flows");
    if ((opt.filter || opt.infer_direction) && opt.allow_path.empty())
        throw InputError("--filter and --infer-direction require --allow");

    ServerAllowList allow;
    if (!opt.allow_path.empty()) allow = ServerAllowList::load(opt.allow_path);

    std::vector<FlowRow> rows;
    if (!opt.packets_path.empty()) {
        PacketLoadResult loaded = load_packet_csv(opt.packets_path);
        if (loaded.skipped > 0)
            std::cerr << "skipped " << loaded.skipped << " malformed packet rows\n";
        if (opt.infer_direction) infer_directions(loaded.packets, allow);

        AssembleResult assembled = assemble_flows(loaded.packets);
        if (assembled.skipped > 0)
            std::cerr << "skipped " << assembled.skipped << " invalid packet records\n";

        std::vector<Flow> flows = std::move(assembled.flows);
        if (opt.filter) {
            std::size_t before = flows.size();
            flows = filter_by_server(flows, allow);
            std::cerr << "server filter kept " << flows.size() << " of " << before << " flows\n";
        }
        rows.reserve(flows.size());
        for (const Flow& flow : flows) rows.push_back(flow_to_row(flow));
    } else {
        if (!opt.map_path.empty())
            rows = load_flow_csv_mapped(opt.flows_path, ColumnMapping::load(opt.map_path));
        else
            rows = load_flow_csv(opt.flows_path);
        if (opt.filter) {
            std::vector<FlowRow> kept;
            for (FlowRow& row : rows) {
                ConnKeyParts parts;
                if (!parse_conn_key(row.conn_key, parts)) continue;
                auto tag = allow.lookup(parts.dst_ip);
                if (!tag) continue;
                row.server = *tag;
                kept.push_back(std::move(row));
            }
            std::cerr << "server filter kept " << kept.size() << " of " << rows.size()
                      << " flows\n";
            rows = std::move(kept);
        }
    }

    store_flow_csv(opt.out, rows);
    std::cerr << "wrote " << rows.size() << " flows to " << opt.out << "\n";
}

// ---------------------------------------------------------------------- train

struct TrainOptions {
    std::string flows_path;
    std::string arch = "16,62,9";
    std::optional<std::uint64_t> seed;
    int epochs = 30;
    int batch = 32;
    double lr = 0.001;
    bool vae = false;
    double kl_weight = 1.0;
    std::string out;
};

std::vector<FeatureVector> benign_features_from(const std::vector<FlowRow>& rows) {
    std::vector<FeatureVector> features;
    std::size_t skipped = 0;
    for (const FlowRow& row : rows) {
        if (row.label == FlowLabel::Benign)
            features.push_back(row.features);
        else
            ++skipped;
    }
    if (features.empty()) throw InputError("training file contains no benign flows");
    if (skipped > 0)
        std::cerr << "ignoring " << skipped << " non-benign rows in the training file\n";
    return features;
}

void run_train(const TrainOptions& opt) {
    ae::Architecture arch;
    try {
        arch = ae::Architecture::parse(opt.arch);
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }

    std::vector<FeatureVector> raw = benign_features_from(load_flow_csv(opt.flows_path));
    Scaler scaler = fit_scaler(raw);
    std::vector<FeatureVector> scaled;
    scaled.reserve(raw.size());
    for (const FeatureVector& f : raw) scaled.push_back(scaler.apply(f));

    ae::TrainConfig config;
    config.epochs = opt.epochs;
    config.batch_size = opt.batch;
    config.learning_rate = opt.lr;
    config.seed = pick_seed(opt.seed);

    auto start = std::chrono::steady_clock::now();
    if (opt.vae) {
        ae::VaeConfig vc{config, opt.kl_weight};
        ae::VaeModel model = ae::train_vae(arch, scaled, vc, scaler);
        ae::save_model(model, opt.out);
        std::cerr << "trained vae " << arch.to_string() << " on " << scaled.size() << " flows in "
                  << elapsed_seconds(start) << " s (train score mean " << model.train_score_mean
                  << ", std " << model.train_score_std << ")\n";
    } else {
        ae::TrainedModel model = ae::train_autoencoder(arch, scaled, config, scaler);
        ae::save_model(model, opt.out);
        std::cerr << "trained autoencoder " << arch.to_string() << " on " << scaled.size()
                  << " flows in " << elapsed_seconds(start) << " s (train mse mean "
                  << model.train_mse_mean << ", std " << model.train_mse_std << ")\n";
    }
}

// ---------------------------------------------------------------------- score

struct ScoreOptions {
    std::string model_path;
    std::string flows_path;
    std::string out;
    int sigma = 3;
    std::optional<double> fixed_threshold;
};

void run_score(const ScoreOptions& opt) {
    std::vector<FlowRow> rows = load_flow_csv(opt.flows_path);

    std::vector<double> scores;
    scores.reserve(rows.size());
    double mu = 0.0, sd = 0.0;
    if (ae::peek_model_kind(opt.model_path) == ae::ModelKind::Vae) {
        ae::VaeModel model = ae::load_vae_model(opt.model_path);
        for (const FlowRow& row : rows) scores.push_back(ae::vae_score_raw(model, row.features));
        mu = model.train_score_mean;
        sd = model.train_score_std;
    } else {
        ae::TrainedModel model = ae::load_model(opt.model_path);
        for (const FlowRow& row : rows) scores.push_back(ae::score_raw(model, row.features));
        mu = model.train_mse_mean;
        sd = model.train_mse_std;
    }

    detect::Threshold threshold;
    if (opt.fixed_threshold) {
        threshold.value = *opt.fixed_threshold;
        threshold.method = detect::ThresholdMethod::SigmaRule;
    } else {
        threshold = detect::sigma_threshold(mu, sd, opt.sigma);
        std::cerr << "threshold " << threshold.value << " = " << mu << " + " << opt.sigma << " * "
                  << sd << "\n";
    }

    std::ofstream out(opt.out, std::ios::binary);
    if (!out) throw InputError("cannot open output file: " + opt.out);
    csv::write_record(out, {"conn_key", "score", "verdict"});
    std::size_t flagged = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        detect::Verdict v = detect::classify(scores[i], threshold);
        if (v == detect::Verdict::Malicious) ++flagged;
        csv::write_record(out, {rows[i].conn_key, csv::format_double(scores[i]),
                                v == detect::Verdict::Malicious ? "malicious" : "benign"});
    }
    std::cerr << "flagged " << flagged << " of " << rows.size() << " flows\n";
}

// ----------------------------------------------------------------- eval/sweep

struct EvalOptions {
    std::string out_dir;
    std::string roc_dir;
    std::optional<std::uint64_t> seed;
    std::string arch = "16,62,9";
    std::string vae_arch = "16,50,26,3";
    std::string detectors = "autoencoder,iforest,lof,vae";
    std::string servers = "adguard,google,quad9,cloudflare,proxy";
    std::string malware = "dga-sc,dga-scrw,dga-mc,dns2tcp,dnscat2,iodine";
    std::size_t count = 2350;
    std::size_t pool = 600;
    int folds = 5;
    double ratio = 0.30;
    int epochs = 30;
    int batch = 32;
    double lr = 0.001;
    int sigma = 0; // 0 = ROC threshold
    std::string objective = "youden";
    int jobs = 1;
};

eval::GridConfig grid_config_from(const EvalOptions& opt) {
    eval::GridConfig config;
    try {
        config.base.arch = ae::Architecture::parse(opt.arch);
        config.base.vae_arch = ae::Architecture::parse(opt.vae_arch);
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }
    config.base.train.epochs = opt.epochs;
    config.base.train.batch_size = opt.batch;
    config.base.train.learning_rate = opt.lr;
    config.base.folds = opt.folds;
    config.base.malicious_ratio = opt.ratio;
    config.base.sigma_s = opt.sigma;
    if (opt.objective == "youden")
        config.base.objective = detect::RocObjective::YoudenJ;
    else if (opt.objective == "f1")
        config.base.objective = detect::RocObjective::F1;
    else
        throw InputError("unknown objective '" + opt.objective + "' (valid: youden, f1)");

    config.servers.clear();
    for (const std::string& s : split_list(opt.servers, ',')) {
        auto tag = server_tag_from_string(s);
        if (!tag || *tag == ServerTag::Unknown) throw InputError("unknown server '" + s + "'");
        config.servers.push_back(*tag);
    }
    config.malware.clear();
    for (const std::string& s : split_list(opt.malware, ',')) {
        auto label = flow_label_from_string(s);
        if (!label || *label == FlowLabel::Benign)
            throw InputError("unknown malicious profile '" + s + "'");
        config.malware.push_back(*label);
    }
    config.detectors.clear();
    for (const std::string& s : split_list(opt.detectors, ',')) {
        auto kind = eval::detector_from_string(s);
        if (!kind) throw InputError("unknown detector '" + s + "'");
        config.detectors.push_back(*kind);
    }
    if (config.servers.empty() || config.malware.empty() || config.detectors.empty())
        throw InputError("eval needs at least one server, malware profile and detector");

    config.benign_count = opt.count;
    config.pool_size = opt.pool;
    config.jobs = opt.jobs;
    return config;
}

void run_eval(const EvalOptions& opt) {
    eval::GridConfig config = grid_config_from(opt);
    config.base.seed = pick_seed(opt.seed);

    fs::create_directories(opt.out_dir);
    if (!opt.roc_dir.empty()) fs::create_directories(opt.roc_dir);

    auto start = std::chrono::steady_clock::now();
    std::vector<eval::EvalReport> reports = eval::run_grid(config);
    std::cerr << "evaluated " << config.servers.size() << "x" << config.malware.size()
              << " datasets with " << config.detectors.size() << " detectors in "
              << elapsed_seconds(start) << " s\n";

    for (eval::DetectorKind kind : config.detectors) {
        const std::string name = eval::to_string(kind);
        std::vector<eval::EvalReport> mine;
        for (const eval::EvalReport& report : reports)
            if (report.detector == name) mine.push_back(report);

        eval::write_report_csv((fs::path(opt.out_dir) / ("report_" + name + ".csv")).string(),
                               mine);
        eval::write_heatmap_csv((fs::path(opt.out_dir) / ("heatmap_" + name + ".csv")).string(),
                                reports, name, config);

        if (!opt.roc_dir.empty()) {
            for (const eval::EvalReport& report : mine) {
                for (std::size_t fold = 0; fold < report.folds.size(); ++fold) {
                    if (report.folds[fold].roc.empty()) continue;
                    std::string file = "roc_" + name + "_" + report.server + "_" +
                                       report.malware + "_fold" + std::to_string(fold) + ".csv";
                    detect::write_roc_csv((fs::path(opt.roc_dir) / file).string(),
                                          report.folds[fold].roc);
                }
            }
        }
    }
}

struct SweepOptions {
    std::string out;
    std::string grid; // semicolon-separated architecture specs
    EvalOptions eval;
};

void run_sweep(const SweepOptions& opt) {
    EvalOptions base = opt.eval;
    eval::GridConfig config = grid_config_from(base);
    config.base.seed = pick_seed(base.seed);

    std::vector<std::string> specs =
        opt.grid.empty() ? eval::default_sweep_grid() : split_list(opt.grid, ';');

    auto start = std::chrono::steady_clock::now();
    eval::SweepResult result = eval::sweep_architectures(specs, config);
    for (const std::string& skip : result.skipped) std::cerr << "skipped architecture " << skip << "\n";
    std::cerr << "swept " << result.rows.size() << " architectures in " << elapsed_seconds(start)
              << " s\n";
    eval::write_sweep_csv(opt.out, result);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"anomaly detection for DNS-over-HTTPS flow traffic"};
    app.require_subcommand(1);

    SynthOptions synth_opt;
    auto* synth_cmd = app.add_subcommand("synth", "generate synthetic DoH flows");
    synth_cmd->add_option("--profile", synth_opt.profile,
                          "traffic profile: benign, dga-sc, dga-scrw, dga-mc, dns2tcp, dnscat2, iodine")
        ->required();
    synth_cmd->add_option("--count", synth_opt.count, "number of flows")->required();
    synth_cmd->add_option("--seed", synth_opt.seed, "RNG seed");
    synth_cmd->add_option("--out", synth_opt.out, "output CSV path")->required();
    synth_cmd->add_option("--format", synth_opt.format, "output format: flow or packet");
    synth_cmd->add_option("--server", synth_opt.server, "DoH server profile");
    synth_cmd->add_option("--config", synth_opt.config_path, "profile override file (key = value)");

    IngestOptions ingest_opt;
    auto* ingest_cmd = app.add_subcommand("ingest", "assemble and normalize flow data");
    ingest_cmd->add_option("--packets", ingest_opt.packets_path, "packet CSV input");
    ingest_cmd->add_option("--flows", ingest_opt.flows_path, "flow CSV input");
    ingest_cmd->add_option("--out", ingest_opt.out, "output flow CSV")->required();
    ingest_cmd->add_option("--allow", ingest_opt.allow_path, "approved server list (ip = tag)");
    ingest_cmd->add_flag("--filter", ingest_opt.filter, "keep only flows to approved servers");
    ingest_cmd->add_flag("--infer-direction", ingest_opt.infer_direction,
                         "set packet directions from the approved server list");
    ingest_cmd->add_option("--map", ingest_opt.map_path, "column mapping config for --flows");

    TrainOptions train_opt;
    auto* train_cmd = app.add_subcommand("train", "train a model on benign flows");
    train_cmd->add_option("--flows", train_opt.flows_path, "benign flow CSV")->required();
    train_cmd->add_option("--arch", train_opt.arch, "encoder sizes, e.g. 16,62,9");
    train_cmd->add_option("--seed", train_opt.seed, "RNG seed");
    train_cmd->add_option("--epochs", train_opt.epochs, "training epochs");
    train_cmd->add_option("--batch", train_opt.batch, "mini-batch size");
    train_cmd->add_option("--lr", train_opt.lr, "learning rate");
    train_cmd->add_flag("--vae", train_opt.vae, "train the variational variant");
    train_cmd->add_option("--kl-weight", train_opt.kl_weight, "KL weight for --vae");
    train_cmd->add_option("--out", train_opt.out, "model file")->required();

    ScoreOptions score_opt;
    auto* score_cmd = app.add_subcommand("score", "score flows against a trained model");
    score_cmd->add_option("--model", score_opt.model_path, "model file")->required();
    score_cmd->add_option("--flows", score_opt.flows_path, "flow CSV to score")->required();
    score_cmd->add_option("--out", score_opt.out, "verdict CSV")->required();
    score_cmd->add_option("--sigma", score_opt.sigma, "sigma-rule multiplier (t = mu + s*sigma)");
    score_cmd->add_option("--threshold", score_opt.fixed_threshold, "explicit threshold value");

    EvalOptions eval_opt;
    auto* eval_cmd = app.add_subcommand("eval", "run the k-fold evaluation grid");
    eval_cmd->add_option("--out-dir", eval_opt.out_dir, "report directory")->required();
    eval_cmd->add_option("--roc-dir", eval_opt.roc_dir, "optional per-fold ROC CSV directory");
    eval_cmd->add_option("--seed", eval_opt.seed, "master seed");
    eval_cmd->add_option("--arch", eval_opt.arch, "autoencoder architecture");
    eval_cmd->add_option("--vae-arch", eval_opt.vae_arch, "VAE architecture");
    eval_cmd->add_option("--detectors", eval_opt.detectors, "comma list: autoencoder,vae,iforest,lof");
    eval_cmd->add_option("--servers", eval_opt.servers, "comma list of benign sources");
    eval_cmd->add_option("--malware", eval_opt.malware, "comma list of malicious profiles");
    eval_cmd->add_option("--count", eval_opt.count, "benign flows per server");
    eval_cmd->add_option("--pool", eval_opt.pool, "malicious pool size per profile");
    eval_cmd->add_option("--folds", eval_opt.folds, "cross-validation folds");
    eval_cmd->add_option("--ratio", eval_opt.ratio, "malicious share of each test set");
    eval_cmd->add_option("--epochs", eval_opt.epochs, "training epochs");
    eval_cmd->add_option("--batch", eval_opt.batch, "mini-batch size");
    eval_cmd->add_option("--lr", eval_opt.lr, "learning rate");
    eval_cmd->add_option("--sigma", eval_opt.sigma, "sigma-rule s (0 selects the ROC threshold)");
    eval_cmd->add_option("--objective", eval_opt.objective, "ROC objective: youden or f1");
    eval_cmd->add_option("--jobs", eval_opt.jobs, "parallel training jobs");

    SweepOptions sweep_opt;
    auto* sweep_cmd = app.add_subcommand("sweep", "rank autoencoder architectures");
    sweep_cmd->add_option("--out", sweep_opt.out, "ranked table CSV")->required();
    sweep_cmd->add_option("--grid", sweep_opt.grid,
                          "semicolon list of architectures (default: the stock top-ten)");
    sweep_opt.eval.servers = "cloudflare";
    sweep_cmd->add_option("--seed", sweep_opt.eval.seed, "master seed");
    sweep_cmd->add_option("--servers", sweep_opt.eval.servers, "comma list of benign sources");
    sweep_cmd->add_option("--malware", sweep_opt.eval.malware, "comma list of malicious profiles");
    sweep_cmd->add_option("--count", sweep_opt.eval.count, "benign flows per server");
    sweep_cmd->add_option("--pool", sweep_opt.eval.pool, "malicious pool size per profile");
    sweep_cmd->add_option("--folds", sweep_opt.eval.folds, "cross-validation folds");
    sweep_cmd->add_option("--ratio", sweep_opt.eval.ratio, "malicious share of each test set");
    sweep_cmd->add_option("--epochs", sweep_opt.eval.epochs, "training epochs");
    sweep_cmd->add_option("--jobs", sweep_opt.eval.jobs, "parallel training jobs");

    synth_cmd->callback([&]() { run_synth(synth_opt); });
    ingest_cmd->callback([&]() { run_ingest(ingest_opt); });
    train_cmd->callback([&]() { run_train(train_opt); });
    score_cmd->callback([&]() { run_score(score_opt); });
    eval_cmd->callback([&]() { run_eval(eval_opt); });
    sweep_cmd->callback([&]() { run_sweep(sweep_opt); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
