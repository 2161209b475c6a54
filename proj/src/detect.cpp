#include "dohdet/detect.hpp"

#include "dohdet/csv.hpp"
#include "dohdet/errors.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace dohdet::detect {

Threshold sigma_threshold(double mu, double sigma, int s) {
    if (mu < 0.0 || sigma < 0.0)
        throw std::invalid_argument("sigma_threshold: mu and sigma must be non-negative");
    if (s < 1) throw std::invalid_argument("sigma_threshold: s must be a positive integer");
    Threshold t;
    t.value = mu + static_cast<double>(s) * sigma;
    t.method = ThresholdMethod::SigmaRule;
    t.sigma_s = s;
    return t;
}

Verdict classify(double score, const Threshold& t) {
    return score > t.value ? Verdict::Malicious : Verdict::Benign;
}

std::vector<Verdict> classify(const std::vector<double>& scores, const Threshold& t) {
    std::vector<Verdict> verdicts;
    verdicts.reserve(scores.size());
    for (double s : scores) verdicts.push_back(classify(s, t));
    return verdicts;
}

RocResult roc_threshold(const std::vector<double>& scores, const std::vector<bool>& malicious,
                        RocObjective objective) {
    if (scores.size() != malicious.size())
        throw std::invalid_argument("roc_threshold: scores and labels differ in length");
    std::size_t n_pos = 0;
    for (bool m : malicious) n_pos += m ? 1 : 0;
    const std::size_t n_neg = scores.size() - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("roc_threshold: both classes must be present");

    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocResult result;
    result.points.reserve(scores.size() + 2);

    // Cut at the maximum flags nothing; after each tied group the cut moves
    // below that group. A final sub-minimum cut flags everything.
    std::size_t tp = 0, fp = 0;
    auto push_point = [&](double cut) {
        RocPoint pt;
        pt.tpr = static_cast<double>(tp) / static_cast<double>(n_pos);
        pt.fpr = static_cast<double>(fp) / static_cast<double>(n_neg);
        pt.cut = cut;
        result.points.push_back(pt);
    };

    push_point(scores[order.front()]);
    std::size_t i = 0;
    while (i < order.size()) {
        const double value = scores[order[i]];
        while (i < order.size() && scores[order[i]] == value) {
            if (malicious[order[i]])
                ++tp;
            else
                ++fp;
            ++i;
        }
        double next_cut = i < order.size() ? scores[order[i]] : value - 1.0;
        push_point(next_cut);
    }

    auto point_objective = [&](const RocPoint& pt) {
        if (objective == RocObjective::YoudenJ) return pt.tpr - pt.fpr;
        // F1 from the rates: TP = tpr*P, FP = fpr*N, FN = (1-tpr)*P
        double tp_r = pt.tpr * static_cast<double>(n_pos);
        double fp_r = pt.fpr * static_cast<double>(n_neg);
        double fn_r = static_cast<double>(n_pos) - tp_r;
        double denom = 2.0 * tp_r + fp_r + fn_r;
        return denom == 0.0 ? 0.0 : 2.0 * tp_r / denom;
    };

    std::size_t best = 0;
    double best_value = point_objective(result.points[0]);
    for (std::size_t k = 1; k < result.points.size(); ++k) {
        double v = point_objective(result.points[k]);
        if (v > best_value ||
            (v == best_value && result.points[k].fpr < result.points[best].fpr)) {
            best = k;
            best_value = v;
        }
    }

    result.threshold.value = result.points[best].cut;
    result.threshold.method = ThresholdMethod::RocOptimal;
    result.objective_value = best_value;
    return result;
}

void write_roc_csv(std::ostream& out, const std::vector<RocPoint>& points) {
    csv::write_record(out, {"fpr", "tpr", "threshold"});
    for (const RocPoint& pt : points)
        csv::write_record(out, {csv::format_double(pt.fpr), csv::format_double(pt.tpr),
                                csv::format_double(pt.cut)});
}

void write_roc_csv(const std::string& path, const std::vector<RocPoint>& points) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open output file: " + path);
    write_roc_csv(out, points);
}

} // namespace dohdet::detect
