#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dohdet::detect {

enum class Verdict { Benign, Malicious };

enum class ThresholdMethod { SigmaRule, RocOptimal };

struct Threshold {
    double value = 0.0;
    ThresholdMethod method = ThresholdMethod::SigmaRule;
    int sigma_s = 0; // set for SigmaRule
};

/// t = mu + s * sigma from the benign training-score distribution.
Threshold sigma_threshold(double mu, double sigma, int s);

/// A score strictly above the threshold is malicious; a tie is benign.
Verdict classify(double score, const Threshold& t);
std::vector<Verdict> classify(const std::vector<double>& scores, const Threshold& t);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double cut = 0.0; // classify score > cut
};

enum class RocObjective { YoudenJ, F1 };

struct RocResult {
    Threshold threshold;
    double objective_value = 0.0; // J or F1 at the chosen cut
    std::vector<RocPoint> points; // step curve from (0,0) to (1,1)
};

/// Sweeps every distinct score as a cut and picks the one maximizing the
/// objective (Youden's J = TPR - FPR by default); ties go to the lower FPR.
/// Both classes must be present.
RocResult roc_threshold(const std::vector<double>& scores, const std::vector<bool>& malicious,
                        RocObjective objective = RocObjective::YoudenJ);

/// CSV with header `fpr,tpr,threshold`.
void write_roc_csv(std::ostream& out, const std::vector<RocPoint>& points);
void write_roc_csv(const std::string& path, const std::vector<RocPoint>& points);

} // namespace dohdet::detect
