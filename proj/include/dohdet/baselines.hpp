#pragma once

#include "dohdet/rng.hpp"

#include <cstdint>
#include <vector>

namespace dohdet::baselines {

struct IsoForestParams {
    int n_trees = 100;
    int subsample = 256;
};

/// Isolation forest over arbitrary-dimension points. Scores are in (0,1);
/// higher means more anomalous.
class IsolationForest {
public:
    static IsolationForest fit(const std::vector<std::vector<double>>& data,
                               const IsoForestParams& params, std::uint64_t seed);

    double score(const std::vector<double>& point) const;
    double mean_path_length(const std::vector<double>& point) const;

    /// c(n): average unsuccessful-search path length of a binary search tree,
    /// 2*H(n-1) - 2*(n-1)/n with H(i) = ln(i) + Euler's gamma.
    static double average_path_length(std::size_t n);

    int max_depth() const { return max_depth_; }
    std::size_t sample_size() const { return sample_size_; }

private:
    struct Node {
        int feature = -1; // -1 marks a leaf
        double split = 0.0;
        std::int32_t left = -1;
        std::int32_t right = -1;
        std::int32_t size = 0; // leaf population
    };
    using Tree = std::vector<Node>;

    static std::int32_t build_node(Tree& tree, const std::vector<std::vector<double>>& data,
                                   std::vector<std::size_t>& items, std::size_t begin,
                                   std::size_t end, int depth, int depth_limit, Rng& rng);

    std::vector<Tree> trees_;
    std::size_t dim_ = 0;
    std::size_t sample_size_ = 0;
    int max_depth_ = 0;
};

/// Local outlier factor in novelty mode: fitted on reference points only,
/// then queried with unseen points. Scores near 1 are inliers.
class LofModel {
public:
    static LofModel fit(const std::vector<std::vector<double>>& data, int k = 20);

    double score(const std::vector<double>& query) const;
    int k() const { return k_; }

private:
    std::vector<std::vector<double>> points_;
    std::vector<double> kdist_;
    std::vector<double> lrd_;
    int k_ = 0;
};

} // namespace dohdet::baselines
