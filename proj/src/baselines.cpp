#include "dohdet/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dohdet::baselines {

namespace {

constexpr double kEulerGamma = 0.5772156649015329;

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        total += d * d;
    }
    return total;
}

// k nearest reference points by (distance, index); `skip` excludes one index
// when ranking a reference point against its own set.
void k_nearest(const std::vector<std::vector<double>>& points, const std::vector<double>& query,
               int k, std::ptrdiff_t skip, std::vector<std::pair<double, std::size_t>>& out) {
    out.clear();
    out.reserve(points.size());
    for (std::size_t j = 0; j < points.size(); ++j) {
        if (static_cast<std::ptrdiff_t>(j) == skip) continue;
        out.emplace_back(squared_distance(points[j], query), j);
    }
    std::partial_sort(out.begin(), out.begin() + k, out.end());
    out.resize(k);
    for (auto& [d2, idx] : out) d2 = std::sqrt(d2);
}

} // namespace

double IsolationForest::average_path_length(std::size_t n) {
    if (n <= 1) return 0.0;
    if (n == 2) return 1.0;
    const double nd = static_cast<double>(n);
    const double harmonic = std::log(nd - 1.0) + kEulerGamma;
    return 2.0 * harmonic - 2.0 * (nd - 1.0) / nd;
}

std::int32_t IsolationForest::build_node(Tree& tree, const std::vector<std::vector<double>>& data,
                                         std::vector<std::size_t>& items, std::size_t begin,
                                         std::size_t end, int depth, int depth_limit, Rng& rng) {
    const std::size_t count = end - begin;
    auto make_leaf = [&]() {
        Node leaf;
        leaf.size = static_cast<std::int32_t>(count);
        tree.push_back(leaf);
        return static_cast<std::int32_t>(tree.size() - 1);
    };
    if (count <= 1 || depth >= depth_limit) return make_leaf();

    const std::size_t dim = data[items[begin]].size();

    // features with spread in this node
    std::vector<std::size_t> splittable;
    std::vector<std::pair<double, double>> ranges(dim);
    for (std::size_t f = 0; f < dim; ++f) {
        double lo = data[items[begin]][f], hi = lo;
        for (std::size_t i = begin + 1; i < end; ++i) {
            lo = std::min(lo, data[items[i]][f]);
            hi = std::max(hi, data[items[i]][f]);
        }
        ranges[f] = {lo, hi};
        if (hi > lo) splittable.push_back(f);
    }
    if (splittable.empty()) return make_leaf();

    const std::size_t f =
        splittable[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(splittable.size()) - 1))];
    const double split = rng.uniform(ranges[f].first, ranges[f].second);

    auto mid_it = std::partition(items.begin() + static_cast<std::ptrdiff_t>(begin),
                                 items.begin() + static_cast<std::ptrdiff_t>(end),
                                 [&](std::size_t idx) { return data[idx][f] < split; });
    const std::size_t mid = static_cast<std::size_t>(mid_it - items.begin());
    if (mid == begin || mid == end) return make_leaf(); // split landed on an extreme

    Node node;
    node.feature = static_cast<int>(f);
    node.split = split;
    node.size = static_cast<std::int32_t>(count);
    tree.push_back(node);
    const std::int32_t self = static_cast<std::int32_t>(tree.size() - 1);

    const std::int32_t left = build_node(tree, data, items, begin, mid, depth + 1, depth_limit, rng);
    const std::int32_t right = build_node(tree, data, items, mid, end, depth + 1, depth_limit, rng);
    tree[self].left = left;
    tree[self].right = right;
    return self;
}

IsolationForest IsolationForest::fit(const std::vector<std::vector<double>>& data,
                                     const IsoForestParams& params, std::uint64_t seed) {
    if (data.empty()) throw std::invalid_argument("IsolationForest::fit: empty data");
    if (params.n_trees < 1 || params.subsample < 2)
        throw std::invalid_argument("IsolationForest::fit: bad parameters");

    IsolationForest forest;
    forest.dim_ = data.front().size();
    forest.sample_size_ = std::min<std::size_t>(static_cast<std::size_t>(params.subsample),
                                                data.size());
    forest.max_depth_ = static_cast<int>(
        std::ceil(std::log2(static_cast<double>(forest.sample_size_))));

    Rng rng(seed);
    std::vector<std::size_t> all(data.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

    forest.trees_.reserve(static_cast<std::size_t>(params.n_trees));
    for (int t = 0; t < params.n_trees; ++t) {
        // partial Fisher-Yates draws the subsample without replacement
        for (std::size_t i = 0; i < forest.sample_size_; ++i) {
            std::size_t j = static_cast<std::size_t>(
                rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(all.size()) - 1));
            std::swap(all[i], all[j]);
        }
        std::vector<std::size_t> items(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(forest.sample_size_));

        Tree tree;
        build_node(tree, data, items, 0, items.size(), 0, forest.max_depth_, rng);
        forest.trees_.push_back(std::move(tree));
    }
    return forest;
}

double IsolationForest::mean_path_length(const std::vector<double>& point) const {
    if (point.size() != dim_)
        throw std::invalid_argument("IsolationForest::score: dimension mismatch");
    double total = 0.0;
    for (const Tree& tree : trees_) {
        std::int32_t node = 0;
        int depth = 0;
        while (tree[static_cast<std::size_t>(node)].feature >= 0) {
            const Node& n = tree[static_cast<std::size_t>(node)];
            node = point[static_cast<std::size_t>(n.feature)] < n.split ? n.left : n.right;
            ++depth;
        }
        total += depth + average_path_length(
                             static_cast<std::size_t>(tree[static_cast<std::size_t>(node)].size));
    }
    return total / static_cast<double>(trees_.size());
}

double IsolationForest::score(const std::vector<double>& point) const {
    const double expected = mean_path_length(point);
    return std::pow(2.0, -expected / average_path_length(sample_size_));
}

LofModel LofModel::fit(const std::vector<std::vector<double>>& data, int k) {
    if (k < 1) throw std::invalid_argument("LofModel::fit: k must be positive");
    if (data.size() <= static_cast<std::size_t>(k))
        throw std::invalid_argument("LofModel::fit: need more than k reference points");

    LofModel model;
    model.points_ = data;
    model.k_ = k;
    const std::size_t n = data.size();
    model.kdist_.resize(n);
    std::vector<std::vector<std::size_t>> neighbors(n);

    std::vector<std::pair<double, std::size_t>> nearest;
    for (std::size_t i = 0; i < n; ++i) {
        k_nearest(data, data[i], k, static_cast<std::ptrdiff_t>(i), nearest);
        model.kdist_[i] = nearest.back().first;
        neighbors[i].reserve(static_cast<std::size_t>(k));
        for (const auto& [d, j] : nearest) neighbors[i].push_back(j);
    }

    model.lrd_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double reach_sum = 0.0;
        for (std::size_t j : neighbors[i]) {
            double d = std::sqrt(squared_distance(data[i], data[j]));
            reach_sum += std::max(model.kdist_[j], d);
        }
        model.lrd_[i] = reach_sum > 0.0 ? static_cast<double>(k) / reach_sum
                                        : std::numeric_limits<double>::infinity();
    }
    return model;
}

double LofModel::score(const std::vector<double>& query) const {
    if (query.size() != points_.front().size())
        throw std::invalid_argument("LofModel::score: dimension mismatch");

    std::vector<std::pair<double, std::size_t>> nearest;
    k_nearest(points_, query, k_, -1, nearest);

    double reach_sum = 0.0;
    double lrd_sum = 0.0;
    for (const auto& [d, j] : nearest) {
        reach_sum += std::max(kdist_[j], d);
        lrd_sum += lrd_[j];
    }
    const double kd = static_cast<double>(k_);
    if (reach_sum == 0.0) {
        // query coincides with duplicated reference points
        return 1.0;
    }
    const double lrd_query = kd / reach_sum;
    return (lrd_sum / kd) / lrd_query;
}

} // namespace dohdet::baselines
