#pragma once

#include "dohdet/flowcore.hpp"
#include "dohdet/rng.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dohdet::synth {

/// A scalar sampling distribution with an optional lower clamp.
struct Dist {
    enum class Kind { Constant, Uniform, Normal, LogNormal, Exponential };
    Kind kind = Kind::Constant;
    double a = 0.0; // constant value / lower bound / mean / log-mean / mean
    double b = 0.0; // upper bound / stddev / log-stddev
    double clamp_min = 0.0;

    double sample(Rng& rng) const;

    static Dist constant(double v) { return {Kind::Constant, v, 0.0, 0.0}; }
    static Dist uniform(double lo, double hi) { return {Kind::Uniform, lo, hi, 0.0}; }
    static Dist normal(double mean, double sd, double clamp = 0.0) {
        return {Kind::Normal, mean, sd, clamp};
    }
    static Dist lognormal(double mu, double sigma) { return {Kind::LogNormal, mu, sigma, 0.0}; }
    static Dist exponential(double mean) { return {Kind::Exponential, mean, 0.0, 0.0}; }

    /// Parses "normal(110,15,60)", "lognormal(-2,1)", "exponential(0.03)",
    /// "uniform(0,2)" or "constant(0)". The trailing argument of normal is
    /// the clamp.
    static Dist parse(const std::string& spec);
    std::string describe() const;
};

/// Shape parameters for one traffic class. A flow is queries_per_conn
/// query/response packet pairs; consecutive packets are separated by a gap
/// drawn from gap_base plus gap_extra.
struct TrafficProfile {
    FlowLabel kind = FlowLabel::Benign;
    ServerTag server = ServerTag::Cloudflare;
    int queries_min = 2;
    int queries_max = 40;
    Dist gap_base = Dist::lognormal(-2.0, 1.0);
    Dist gap_extra = Dist::constant(0.0);
    Dist query_size = Dist::normal(110.0, 15.0, 60.0);
    Dist response_size = Dist::normal(468.0, 120.0, 60.0);

    /// Applies `key = value` overrides: queries_min, queries_max, gap_base,
    /// gap_extra, query_size, response_size (distribution specs).
    void apply_config(const std::vector<std::pair<std::string, std::string>>& kv);
};

/// Default profile for a traffic class. Benign shapes vary slightly per
/// server; malicious shapes ignore the server parameter except for the
/// destination address.
TrafficProfile default_profile(FlowLabel kind, ServerTag server = ServerTag::Cloudflare);

/// Well-known resolver address used as the flow destination for a tag.
const char* server_ip(ServerTag tag);

/// Sequential seeded flow generator; flow index drives connection keys and
/// start times, so a stream's prefix is independent of how many flows are
/// eventually drawn.
class FlowStream {
public:
    FlowStream(const TrafficProfile& profile, std::uint64_t seed)
        : profile_(profile), rng_(seed) {}

    Flow next();

private:
    TrafficProfile profile_;
    Rng rng_;
    std::size_t index_ = 0;
};

std::vector<Flow> gen_flows(const TrafficProfile& profile, std::size_t count, std::uint64_t seed);

/// Like gen_flows but keeps only the feature vectors (packets are discarded
/// flow by flow).
std::vector<FeatureVector> gen_features(const TrafficProfile& profile, std::size_t count,
                                        std::uint64_t seed);

enum class DgaVariant { Sc, ScRw, Mc };
enum class TunnelTool { Dns2tcp, Dnscat2, Iodine };

std::vector<Flow> gen_benign(std::size_t count, std::uint64_t seed);
std::vector<Flow> gen_dga(std::size_t count, DgaVariant variant, std::uint64_t seed);
std::vector<Flow> gen_tunnel(std::size_t count, TunnelTool tool, std::uint64_t seed);

FlowLabel label_for(DgaVariant variant);
FlowLabel label_for(TunnelTool tool);

} // namespace dohdet::synth
