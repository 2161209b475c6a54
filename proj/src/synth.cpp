#include "dohdet/synth.hpp"

#include "dohdet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dohdet::synth {

double Dist::sample(Rng& rng) const {
    double v = 0.0;
    switch (kind) {
        case Kind::Constant: v = a; break;
        case Kind::Uniform: v = rng.uniform(a, b); break;
        case Kind::Normal: v = rng.normal(a, b); break;
        case Kind::LogNormal: v = rng.lognormal(a, b); break;
        case Kind::Exponential: v = rng.exponential(a); break;
    }
    return std::max(v, clamp_min);
}

Dist Dist::parse(const std::string& spec) {
    auto open = spec.find('(');
    auto close = spec.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open)
        throw InputError("bad distribution spec: '" + spec + "'");
    std::string name = spec.substr(0, open);
    std::string args = spec.substr(open + 1, close - open - 1);

    std::vector<double> vals;
    std::size_t begin = 0;
    while (begin <= args.size()) {
        auto comma = args.find(',', begin);
        std::string token = args.substr(begin, comma == std::string::npos ? comma : comma - begin);
        std::size_t pos = 0;
        try {
            vals.push_back(std::stod(token, &pos));
        } catch (const std::exception&) {
            throw InputError("bad distribution argument in '" + spec + "'");
        }
        if (comma == std::string::npos) break;
        begin = comma + 1;
    }

    auto need = [&](std::size_t lo, std::size_t hi) {
        if (vals.size() < lo || vals.size() > hi)
            throw InputError("wrong argument count in '" + spec + "'");
    };
    if (name == "constant") {
        need(1, 1);
        return constant(vals[0]);
    }
    if (name == "uniform") {
        need(2, 2);
        return uniform(vals[0], vals[1]);
    }
    if (name == "normal") {
        need(2, 3);
        return normal(vals[0], vals[1], vals.size() == 3 ? vals[2] : 0.0);
    }
    if (name == "lognormal") {
        need(2, 2);
        return lognormal(vals[0], vals[1]);
    }
    if (name == "exponential") {
        need(1, 1);
        return exponential(vals[0]);
    }
    throw InputError("unknown distribution '" + name + "'");
}

std::string Dist::describe() const {
    char buf[96];
    switch (kind) {
        case Kind::Constant: std::snprintf(buf, sizeof(buf), "constant(%g)", a); break;
        case Kind::Uniform: std::snprintf(buf, sizeof(buf), "uniform(%g,%g)", a, b); break;
        case Kind::Normal:
            std::snprintf(buf, sizeof(buf), "normal(%g,%g,%g)", a, b, clamp_min);
            break;
        case Kind::LogNormal: std::snprintf(buf, sizeof(buf), "lognormal(%g,%g)", a, b); break;
        case Kind::Exponential: std::snprintf(buf, sizeof(buf), "exponential(%g)", a); break;
    }
    return buf;
}

void TrafficProfile::apply_config(const std::vector<std::pair<std::string, std::string>>& kv) {
    for (const auto& [key, value] : kv) {
        if (key == "queries_min") {
            queries_min = std::stoi(value);
        } else if (key == "queries_max") {
            queries_max = std::stoi(value);
        } else if (key == "gap_base") {
            gap_base = Dist::parse(value);
        } else if (key == "gap_extra") {
            gap_extra = Dist::parse(value);
        } else if (key == "query_size") {
            query_size = Dist::parse(value);
        } else if (key == "response_size") {
            response_size = Dist::parse(value);
        } else {
            throw InputError("unknown profile key '" + key + "'");
        }
    }
    if (queries_min < 1 || queries_max < queries_min)
        throw InputError("profile: invalid queries_per_conn range");
}

const char* server_ip(ServerTag tag) {
    switch (tag) {
        case ServerTag::AdGuard: return "94.140.14.14";
        case ServerTag::Google: return "8.8.8.8";
        case ServerTag::Quad9: return "9.9.9.9";
        case ServerTag::Cloudflare: return "1.1.1.1";
        case ServerTag::Proxy: return "192.168.100.53";
        case ServerTag::Unknown: return "203.0.113.1";
    }
    return "203.0.113.1";
}

TrafficProfile default_profile(FlowLabel kind, ServerTag server) {
    TrafficProfile p;
    p.kind = kind;
    p.server = server;
    switch (kind) {
        case FlowLabel::Benign:
            p.queries_min = 2;
            p.queries_max = 40;
            p.query_size = Dist::normal(110.0, 15.0, 60.0);
            // Per-server nudges stand in for resolver-specific response
            // sizes and client pacing; cloudflare carries the base values.
            switch (server) {
                case ServerTag::AdGuard:
                    p.gap_base = Dist::lognormal(-2.10, 0.95);
                    p.response_size = Dist::normal(430.0, 110.0, 60.0);
                    break;
                case ServerTag::Google:
                    p.gap_base = Dist::lognormal(-1.90, 1.00);
                    p.response_size = Dist::normal(500.0, 125.0, 60.0);
                    break;
                case ServerTag::Quad9:
                    p.gap_base = Dist::lognormal(-2.05, 1.05);
                    p.response_size = Dist::normal(452.0, 118.0, 60.0);
                    break;
                case ServerTag::Proxy:
                    p.gap_base = Dist::lognormal(-1.80, 1.10);
                    p.response_size = Dist::normal(520.0, 130.0, 60.0);
                    break;
                case ServerTag::Cloudflare:
                case ServerTag::Unknown:
                    p.gap_base = Dist::lognormal(-2.00, 1.00);
                    p.response_size = Dist::normal(468.0, 120.0, 60.0);
                    break;
            }
            break;
        case FlowLabel::DgaSc:
        case FlowLabel::DgaScRw:
        case FlowLabel::DgaMc:
            p.queries_min = kind == FlowLabel::DgaMc ? 1 : 50;
            p.queries_max = kind == FlowLabel::DgaMc ? 1 : 400;
            p.gap_base = Dist::exponential(0.030);
            if (kind == FlowLabel::DgaScRw) p.gap_extra = Dist::uniform(0.0, 2.0);
            p.query_size = Dist::normal(130.0, 10.0, 60.0);
            p.response_size = Dist::normal(120.0, 30.0, 60.0);
            break;
        case FlowLabel::Dns2tcp:
            p.queries_min = 200;
            p.queries_max = 2000;
            p.gap_base = Dist::exponential(0.010);
            p.query_size = Dist::normal(220.0, 30.0, 60.0);
            p.response_size = Dist::normal(350.0, 80.0, 60.0);
            break;
        case FlowLabel::Dnscat2:
            p.queries_min = 200;
            p.queries_max = 2000;
            p.gap_base = Dist::exponential(0.013);
            p.query_size = Dist::normal(198.0, 27.0, 60.0);
            p.response_size = Dist::normal(315.0, 72.0, 60.0);
            break;
        case FlowLabel::Iodine:
            p.queries_min = 200;
            p.queries_max = 2000;
            p.gap_base = Dist::exponential(0.007);
            p.query_size = Dist::normal(275.0, 38.0, 60.0);
            p.response_size = Dist::normal(438.0, 100.0, 60.0);
            break;
    }
    return p;
}

Flow FlowStream::next() {
    const std::size_t i = index_++;

    Flow flow;
    flow.label = profile_.kind;
    flow.server_tag = profile_.server;
    std::string client_ip = "10." + std::to_string((i / 60000) % 250) + "." +
                            std::to_string((i / 240) % 250) + "." + std::to_string(i % 240 + 1);
    int client_port = 1024 + static_cast<int>(i % 60000);
    flow.conn_key = make_conn_key(client_ip, client_port, server_ip(profile_.server), 443);

    const int queries =
        static_cast<int>(rng_.uniform_int(profile_.queries_min, profile_.queries_max));
    flow.packets.reserve(static_cast<std::size_t>(queries) * 2);

    double t = 1000.0 * static_cast<double>(i);
    for (int q = 0; q < queries; ++q) {
        PacketRecord query;
        query.conn_key = flow.conn_key;
        query.timestamp = t;
        query.direction = Direction::Outgoing;
        query.size_bytes = static_cast<std::uint32_t>(std::lround(profile_.query_size.sample(rng_)));
        flow.packets.push_back(std::move(query));

        t += profile_.gap_base.sample(rng_) + profile_.gap_extra.sample(rng_);

        PacketRecord response;
        response.conn_key = flow.conn_key;
        response.timestamp = t;
        response.direction = Direction::Incoming;
        response.size_bytes =
            static_cast<std::uint32_t>(std::lround(profile_.response_size.sample(rng_)));
        flow.packets.push_back(std::move(response));

        if (q + 1 < queries) t += profile_.gap_base.sample(rng_) + profile_.gap_extra.sample(rng_);
    }
    return flow;
}

std::vector<Flow> gen_flows(const TrafficProfile& profile, std::size_t count, std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("gen_flows: count must be >= 1");
    FlowStream stream(profile, seed);
    std::vector<Flow> flows;
    flows.reserve(count);
    for (std::size_t i = 0; i < count; ++i) flows.push_back(stream.next());
    return flows;
}

std::vector<FeatureVector> gen_features(const TrafficProfile& profile, std::size_t count,
                                        std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("gen_features: count must be >= 1");
    FlowStream stream(profile, seed);
    std::vector<FeatureVector> features;
    features.reserve(count);
    for (std::size_t i = 0; i < count; ++i) features.push_back(extract_features(stream.next()));
    return features;
}

FlowLabel label_for(DgaVariant variant) {
    switch (variant) {
        case DgaVariant::Sc: return FlowLabel::DgaSc;
        case DgaVariant::ScRw: return FlowLabel::DgaScRw;
        case DgaVariant::Mc: return FlowLabel::DgaMc;
    }
    return FlowLabel::DgaSc;
}

FlowLabel label_for(TunnelTool tool) {
    switch (tool) {
        case TunnelTool::Dns2tcp: return FlowLabel::Dns2tcp;
        case TunnelTool::Dnscat2: return FlowLabel::Dnscat2;
        case TunnelTool::Iodine: return FlowLabel::Iodine;
    }
    return FlowLabel::Dns2tcp;
}

std::vector<Flow> gen_benign(std::size_t count, std::uint64_t seed) {
    return gen_flows(default_profile(FlowLabel::Benign), count, seed);
}

std::vector<Flow> gen_dga(std::size_t count, DgaVariant variant, std::uint64_t seed) {
    return gen_flows(default_profile(label_for(variant)), count, seed);
}

std::vector<Flow> gen_tunnel(std::size_t count, TunnelTool tool, std::uint64_t seed) {
    return gen_flows(default_profile(label_for(tool)), count, seed);
}

} // namespace dohdet::synth
