#include "dohdet/flowcore.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dohdet {

const char* to_string(FlowLabel label) {
    switch (label) {
        case FlowLabel::Benign: return "benign";
        case FlowLabel::DgaSc: return "dga-sc";
        case FlowLabel::DgaScRw: return "dga-scrw";
        case FlowLabel::DgaMc: return "dga-mc";
        case FlowLabel::Dns2tcp: return "dns2tcp";
        case FlowLabel::Dnscat2: return "dnscat2";
        case FlowLabel::Iodine: return "iodine";
    }
    return "benign";
}

const char* to_string(ServerTag tag) {
    switch (tag) {
        case ServerTag::AdGuard: return "adguard";
        case ServerTag::Google: return "google";
        case ServerTag::Quad9: return "quad9";
        case ServerTag::Cloudflare: return "cloudflare";
        case ServerTag::Proxy: return "proxy";
        case ServerTag::Unknown: return "unknown";
    }
    return "unknown";
}

const char* to_string(Direction dir) {
    return dir == Direction::Outgoing ? "out" : "in";
}

std::optional<FlowLabel> flow_label_from_string(const std::string& s) {
    if (s == "benign") return FlowLabel::Benign;
    if (s == "dga-sc") return FlowLabel::DgaSc;
    if (s == "dga-scrw") return FlowLabel::DgaScRw;
    if (s == "dga-mc") return FlowLabel::DgaMc;
    if (s == "dns2tcp") return FlowLabel::Dns2tcp;
    if (s == "dnscat2") return FlowLabel::Dnscat2;
    if (s == "iodine") return FlowLabel::Iodine;
    return std::nullopt;
}

std::optional<ServerTag> server_tag_from_string(const std::string& s) {
    if (s == "adguard") return ServerTag::AdGuard;
    if (s == "google") return ServerTag::Google;
    if (s == "quad9") return ServerTag::Quad9;
    if (s == "cloudflare") return ServerTag::Cloudflare;
    if (s == "proxy") return ServerTag::Proxy;
    if (s == "unknown") return ServerTag::Unknown;
    return std::nullopt;
}

std::optional<Direction> direction_from_string(const std::string& s) {
    if (s == "out" || s == "outgoing") return Direction::Outgoing;
    if (s == "in" || s == "incoming") return Direction::Incoming;
    return std::nullopt;
}

bool parse_conn_key(const std::string& key, ConnKeyParts& out) {
    std::array<std::string, 5> parts;
    std::size_t begin = 0;
    std::size_t field = 0;
    for (std::size_t i = 0; i <= key.size(); ++i) {
        if (i == key.size() || key[i] == '|') {
            if (field >= parts.size()) return false;
            parts[field++] = key.substr(begin, i - begin);
            begin = i + 1;
        }
    }
    if (field != parts.size()) return false;
    out = {parts[0], parts[1], parts[2], parts[3], parts[4]};
    return true;
}

std::string make_conn_key(const std::string& src_ip, int src_port,
                          const std::string& dst_ip, int dst_port,
                          const std::string& proto) {
    std::ostringstream os;
    os << src_ip << '|' << src_port << '|' << dst_ip << '|' << dst_port << '|' << proto;
    return os.str();
}

namespace {

// mean, median, population variance, min, max of a value list; all zero when
// the list is empty.
void fill_stats(std::vector<double>& values, double* out) {
    if (values.empty()) {
        std::fill(out, out + 5, 0.0);
        return;
    }
    const std::size_t n = values.size();
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(n);

    std::sort(values.begin(), values.end());
    double median = (n % 2 == 1)
                        ? values[n / 2]
                        : 0.5 * (values[n / 2 - 1] + values[n / 2]);

    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double variance = ss / static_cast<double>(n);

    out[0] = mean;
    out[1] = median;
    out[2] = variance;
    out[3] = values.front();
    out[4] = values.back();
}

} // namespace

FeatureVector extract_features(const Flow& flow) {
    if (flow.packets.empty())
        throw std::invalid_argument("extract_features: flow has no packets");

    std::vector<double> out_sizes, in_sizes, delays;
    out_sizes.reserve(flow.packets.size());
    in_sizes.reserve(flow.packets.size());
    delays.reserve(flow.packets.size());

    double prev_ts = flow.packets.front().timestamp;
    for (std::size_t i = 0; i < flow.packets.size(); ++i) {
        const PacketRecord& p = flow.packets[i];
        if (!std::isfinite(p.timestamp) || p.timestamp < 0.0)
            throw std::invalid_argument("extract_features: invalid packet timestamp");
        if (p.timestamp < prev_ts)
            throw std::invalid_argument("extract_features: packets not time-ordered");
        if (i > 0) delays.push_back(p.timestamp - prev_ts);
        prev_ts = p.timestamp;

        double size = static_cast<double>(p.size_bytes);
        if (p.direction == Direction::Outgoing)
            out_sizes.push_back(size);
        else
            in_sizes.push_back(size);
    }

    FeatureVector f{};
    fill_stats(out_sizes, f.data());
    fill_stats(in_sizes, f.data() + 5);
    fill_stats(delays, f.data() + 10);
    f[15] = flow.packets.back().timestamp - flow.packets.front().timestamp;
    return f;
}

Scaler::Scaler(const FeatureVector& min, const FeatureVector& max)
    : min_(min), max_(max), fitted_(true) {
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        if (min_[i] > max_[i])
            throw std::invalid_argument("Scaler: min exceeds max in column " + std::to_string(i));
    }
}

FeatureVector Scaler::apply(const FeatureVector& v) const {
    if (!fitted_) throw std::logic_error("Scaler::apply called before fit");
    FeatureVector out{};
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        const double range = max_[i] - min_[i];
        double x = range == 0.0 ? 0.0 : (v[i] - min_[i]) / range;
        out[i] = std::clamp(x, 0.0, 1.0);
    }
    return out;
}

Scaler fit_scaler(const std::vector<FeatureVector>& features) {
    if (features.empty())
        throw std::invalid_argument("fit_scaler: empty feature set");
    FeatureVector lo = features.front();
    FeatureVector hi = features.front();
    for (const FeatureVector& f : features) {
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            lo[i] = std::min(lo[i], f[i]);
            hi[i] = std::max(hi[i], f[i]);
        }
    }
    return Scaler(lo, hi);
}

} // namespace dohdet
