#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dohdet {

enum class Direction { Outgoing, Incoming };

enum class FlowLabel { Benign, DgaSc, DgaScRw, DgaMc, Dns2tcp, Dnscat2, Iodine };

enum class ServerTag { AdGuard, Google, Quad9, Cloudflare, Proxy, Unknown };

const char* to_string(FlowLabel label);
const char* to_string(ServerTag tag);
const char* to_string(Direction dir);
std::optional<FlowLabel> flow_label_from_string(const std::string& s);
std::optional<ServerTag> server_tag_from_string(const std::string& s);
std::optional<Direction> direction_from_string(const std::string& s);

/// One observed packet. conn_key identifies the TCP connection and is
/// formatted as "src_ip|src_port|dst_ip|dst_port|proto".
struct PacketRecord {
    std::string conn_key;
    double timestamp = 0.0; // seconds since epoch, fractional
    Direction direction = Direction::Outgoing;
    std::uint32_t size_bytes = 0;
};

/// Splits a conn_key into its five fields. Returns false if the key does not
/// have exactly five '|'-separated parts.
struct ConnKeyParts {
    std::string src_ip, src_port, dst_ip, dst_port, proto;
};
bool parse_conn_key(const std::string& key, ConnKeyParts& out);
std::string make_conn_key(const std::string& src_ip, int src_port,
                          const std::string& dst_ip, int dst_port,
                          const std::string& proto = "tcp");

/// All packets of one TCP connection, time-ordered.
struct Flow {
    std::string conn_key;
    std::vector<PacketRecord> packets;
    FlowLabel label = FlowLabel::Benign;
    ServerTag server_tag = ServerTag::Unknown;
};

inline constexpr std::size_t kFeatureCount = 16;

/// 16 statistics summarizing a flow. Layout:
///   [0..4]   mean, median, variance, min, max of outgoing packet sizes (bytes)
///   [5..9]   mean, median, variance, min, max of incoming packet sizes (bytes)
///   [10..14] mean, median, variance, min, max of inter-packet delays (seconds)
///   [15]     flow duration (seconds)
/// Variance is the population variance. Statistics over an empty direction
/// are zero; a single-packet flow has zero delay statistics and duration.
using FeatureVector = std::array<double, kFeatureCount>;

FeatureVector extract_features(const Flow& flow);

/// Per-column min/max for scaling features to [0,1].
class Scaler {
public:
    Scaler() = default;
    Scaler(const FeatureVector& min, const FeatureVector& max);

    bool fitted() const { return fitted_; }
    const FeatureVector& min() const { return min_; }
    const FeatureVector& max() const { return max_; }

    /// Maps each coordinate to (v - min) / (max - min), 0 for constant
    /// columns, clamped to [0,1] for values outside the fitted range.
    FeatureVector apply(const FeatureVector& v) const;

private:
    FeatureVector min_{};
    FeatureVector max_{};
    bool fitted_ = false;
};

Scaler fit_scaler(const std::vector<FeatureVector>& features);

} // namespace dohdet
