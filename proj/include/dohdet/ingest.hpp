#pragma once

#include "dohdet/flowcore.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dohdet {

/// Approved DoH resolver addresses with their server tags. An empty list
/// means filtering is disabled.
class ServerAllowList {
public:
    ServerAllowList() = default;

    void add(const std::string& ip, ServerTag tag) { entries_[ip] = tag; }
    bool empty() const { return entries_.empty(); }
    std::optional<ServerTag> lookup(const std::string& ip) const;
    bool contains(const std::string& ip) const { return entries_.count(ip) > 0; }

    /// Parses "ip = tag" lines; '#' starts a comment.
    static ServerAllowList load(const std::string& path);

private:
    std::map<std::string, ServerTag> entries_;
};

struct AssembleResult {
    std::vector<Flow> flows;
    std::size_t skipped = 0; // records violating PacketRecord invariants
};

/// Groups packets by conn_key (first-seen order), stable-sorts each group by
/// timestamp and emits one flow per connection. Invalid records are counted
/// and skipped.
AssembleResult assemble_flows(const std::vector<PacketRecord>& packets);

/// Keeps flows whose destination IP is in the allow list and tags their
/// server. An empty allow list disables filtering and returns the input.
std::vector<Flow> filter_by_server(const std::vector<Flow>& flows,
                                   const ServerAllowList& allow);

/// Rewrites packet directions from addresses: destination in the allow list
/// means Outgoing, source in the allow list means Incoming. Other packets
/// are left as parsed.
void infer_directions(std::vector<PacketRecord>& packets, const ServerAllowList& allow);

struct PacketLoadResult {
    std::vector<PacketRecord> packets;
    std::size_t skipped = 0; // malformed rows
};

/// Reads the packet CSV (header `conn_key,timestamp,direction,size_bytes`).
/// Malformed rows are counted and skipped; a bad header is an error.
PacketLoadResult load_packet_csv(const std::string& path);
void store_packet_csv(const std::string& path, const std::vector<PacketRecord>& packets);
void store_packet_csv(const std::string& path, const std::vector<Flow>& flows);

/// One row of the flow CSV: a feature vector plus labels.
struct FlowRow {
    std::string conn_key;
    FlowLabel label = FlowLabel::Benign;
    ServerTag server = ServerTag::Unknown;
    FeatureVector features{};
};

/// Reads the flow CSV (header `conn_key,label,server,f00,...,f15`). Any
/// malformed row fails the load with its row number.
std::vector<FlowRow> load_flow_csv(const std::string& path);
void store_flow_csv(const std::string& path, const std::vector<FlowRow>& rows);

FlowRow flow_to_row(const Flow& flow);

/// Maps external CSV column names onto our flow-row schema so third-party
/// flow exports can be ingested. Config keys: `f00`..`f15` (required),
/// `conn_key`/`label`/`server` (optional column names), `default_label`/
/// `default_server` (fallback values), `label.<external>` (label value
/// remapping, e.g. `label.Malicious = dga-sc`).
struct ColumnMapping {
    std::array<std::string, kFeatureCount> feature_columns;
    std::string conn_key_column;
    std::string label_column;
    std::string server_column;
    FlowLabel default_label = FlowLabel::Benign;
    ServerTag default_server = ServerTag::Unknown;
    std::map<std::string, FlowLabel> label_remap;

    static ColumnMapping load(const std::string& path);
};

std::vector<FlowRow> load_flow_csv_mapped(const std::string& path, const ColumnMapping& mapping);

/// Parses a `key = value` config file; '#' starts a comment. Duplicate keys
/// keep the last value.
std::vector<std::pair<std::string, std::string>> load_kv_config(const std::string& path);

} // namespace dohdet
