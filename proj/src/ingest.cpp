#include "dohdet/ingest.hpp"

#include "dohdet/csv.hpp"
#include "dohdet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace dohdet {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open file: " + path);
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open output file: " + path);
    return out;
}

bool record_valid(const PacketRecord& p) {
    return std::isfinite(p.timestamp) && p.timestamp >= 0.0 && !p.conn_key.empty();
}

std::vector<std::string> flow_csv_header() {
    std::vector<std::string> h = {"conn_key", "label", "server"};
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        char buf[8];
        std::snprintf(buf, sizeof(buf), "f%02zu", i);
        h.push_back(buf);
    }
    return h;
}

} // namespace

std::optional<ServerTag> ServerAllowList::lookup(const std::string& ip) const {
    auto it = entries_.find(ip);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

ServerAllowList ServerAllowList::load(const std::string& path) {
    ServerAllowList list;
    for (const auto& [key, value] : load_kv_config(path)) {
        auto tag = server_tag_from_string(value);
        if (!tag) throw InputError("allow list: unknown server tag '" + value + "' for " + key);
        list.add(key, *tag);
    }
    return list;
}

AssembleResult assemble_flows(const std::vector<PacketRecord>& packets) {
    AssembleResult result;
    std::unordered_map<std::string, std::size_t> index_by_key;
    for (const PacketRecord& p : packets) {
        if (!record_valid(p)) {
            ++result.skipped;
            continue;
        }
        auto [it, inserted] = index_by_key.try_emplace(p.conn_key, result.flows.size());
        if (inserted) {
            Flow flow;
            flow.conn_key = p.conn_key;
            result.flows.push_back(std::move(flow));
        }
        result.flows[it->second].packets.push_back(p);
    }
    for (Flow& flow : result.flows) {
        std::stable_sort(flow.packets.begin(), flow.packets.end(),
                         [](const PacketRecord& a, const PacketRecord& b) {
                             return a.timestamp < b.timestamp;
                         });
    }
    return result;
}

std::vector<Flow> filter_by_server(const std::vector<Flow>& flows,
                                   const ServerAllowList& allow) {
    if (allow.empty()) return flows;
    std::vector<Flow> kept;
    for (const Flow& flow : flows) {
        ConnKeyParts parts;
        if (!parse_conn_key(flow.conn_key, parts)) continue;
        auto tag = allow.lookup(parts.dst_ip);
        if (!tag) continue;
        kept.push_back(flow);
        kept.back().server_tag = *tag;
    }
    return kept;
}

void infer_directions(std::vector<PacketRecord>& packets, const ServerAllowList& allow) {
    for (PacketRecord& p : packets) {
        ConnKeyParts parts;
        if (!parse_conn_key(p.conn_key, parts)) continue;
        if (allow.contains(parts.dst_ip))
            p.direction = Direction::Outgoing;
        else if (allow.contains(parts.src_ip))
            p.direction = Direction::Incoming;
    }
}

PacketLoadResult load_packet_csv(const std::string& path) {
    std::ifstream in = open_input(path);
    auto header = csv::read_record(in);
    const std::vector<std::string> expected = {"conn_key", "timestamp", "direction", "size_bytes"};
    if (!header || *header != expected)
        throw InputError(path + ": bad packet CSV header (want conn_key,timestamp,direction,size_bytes)");

    PacketLoadResult result;
    while (auto rec = csv::read_record(in)) {
        if (rec->size() == 1 && (*rec)[0].empty()) continue; // trailing blank line
        if (rec->size() != 4) {
            ++result.skipped;
            continue;
        }
        PacketRecord p;
        p.conn_key = (*rec)[0];
        double ts;
        unsigned long long size;
        auto dir = direction_from_string((*rec)[2]);
        if (p.conn_key.empty() || !csv::parse_double((*rec)[1], ts) || !std::isfinite(ts) ||
            ts < 0.0 || !dir || !csv::parse_u64((*rec)[3], size) || size > 0xFFFFFFFFull) {
            ++result.skipped;
            continue;
        }
        p.timestamp = ts;
        p.direction = *dir;
        p.size_bytes = static_cast<std::uint32_t>(size);
        result.packets.push_back(std::move(p));
    }
    return result;
}

void store_packet_csv(const std::string& path, const std::vector<PacketRecord>& packets) {
    std::ofstream out = open_output(path);
    csv::write_record(out, {"conn_key", "timestamp", "direction", "size_bytes"});
    for (const PacketRecord& p : packets) {
        csv::write_record(out, {p.conn_key, csv::format_double(p.timestamp),
                                to_string(p.direction), std::to_string(p.size_bytes)});
    }
}

void store_packet_csv(const std::string& path, const std::vector<Flow>& flows) {
    std::vector<PacketRecord> packets;
    for (const Flow& flow : flows)
        packets.insert(packets.end(), flow.packets.begin(), flow.packets.end());
    store_packet_csv(path, packets);
}

std::vector<FlowRow> load_flow_csv(const std::string& path) {
    std::ifstream in = open_input(path);
    auto header = csv::read_record(in);
    if (!header || *header != flow_csv_header())
        throw InputError(path + ": bad flow CSV header (want conn_key,label,server,f00..f15)");

    std::vector<FlowRow> rows;
    std::size_t row_number = 1;
    while (auto rec = csv::read_record(in)) {
        ++row_number;
        if (rec->size() == 1 && (*rec)[0].empty()) continue;
        if (rec->size() != 3 + kFeatureCount)
            throw InputError(path + ": row " + std::to_string(row_number) + ": expected " +
                             std::to_string(3 + kFeatureCount) + " columns, got " +
                             std::to_string(rec->size()));
        FlowRow row;
        row.conn_key = (*rec)[0];
        auto label = flow_label_from_string((*rec)[1]);
        if (!label)
            throw InputError(path + ": row " + std::to_string(row_number) +
                             ": unknown label '" + (*rec)[1] + "'");
        row.label = *label;
        auto server = server_tag_from_string((*rec)[2]);
        if (!server)
            throw InputError(path + ": row " + std::to_string(row_number) +
                             ": unknown server '" + (*rec)[2] + "'");
        row.server = *server;
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            double v;
            if (!csv::parse_double((*rec)[3 + i], v) || !std::isfinite(v))
                throw InputError(path + ": row " + std::to_string(row_number) +
                                 ": non-numeric value in column f" +
                                 (i < 10 ? "0" : "") + std::to_string(i));
            row.features[i] = v;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void store_flow_csv(const std::string& path, const std::vector<FlowRow>& rows) {
    std::ofstream out = open_output(path);
    csv::write_record(out, flow_csv_header());
    for (const FlowRow& row : rows) {
        std::vector<std::string> rec = {row.conn_key, to_string(row.label), to_string(row.server)};
        for (double v : row.features) rec.push_back(csv::format_double(v));
        csv::write_record(out, rec);
    }
}

FlowRow flow_to_row(const Flow& flow) {
    FlowRow row;
    row.conn_key = flow.conn_key;
    row.label = flow.label;
    row.server = flow.server_tag;
    row.features = extract_features(flow);
    return row;
}

ColumnMapping ColumnMapping::load(const std::string& path) {
    ColumnMapping mapping;
    std::array<bool, kFeatureCount> seen{};
    for (const auto& [key, value] : load_kv_config(path)) {
        if (key.size() == 3 && key[0] == 'f' && std::isdigit(key[1]) && std::isdigit(key[2])) {
            std::size_t idx = static_cast<std::size_t>((key[1] - '0') * 10 + (key[2] - '0'));
            if (idx >= kFeatureCount)
                throw InputError("column mapping: feature index out of range: " + key);
            mapping.feature_columns[idx] = value;
            seen[idx] = true;
        } else if (key == "conn_key") {
            mapping.conn_key_column = value;
        } else if (key == "label") {
            mapping.label_column = value;
        } else if (key == "server") {
            mapping.server_column = value;
        } else if (key == "default_label") {
            auto label = flow_label_from_string(value);
            if (!label) throw InputError("column mapping: unknown default_label '" + value + "'");
            mapping.default_label = *label;
        } else if (key == "default_server") {
            auto tag = server_tag_from_string(value);
            if (!tag) throw InputError("column mapping: unknown default_server '" + value + "'");
            mapping.default_server = *tag;
        } else if (key.rfind("label.", 0) == 0) {
            auto label = flow_label_from_string(value);
            if (!label) throw InputError("column mapping: unknown label '" + value + "'");
            mapping.label_remap[key.substr(6)] = *label;
        } else {
            throw InputError("column mapping: unknown key '" + key + "'");
        }
    }
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        if (!seen[i])
            throw InputError("column mapping: missing entry for f" +
                             std::string(i < 10 ? "0" : "") + std::to_string(i));
    }
    return mapping;
}

std::vector<FlowRow> load_flow_csv_mapped(const std::string& path, const ColumnMapping& mapping) {
    std::ifstream in = open_input(path);
    auto header = csv::read_record(in);
    if (!header) throw InputError(path + ": empty file");

    std::unordered_map<std::string, std::size_t> column_index;
    for (std::size_t i = 0; i < header->size(); ++i) column_index[trim((*header)[i])] = i;

    auto require_column = [&](const std::string& name) -> std::size_t {
        auto it = column_index.find(name);
        if (it == column_index.end())
            throw InputError(path + ": mapped column '" + name + "' not found in header");
        return it->second;
    };

    std::array<std::size_t, kFeatureCount> feat_idx{};
    for (std::size_t i = 0; i < kFeatureCount; ++i)
        feat_idx[i] = require_column(mapping.feature_columns[i]);
    std::optional<std::size_t> key_idx, label_idx, server_idx;
    if (!mapping.conn_key_column.empty()) key_idx = require_column(mapping.conn_key_column);
    if (!mapping.label_column.empty()) label_idx = require_column(mapping.label_column);
    if (!mapping.server_column.empty()) server_idx = require_column(mapping.server_column);

    std::vector<FlowRow> rows;
    std::size_t row_number = 1;
    while (auto rec = csv::read_record(in)) {
        ++row_number;
        if (rec->size() == 1 && (*rec)[0].empty()) continue;
        if (rec->size() != header->size())
            throw InputError(path + ": row " + std::to_string(row_number) +
                             ": column count differs from header");
        FlowRow row;
        row.conn_key = key_idx ? (*rec)[*key_idx] : "row-" + std::to_string(row_number);
        row.label = mapping.default_label;
        if (label_idx) {
            const std::string& raw = (*rec)[*label_idx];
            auto remap = mapping.label_remap.find(raw);
            if (remap != mapping.label_remap.end()) {
                row.label = remap->second;
            } else if (auto label = flow_label_from_string(raw)) {
                row.label = *label;
            } else {
                throw InputError(path + ": row " + std::to_string(row_number) +
                                 ": unknown label '" + raw + "'");
            }
        }
        row.server = mapping.default_server;
        if (server_idx) {
            auto tag = server_tag_from_string((*rec)[*server_idx]);
            if (!tag)
                throw InputError(path + ": row " + std::to_string(row_number) +
                                 ": unknown server '" + (*rec)[*server_idx] + "'");
            row.server = *tag;
        }
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            double v;
            if (!csv::parse_double((*rec)[feat_idx[i]], v) || !std::isfinite(v))
                throw InputError(path + ": row " + std::to_string(row_number) +
                                 ": non-numeric value in mapped column '" +
                                 mapping.feature_columns[i] + "'");
            row.features[i] = v;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<std::pair<std::string, std::string>> load_kv_config(const std::string& path) {
    std::ifstream in = open_input(path);
    std::vector<std::pair<std::string, std::string>> pairs;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string trimmed = trim(line);
        if (trimmed.empty()) continue;
        auto eq = trimmed.find('=');
        if (eq == std::string::npos)
            throw InputError(path + ": line " + std::to_string(line_number) +
                             ": expected 'key = value'");
        std::string key = trim(trimmed.substr(0, eq));
        std::string value = trim(trimmed.substr(eq + 1));
        if (key.empty())
            throw InputError(path + ": line " + std::to_string(line_number) + ": empty key");
        pairs.emplace_back(key, value);
    }
    return pairs;
}

} // namespace dohdet
