#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace dohdet::csv {

/// Reads one RFC-4180 record (quoted fields may contain commas, doubled
/// quotes and newlines). Returns nullopt at end of input.
std::optional<std::vector<std::string>> read_record(std::istream& in);

/// Writes one record, quoting fields that need it. Lines end with LF.
void write_record(std::ostream& out, const std::vector<std::string>& fields);

std::string format_double(double v); // shortest round-trip decimal
bool parse_double(const std::string& s, double& out);
bool parse_u64(const std::string& s, unsigned long long& out);

} // namespace dohdet::csv
