#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aznas/proxies.hpp"

namespace aznas {

// Floating-point serialization used by every file format: 17 significant
// digits, NaN spelled "nan" in CSV and null in JSON.
std::string format_double(double v);

std::string csv_escape(const std::string& field);

// Splits one CSV record with double-quote quoting ("" escapes a quote).
std::vector<std::string> split_csv_record(const std::string& line, std::size_t row_for_errors);

// One per-architecture record (the JSONL schema shared by score output,
// search traces and rank input).
struct ArchRecord {
    std::string id;
    std::string genotype;
    ProxyScores scores;
    std::uint64_t flops = 0;
    std::optional<double> az;
};

std::string to_jsonl(const ArchRecord& rec);
ArchRecord parse_jsonl(const std::string& line, std::size_t row_for_errors);

std::vector<ArchRecord> read_jsonl_file(const std::string& path);

}  // namespace aznas
