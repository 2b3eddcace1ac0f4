#include "aznas/io.hpp"

#include <limits>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "aznas/errors.hpp"

namespace aznas {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

std::vector<std::string> split_csv_record(const std::string& line, std::size_t row) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    std::size_t i = 0;
    while (i < line.size()) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            if (!cur.empty()) throw LoadError("unexpected quote mid-field", row);
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c == '\r' && i + 1 == line.size()) {
            // tolerate CRLF
        } else {
            cur += c;
        }
        ++i;
    }
    if (quoted) throw LoadError("unterminated quoted field", row);
    fields.push_back(std::move(cur));
    return fields;
}

namespace {

std::string json_number_or_null(double v) {
    if (std::isnan(v)) return "null";
    return format_double(v);
}

double number_or_nan(const nlohmann::json& j, const char* key, std::size_t row) {
    if (!j.contains(key)) throw LoadError(std::string("record missing field ") + key, row);
    const auto& v = j.at(key);
    if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
    if (!v.is_number()) throw LoadError(std::string("field is not a number: ") + key, row);
    return v.get<double>();
}

}  // namespace

std::string to_jsonl(const ArchRecord& rec) {
    // Hand-assembled so every double carries exactly 17 significant digits.
    std::string s = "{\"id\":";
    s += nlohmann::json(rec.id).dump();
    s += ",\"genotype\":";
    s += nlohmann::json(rec.genotype).dump();
    s += ",\"sE\":" + json_number_or_null(rec.scores.s_E);
    s += ",\"sP\":" + json_number_or_null(rec.scores.s_P);
    s += ",\"sT\":" + json_number_or_null(rec.scores.s_T);
    s += ",\"sC\":" + json_number_or_null(rec.scores.s_C);
    s += ",\"flops\":" + std::to_string(rec.flops);
    if (rec.az) s += ",\"az\":" + json_number_or_null(*rec.az);
    s += "}";
    return s;
}

ArchRecord parse_jsonl(const std::string& line, std::size_t row) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw LoadError(std::string("bad JSONL record: ") + e.what(), row);
    }
    ArchRecord rec;
    if (!j.contains("id") || !j.at("id").is_string())
        throw LoadError("record missing string field id", row);
    rec.id = j.at("id").get<std::string>();
    if (!j.contains("genotype") || !j.at("genotype").is_string())
        throw LoadError("record missing string field genotype", row);
    rec.genotype = j.at("genotype").get<std::string>();
    rec.scores.s_E = number_or_nan(j, "sE", row);
    rec.scores.s_P = number_or_nan(j, "sP", row);
    rec.scores.s_T = number_or_nan(j, "sT", row);
    rec.scores.s_C = number_or_nan(j, "sC", row);
    if (j.contains("flops")) rec.flops = j.at("flops").get<std::uint64_t>();
    if (j.contains("az") && !j.at("az").is_null()) rec.az = j.at("az").get<double>();
    return rec;
}

std::vector<ArchRecord> read_jsonl_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path, 0);
    std::vector<ArchRecord> out;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        out.push_back(parse_jsonl(line, row));
    }
    return out;
}

}  // namespace aznas
