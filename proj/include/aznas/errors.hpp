#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace aznas {

// Bad caller-supplied value (shapes, empty subsets, zero dims, ...).
struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Bad configuration (unknown enum, unknown RunConfig key, invalid ranges).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed genotype / file text. `offset` is the byte offset of the problem.
struct ParseError : std::runtime_error {
    std::size_t offset;
    ParseError(const std::string& msg, std::size_t byte_offset)
        : std::runtime_error(msg + " (byte " + std::to_string(byte_offset) + ")"),
          offset(byte_offset) {}
};

// NaN/Inf surfaced during evaluation; `node` is the graph node that produced it.
struct NumericFailure : std::runtime_error {
    int node;
    NumericFailure(const std::string& msg, int node_index)
        : std::runtime_error(msg + " (node " + std::to_string(node_index) + ")"),
          node(node_index) {}
};

// Table/file ingestion failure; `row` is the 1-based data row.
struct LoadError : std::runtime_error {
    std::size_t row;
    LoadError(const std::string& msg, std::size_t row_number)
        : std::runtime_error(msg + " (row " + std::to_string(row_number) + ")"),
          row(row_number) {}
};

// Id-keyed join failure; carries every id that failed to match.
struct JoinError : std::runtime_error {
    std::vector<std::string> missing_ids;
    explicit JoinError(std::vector<std::string> missing)
        : std::runtime_error(format(missing)), missing_ids(std::move(missing)) {}

private:
    static std::string format(const std::vector<std::string>& ids) {
        std::string s = "join failed, missing ids:";
        for (const auto& id : ids) s += " " + id;
        return s;
    }
};

// Correlation of a constant vector.
struct UndefinedCorrelation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// No budget-feasible architecture found during search initialization.
struct InfeasibleBudget : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operation not available for the given search space (e.g. enumerate on macro).
struct UnsupportedOperation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace aznas
