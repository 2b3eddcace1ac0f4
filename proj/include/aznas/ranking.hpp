#pragma once

#include <string>
#include <vector>

#include "aznas/errors.hpp"

namespace aznas {

// m architectures x named score columns. Built-in proxy columns are named
// E, P, T, C; external columns carry arbitrary names.
struct ScoreTable {
    std::vector<std::string> arch_ids;
    std::vector<std::string> column_names;
    std::vector<std::vector<double>> columns;

    std::size_t rows() const { return arch_ids.size(); }
    int column_index(const std::string& name) const;
    const std::vector<double>& column(const std::string& name) const;
    void add_column(const std::string& name, std::vector<double> values);
};

// Ascending average-tie ranks in [1, m]: lowest score gets rank 1, best gets
// rank m, ties share the mean of the ranks they span. NaN entries sort below
// every finite value (worst); `had_nan` reports their presence.
std::vector<double> assign_ranks(const std::vector<double>& scores, bool* had_nan = nullptr);

// s_AZ(i) = sum over the subset of ln(Rank(s(i)) / m); <= 0, and 0 only for
// an architecture ranked m on every proxy.
std::vector<double> aggregate_nonlinear(const ScoreTable& table,
                                        const std::vector<std::string>& proxy_subset);

// Plain rank sum, the ablation baseline.
std::vector<double> aggregate_linear(const ScoreTable& table,
                                     const std::vector<std::string>& proxy_subset);

// Tie-corrected Kendall tau-b in O(m log m) via merge-sort inversion counting.
// Throws UndefinedCorrelation when either vector is constant.
double kendall_tau(const std::vector<double>& x, const std::vector<double>& y);

// Pearson correlation of average-tie ranks.
double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace aznas
