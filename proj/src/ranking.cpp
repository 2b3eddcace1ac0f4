#include "aznas/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

namespace aznas {

int ScoreTable::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < column_names.size(); ++i)
        if (column_names[i] == name) return static_cast<int>(i);
    return -1;
}

const std::vector<double>& ScoreTable::column(const std::string& name) const {
    const int idx = column_index(name);
    if (idx < 0) throw ArgumentError("unknown proxy column: " + name);
    return columns[static_cast<std::size_t>(idx)];
}

void ScoreTable::add_column(const std::string& name, std::vector<double> values) {
    if (values.size() != rows())
        throw ArgumentError("column length does not match table rows: " + name);
    if (column_index(name) >= 0) throw ArgumentError("duplicate column: " + name);
    column_names.push_back(name);
    columns.push_back(std::move(values));
}

std::vector<double> assign_ranks(const std::vector<double>& scores, bool* had_nan) {
    const std::size_t m = scores.size();
    if (m < 1) throw ArgumentError("assign_ranks: empty score vector");
    if (had_nan) *had_nan = false;

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    auto worse = [&](std::size_t a, std::size_t b) {
        const double va = scores[a], vb = scores[b];
        const bool na = std::isnan(va), nb = std::isnan(vb);
        if (na != nb) return na;  // NaN sorts first (worst)
        if (na && nb) return a < b;
        return va < vb;
    };
    std::sort(order.begin(), order.end(), worse);

    std::vector<double> ranks(m, 0.0);
    std::size_t i = 0;
    while (i < m) {
        std::size_t j = i;
        const double v = scores[order[i]];
        const bool vn = std::isnan(v);
        while (j + 1 < m) {
            const double u = scores[order[j + 1]];
            if (vn ? std::isnan(u) : (u == v)) ++j;
            else break;
        }
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        if (vn && had_nan) *had_nan = true;
        i = j + 1;
    }
    return ranks;
}

namespace {

std::vector<std::vector<double>> subset_ranks(const ScoreTable& table,
                                              const std::vector<std::string>& subset) {
    if (subset.empty()) throw ArgumentError("aggregation needs a non-empty proxy subset");
    if (table.rows() < 1) throw ArgumentError("aggregation over an empty table");
    std::vector<std::vector<double>> out;
    out.reserve(subset.size());
    for (const std::string& name : subset) out.push_back(assign_ranks(table.column(name)));
    return out;
}

}  // namespace

std::vector<double> aggregate_nonlinear(const ScoreTable& table,
                                        const std::vector<std::string>& proxy_subset) {
    const auto ranks = subset_ranks(table, proxy_subset);
    const double m = static_cast<double>(table.rows());
    std::vector<double> az(table.rows(), 0.0);
    for (const auto& r : ranks)
        for (std::size_t i = 0; i < az.size(); ++i) az[i] += std::log(r[i] / m);
    return az;
}

std::vector<double> aggregate_linear(const ScoreTable& table,
                                     const std::vector<std::string>& proxy_subset) {
    const auto ranks = subset_ranks(table, proxy_subset);
    std::vector<double> s(table.rows(), 0.0);
    for (const auto& r : ranks)
        for (std::size_t i = 0; i < s.size(); ++i) s[i] += r[i];
    return s;
}

namespace {

// Strict inversions of v, counted by merge sort.
std::uint64_t count_inversions(std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<double> buf(n);
    std::uint64_t inv = 0;
    for (std::size_t width = 1; width < n; width *= 2) {
        for (std::size_t lo = 0; lo + width < n; lo += 2 * width) {
            const std::size_t mid = lo + width;
            const std::size_t hi = std::min(lo + 2 * width, n);
            std::size_t a = lo, b = mid, o = lo;
            while (a < mid && b < hi) {
                if (v[a] <= v[b]) buf[o++] = v[a++];
                else {
                    inv += mid - a;
                    buf[o++] = v[b++];
                }
            }
            while (a < mid) buf[o++] = v[a++];
            while (b < hi) buf[o++] = v[b++];
            std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo),
                      buf.begin() + static_cast<std::ptrdiff_t>(hi),
                      v.begin() + static_cast<std::ptrdiff_t>(lo));
        }
    }
    return inv;
}

std::uint64_t tie_pairs(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::uint64_t pairs = 0;
    std::size_t i = 0;
    while (i < v.size()) {
        std::size_t j = i;
        while (j + 1 < v.size() && v[j + 1] == v[i]) ++j;
        const std::uint64_t t = j - i + 1;
        pairs += t * (t - 1) / 2;
        i = j + 1;
    }
    return pairs;
}

void check_corr_input(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ArgumentError("correlation: length mismatch");
    if (x.size() < 2) throw ArgumentError("correlation: need at least 2 points");
    for (double v : x)
        if (std::isnan(v)) throw ArgumentError("correlation: NaN input");
    for (double v : y)
        if (std::isnan(v)) throw ArgumentError("correlation: NaN input");
}

}  // namespace

double kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
    check_corr_input(x, y);
    const std::size_t m = x.size();

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (x[a] != x[b]) return x[a] < x[b];
        return y[a] < y[b];
    });

    const std::uint64_t n0 = static_cast<std::uint64_t>(m) * (m - 1) / 2;
    std::uint64_t n1 = 0, n3 = 0;
    {
        std::size_t i = 0;
        while (i < m) {
            std::size_t j = i;
            while (j + 1 < m && x[order[j + 1]] == x[order[i]]) ++j;
            const std::uint64_t t = j - i + 1;
            n1 += t * (t - 1) / 2;
            // joint ties within the x-run
            std::size_t a = i;
            while (a <= j) {
                std::size_t b = a;
                while (b + 1 <= j && y[order[b + 1]] == y[order[a]]) ++b;
                const std::uint64_t u = b - a + 1;
                n3 += u * (u - 1) / 2;
                a = b + 1;
            }
            i = j + 1;
        }
    }
    const std::uint64_t n2 = tie_pairs(y);

    std::vector<double> ys(m);
    for (std::size_t i = 0; i < m; ++i) ys[i] = y[order[i]];
    const std::uint64_t swaps = count_inversions(ys);

    const double d1 = static_cast<double>(n0 - n1);
    const double d2 = static_cast<double>(n0 - n2);
    if (d1 <= 0.0 || d2 <= 0.0)
        throw UndefinedCorrelation("kendall_tau: constant input vector");
    const double num = static_cast<double>(n0) - static_cast<double>(n1) -
                       static_cast<double>(n2) + static_cast<double>(n3) -
                       2.0 * static_cast<double>(swaps);
    return std::clamp(num / (std::sqrt(d1) * std::sqrt(d2)), -1.0, 1.0);
}

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
    check_corr_input(x, y);
    const std::vector<double> rx = assign_ranks(x);
    const std::vector<double> ry = assign_ranks(y);
    const double m = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= m;
    my /= m;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        const double dx = rx[i] - mx, dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0)
        throw UndefinedCorrelation("spearman_rho: constant input vector");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace aznas
