#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "aznas/proxies.hpp"
#include "aznas/ranking.hpp"
#include "aznas/space.hpp"

namespace aznas {

struct SearchConfig {
    std::uint64_t iterations = 2000;  // T
    std::uint64_t elite_size = 1024;  // k
    std::uint64_t flops_budget = std::numeric_limits<std::uint64_t>::max();  // B
    std::uint64_t seed = 0;
    std::uint64_t rerank_period = 1;  // R
    std::vector<std::string> proxy_subset = {"E", "P", "T", "C"};
};

inline constexpr std::array<const char*, 4> kBuiltinProxies = {"E", "P", "T", "C"};
int builtin_proxy_index(const std::string& name);  // throws on unknown names
double proxy_value(const ProxyScores& s, int index);

// Sorted multiset over one proxy column for O(log m) average-tie rank queries
// as the history grows. NaN (failed) entries occupy the bottom ranks.
class OrderIndex {
public:
    void insert(double v);
    double rank_of(double v) const;
    std::size_t size() const { return sorted_.size() + nan_count_; }

private:
    std::vector<double> sorted_;
    std::size_t nan_count_ = 0;
};

struct SearchHistory {
    std::vector<Genotype> genotypes;
    std::vector<std::string> genotype_strings;
    std::vector<ProxyScores> scores;
    std::array<OrderIndex, 4> index;  // E, P, T, C

    void append(Genotype g, std::string text, const ProxyScores& s);
    std::size_t size() const { return genotypes.size(); }

    // Non-linear AZ scores of every stored architecture under the current
    // global ranking; equals aggregate_nonlinear over the same table.
    std::vector<double> az_scores(const std::vector<int>& proxies) const;

    ScoreTable to_table() const;
};

// Highest-AZ indices, ties broken toward earlier insertion; all of them when
// the history is shorter than k.
std::vector<std::size_t> top_k(const std::vector<double>& az, std::size_t k);

using Scorer = std::function<ProxyScores(const Genotype&)>;

struct TraceEntry {
    std::uint64_t iteration;  // 1-based
    std::string genotype;
    ProxyScores scores;
    double az;  // under the first re-rank that includes this architecture
};
using TraceSink = std::function<void(const TraceEntry&)>;

struct SearchResult {
    Genotype best;
    std::size_t best_index = 0;
    double best_az = 0.0;
    SearchHistory history;
    std::vector<double> final_az;
};

// Algorithm: seed a budget-feasible architecture, then T rounds of
// score / append / re-rank the whole history / mutate a uniform top-k member
// (re-drawn while over budget). Deterministic in (space, cfg).
SearchResult evolutionary_search(const SpaceSpec& space, const SearchConfig& cfg,
                                 const Scorer& scorer, const TraceSink& trace = {});

struct RandomSearchResult {
    Genotype best;
    std::size_t best_index = 0;
    double best_az = 0.0;
    ScoreTable table;
    std::vector<double> az;
    std::vector<Genotype> genotypes;
};

// Scores n uniform (budget-feasible) samples, aggregates non-linearly,
// returns the argmax. `workers` > 1 parallelizes scoring; results are
// merged by index and stay deterministic.
RandomSearchResult random_search(const SpaceSpec& space, std::uint64_t n,
                                 const SearchConfig& cfg, const Scorer& scorer,
                                 int workers = 1);

// Synthetic smooth fitness over the cell space (fixed per-edge utilities plus
// a weak chain coupling) used to exercise the search machinery end to end
// without network evaluation. All four proxies take the fitness value.
double planted_oracle_fitness(const CellGenotype& g);
Scorer planted_oracle_scorer();

}  // namespace aznas
