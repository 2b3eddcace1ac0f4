#include "aznas/search.hpp"

#include <atomic>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "aznas/errors.hpp"
#include "aznas/rng.hpp"

namespace aznas {

int builtin_proxy_index(const std::string& name) {
    for (int i = 0; i < 4; ++i)
        if (name == kBuiltinProxies[static_cast<std::size_t>(i)]) return i;
    throw ArgumentError("unknown proxy name: " + name +
                        " (built-in proxies are E, P, T, C)");
}

double proxy_value(const ProxyScores& s, int index) {
    switch (index) {
        case 0: return s.s_E;
        case 1: return s.s_P;
        case 2: return s.s_T;
        default: return s.s_C;
    }
}

void OrderIndex::insert(double v) {
    if (std::isnan(v)) {
        ++nan_count_;
        return;
    }
    sorted_.insert(std::upper_bound(sorted_.begin(), sorted_.end(), v), v);
}

double OrderIndex::rank_of(double v) const {
    if (std::isnan(v)) return (1.0 + static_cast<double>(nan_count_)) / 2.0;
    const auto lo = std::lower_bound(sorted_.begin(), sorted_.end(), v);
    const auto hi = std::upper_bound(lo, sorted_.end(), v);
    const double below = static_cast<double>(nan_count_) +
                         static_cast<double>(lo - sorted_.begin());
    const double upto = static_cast<double>(nan_count_) +
                        static_cast<double>(hi - sorted_.begin());
    return (below + 1.0 + upto) / 2.0;
}

void SearchHistory::append(Genotype g, std::string text, const ProxyScores& s) {
    genotypes.push_back(std::move(g));
    genotype_strings.push_back(std::move(text));
    scores.push_back(s);
    for (int p = 0; p < 4; ++p) index[static_cast<std::size_t>(p)].insert(proxy_value(s, p));
}

std::vector<double> SearchHistory::az_scores(const std::vector<int>& proxies) const {
    if (proxies.empty()) throw ArgumentError("az_scores: empty proxy subset");
    const double m = static_cast<double>(size());
    std::vector<double> az(size(), 0.0);
    for (int p : proxies) {
        const OrderIndex& idx = index[static_cast<std::size_t>(p)];
        for (std::size_t i = 0; i < size(); ++i)
            az[i] += std::log(idx.rank_of(proxy_value(scores[i], p)) / m);
    }
    return az;
}

ScoreTable SearchHistory::to_table() const {
    ScoreTable t;
    t.arch_ids.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) t.arch_ids.push_back(std::to_string(i));
    for (int p = 0; p < 4; ++p) {
        std::vector<double> col(size());
        for (std::size_t i = 0; i < size(); ++i) col[i] = proxy_value(scores[i], p);
        t.add_column(kBuiltinProxies[static_cast<std::size_t>(p)], std::move(col));
    }
    return t;
}

std::vector<std::size_t> top_k(const std::vector<double>& az, std::size_t k) {
    if (az.empty()) throw ArgumentError("top_k: empty history");
    std::vector<std::size_t> order(az.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (az[a] != az[b]) return az[a] > az[b];
        return a < b;  // earlier insertion wins
    });
    if (order.size() > k) order.resize(k);
    return order;
}

namespace {

std::vector<int> resolve_subset(const std::vector<std::string>& names) {
    if (names.empty()) throw ArgumentError("proxy subset must be non-empty");
    std::vector<int> idx;
    for (const std::string& n : names) idx.push_back(builtin_proxy_index(n));
    return idx;
}

Genotype sample_within_budget(const SpaceSpec& space, std::uint64_t budget, SeqRng& rng,
                              int max_tries) {
    for (int t = 0; t < max_tries; ++t) {
        Genotype g = random_genotype(space, rng);
        if (count_flops(g, space) <= budget) return g;
    }
    throw InfeasibleBudget("no budget-feasible architecture found after " +
                           std::to_string(max_tries) + " samples");
}

}  // namespace

SearchResult evolutionary_search(const SpaceSpec& space, const SearchConfig& cfg,
                                 const Scorer& scorer, const TraceSink& trace) {
    validate_space(space);
    if (cfg.iterations < 1) throw ArgumentError("search: T must be >= 1");
    if (cfg.elite_size < 1 || cfg.elite_size > cfg.iterations)
        throw ArgumentError("search: need 1 <= k <= T");
    if (cfg.flops_budget == 0) throw ArgumentError("search: budget must be positive");
    if (cfg.rerank_period < 1) throw ArgumentError("search: rerank period must be >= 1");
    const std::vector<int> proxies = resolve_subset(cfg.proxy_subset);

    SeqRng rng(CounterRng(cfg.seed).keyed("evolutionary-search"));
    SearchResult res;
    SearchHistory& hist = res.history;

    Genotype current = sample_within_budget(space, cfg.flops_budget, rng, 1000);
    std::vector<std::size_t> elite;
    std::size_t traced_until = 0;

    auto flush_trace = [&](const std::vector<double>& az) {
        if (!trace) return;
        for (; traced_until < hist.size(); ++traced_until)
            trace(TraceEntry{static_cast<std::uint64_t>(traced_until) + 1,
                             hist.genotype_strings[traced_until], hist.scores[traced_until],
                             az[traced_until]});
    };

    for (std::uint64_t i = 1; i <= cfg.iterations; ++i) {
        const ProxyScores s = scorer(current);
        hist.append(current, format_genotype(current), s);

        if (i == 1 || i % cfg.rerank_period == 0) {
            const std::vector<double> az = hist.az_scores(proxies);
            elite = top_k(az, cfg.elite_size);
            flush_trace(az);
        }

        if (i == cfg.iterations) break;

        const Genotype& parent =
            hist.genotypes[elite[static_cast<std::size_t>(rng.below(elite.size()))]];
        bool found = false;
        for (int attempt = 0; attempt < 100 && !found; ++attempt) {
            Genotype child = mutate(parent, space, rng);
            if (count_flops(child, space) <= cfg.flops_budget) {
                current = std::move(child);
                found = true;
            }
        }
        if (!found) {
            // Mutation neighborhood is over budget; fall back to a fresh
            // sample, and to the (feasible) parent if even that fails.
            try {
                current = sample_within_budget(space, cfg.flops_budget, rng, 1000);
            } catch (const InfeasibleBudget&) {
                current = parent;
            }
        }
    }

    res.final_az = hist.az_scores(proxies);
    flush_trace(res.final_az);
    std::size_t best = 0;
    for (std::size_t i = 1; i < res.final_az.size(); ++i)
        if (res.final_az[i] > res.final_az[best]) best = i;
    res.best_index = best;
    res.best = hist.genotypes[best];
    res.best_az = res.final_az[best];
    return res;
}

RandomSearchResult random_search(const SpaceSpec& space, std::uint64_t n,
                                 const SearchConfig& cfg, const Scorer& scorer,
                                 int workers) {
    validate_space(space);
    if (n < 1) throw ArgumentError("random_search: n must be >= 1");
    const std::vector<int> proxies = resolve_subset(cfg.proxy_subset);

    SeqRng rng(CounterRng(cfg.seed).keyed("random-search"));
    RandomSearchResult res;
    res.genotypes.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i)
        res.genotypes.push_back(sample_within_budget(space, cfg.flops_budget, rng, 1000));

    std::vector<ProxyScores> scored(n);
    if (workers <= 1) {
        for (std::uint64_t i = 0; i < n; ++i) scored[i] = scorer(res.genotypes[i]);
    } else {
        std::vector<std::thread> pool;
        std::atomic<std::uint64_t> next{0};
        for (int t = 0; t < workers; ++t)
            pool.emplace_back([&] {
                for (;;) {
                    const std::uint64_t i = next.fetch_add(1);
                    if (i >= n) return;
                    scored[i] = scorer(res.genotypes[i]);
                }
            });
        for (std::thread& th : pool) th.join();
    }

    for (std::uint64_t i = 0; i < n; ++i) res.table.arch_ids.push_back(std::to_string(i));
    for (int p = 0; p < 4; ++p) {
        std::vector<double> col(n);
        for (std::uint64_t i = 0; i < n; ++i) col[i] = proxy_value(scored[i], p);
        res.table.add_column(kBuiltinProxies[static_cast<std::size_t>(p)], std::move(col));
    }

    std::vector<std::string> names;
    for (int p : proxies) names.push_back(kBuiltinProxies[static_cast<std::size_t>(p)]);
    res.az = aggregate_nonlinear(res.table, names);
    std::size_t best = 0;
    for (std::size_t i = 1; i < res.az.size(); ++i)
        if (res.az[i] > res.az[best]) best = i;
    res.best_index = best;
    res.best = res.genotypes[best];
    res.best_az = res.az[best];
    return res;
}

double planted_oracle_fitness(const CellGenotype& g) {
    static const auto tables = [] {
        struct T {
            double edge_utility[kCellEdges][kCellOps];
            double chain[kCellOps][kCellOps];
        } t{};
        const CounterRng rng(987654);
        std::uint64_t ctr = 0;
        for (auto& row : t.edge_utility)
            for (double& x : row) x = rng.uniform01(ctr++);
        for (auto& row : t.chain)
            for (double& x : row) x = rng.uniform01(ctr++);
        return t;
    }();
    double f = 0.0;
    for (int e = 0; e < kCellEdges; ++e)
        f += tables.edge_utility[e][g.edge_ops[static_cast<std::size_t>(e)]];
    for (int e = 0; e + 1 < kCellEdges; ++e)
        f += 0.25 * tables.chain[g.edge_ops[static_cast<std::size_t>(e)]]
                                [g.edge_ops[static_cast<std::size_t>(e + 1)]];
    return f;
}

Scorer planted_oracle_scorer() {
    return [](const Genotype& g) {
        const double f = planted_oracle_fitness(std::get<CellGenotype>(g));
        return ProxyScores{f, f, f, f};
    };
}

}  // namespace aznas
