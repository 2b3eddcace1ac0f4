#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <CLI11.hpp>
#include <json.hpp>

#include "aznas/bench.hpp"
#include "aznas/io.hpp"
#include "aznas/linalg.hpp"
#include "aznas/proxies.hpp"
#include "aznas/ranking.hpp"
#include "aznas/search.hpp"
#include "aznas/space.hpp"

using namespace aznas;
using nlohmann::json;

namespace {

struct RunConfig {
    std::uint64_t seed = 0;
    SpaceSpec space;
    ScoringConfig scoring;
    SearchConfig search;
    std::vector<std::string> proxies = {"E", "P", "T", "C"};
    int workers = 1;

    // explicit-seed tracking: unset seeds fan out from the global seed
    bool init_seed_set = false, input_seed_set = false, probe_seed_set = false,
         search_seed_set = false;

    void finalize() {
        const CounterRng root(seed);
        if (!init_seed_set) scoring.init.seed = root.keyed("init").bits(0);
        if (!input_seed_set) scoring.input_seed = root.keyed("input").bits(0);
        if (!probe_seed_set) scoring.probe_seed = root.keyed("probe").bits(0);
        if (!search_seed_set) search.seed = root.keyed("search").bits(0);
        search.proxy_subset = proxies;
        if (space.flops_budget) search.flops_budget = *space.flops_budget;
        validate_space(space);
    }
};

void require_keys(const json& j, const std::vector<std::string>& allowed,
                  const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw ConfigError("unknown config key '" + it.key() + "' in " + where);
}

void load_space(const json& j, SpaceSpec& space) {
    require_keys(j, {"kind", "stem_width", "cells_per_stage", "resolution", "classes",
                     "flops_budget", "ranges"},
                 "space");
    const std::string kind = j.value("kind", std::string("nb201"));
    if (kind == "nb201") {
        Nb201Space s;
        s.stem_width = j.value("stem_width", s.stem_width);
        s.cells_per_stage = j.value("cells_per_stage", s.cells_per_stage);
        s.resolution = j.value("resolution", s.resolution);
        s.classes = j.value("classes", s.classes);
        space.kind = s;
    } else if (kind == "mobile") {
        MobileSpace s;
        s.resolution = j.value("resolution", s.resolution);
        s.classes = j.value("classes", s.classes);
        if (j.contains("ranges")) {
            const json& r = j.at("ranges");
            require_keys(r,
                         {"depth_min", "depth_max", "width_min", "width_max", "width_step",
                          "expansions", "kernels", "stage_strides", "stem", "classifier_width"},
                         "space.ranges");
            MobileRanges& g = s.ranges;
            g.depth_min = r.value("depth_min", g.depth_min);
            g.depth_max = r.value("depth_max", g.depth_max);
            g.width_min = r.value("width_min", g.width_min);
            g.width_max = r.value("width_max", g.width_max);
            g.width_step = r.value("width_step", g.width_step);
            g.expansions = r.value("expansions", g.expansions);
            g.kernels = r.value("kernels", g.kernels);
            g.stage_strides = r.value("stage_strides", g.stage_strides);
            g.stem = r.value("stem", g.stem);
            g.classifier_width = r.value("classifier_width", g.classifier_width);
        }
        space.kind = s;
    } else {
        throw ConfigError("unknown space kind '" + kind + "' (nb201 or mobile)");
    }
    if (j.contains("flops_budget") && !j.at("flops_budget").is_null())
        space.flops_budget = j.at("flops_budget").get<std::uint64_t>();
}

void load_config_file(const std::string& path, RunConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config JSON: ") + e.what());
    }
    require_keys(j, {"seed", "space", "scoring", "search", "proxies", "workers"}, "config");
    cfg.seed = j.value("seed", cfg.seed);
    cfg.workers = j.value("workers", cfg.workers);
    if (j.contains("proxies")) cfg.proxies = j.at("proxies").get<std::vector<std::string>>();
    if (j.contains("space")) load_space(j.at("space"), cfg.space);
    if (j.contains("scoring")) {
        const json& s = j.at("scoring");
        require_keys(s,
                     {"batch", "resolution", "init_method", "normal_std", "uniform_lo",
                      "uniform_hi", "power_iters", "power_tol", "eig_tol", "init_seed",
                      "input_seed", "probe_seed"},
                     "scoring");
        cfg.scoring.batch = s.value("batch", cfg.scoring.batch);
        cfg.scoring.resolution = s.value("resolution", cfg.scoring.resolution);
        if (s.contains("init_method"))
            cfg.scoring.init.method = parse_init_method(s.at("init_method").get<std::string>());
        cfg.scoring.init.normal_std = s.value("normal_std", cfg.scoring.init.normal_std);
        cfg.scoring.init.uniform_lo = s.value("uniform_lo", cfg.scoring.init.uniform_lo);
        cfg.scoring.init.uniform_hi = s.value("uniform_hi", cfg.scoring.init.uniform_hi);
        cfg.scoring.power_iters = s.value("power_iters", cfg.scoring.power_iters);
        cfg.scoring.power_tol = s.value("power_tol", cfg.scoring.power_tol);
        cfg.scoring.eig_tol = s.value("eig_tol", cfg.scoring.eig_tol);
        if (s.contains("init_seed")) {
            cfg.scoring.init.seed = s.at("init_seed").get<std::uint64_t>();
            cfg.init_seed_set = true;
        }
        if (s.contains("input_seed")) {
            cfg.scoring.input_seed = s.at("input_seed").get<std::uint64_t>();
            cfg.input_seed_set = true;
        }
        if (s.contains("probe_seed")) {
            cfg.scoring.probe_seed = s.at("probe_seed").get<std::uint64_t>();
            cfg.probe_seed_set = true;
        }
    }
    if (j.contains("search")) {
        const json& s = j.at("search");
        require_keys(s, {"iterations", "elite_size", "rerank_period", "seed"}, "search");
        cfg.search.iterations = s.value("iterations", cfg.search.iterations);
        cfg.search.elite_size = s.value("elite_size", cfg.search.elite_size);
        cfg.search.rerank_period = s.value("rerank_period", cfg.search.rerank_period);
        if (s.contains("seed")) {
            cfg.search.seed = s.at("seed").get<std::uint64_t>();
            cfg.search_seed_set = true;
        }
    }
}

std::vector<std::string> split_list(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::ostream& open_out(std::ofstream& file, const std::string& path) {
    if (path.empty()) return std::cout;
    file.open(path);
    if (!file) throw LoadError("cannot write " + path, 0);
    return file;
}

struct ScoreJob {
    std::string id;
    std::string genotype_text;
};

std::vector<ArchRecord> score_jobs(const std::vector<ScoreJob>& jobs, const RunConfig& cfg) {
    std::vector<ArchRecord> recs(jobs.size());
    auto work = [&](std::size_t i) {
        const Genotype g = parse_genotype(jobs[i].genotype_text);
        const ScoreResult r = score_architecture(g, cfg.space, cfg.scoring);
        recs[i] = ArchRecord{jobs[i].id, format_genotype(g), r.scores, r.flops, std::nullopt};
    };
    if (cfg.workers <= 1 || jobs.size() < 2) {
        for (std::size_t i = 0; i < jobs.size(); ++i) work(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        std::exception_ptr first_error;
        std::mutex err_mu;
        for (int t = 0; t < cfg.workers; ++t)
            pool.emplace_back([&] {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= jobs.size()) return;
                    try {
                        work(i);
                    } catch (...) {
                        std::lock_guard<std::mutex> lk(err_mu);
                        if (!first_error) first_error = std::current_exception();
                    }
                }
            });
        for (auto& th : pool) th.join();
        if (first_error) std::rethrow_exception(first_error);
    }
    return recs;
}

ScoreTable records_to_table(const std::vector<ArchRecord>& recs) {
    ScoreTable t;
    std::vector<double> e, p, tt, c;
    std::set<std::string> seen;
    for (const ArchRecord& r : recs) {
        if (!seen.insert(r.id).second)
            throw LoadError("duplicate arch_id '" + r.id + "' in score records", 0);
        t.arch_ids.push_back(r.id);
        e.push_back(r.scores.s_E);
        p.push_back(r.scores.s_P);
        tt.push_back(r.scores.s_T);
        c.push_back(r.scores.s_C);
    }
    t.add_column("E", std::move(e));
    t.add_column("P", std::move(p));
    t.add_column("T", std::move(tt));
    t.add_column("C", std::move(c));
    return t;
}

int cmd_score(const RunConfig& cfg, const std::string& genotype, const std::string& file,
              const std::string& from_gt, const std::string& out_path) {
    std::vector<ScoreJob> jobs;
    if (!genotype.empty()) jobs.push_back({"0", genotype});
    if (!file.empty()) {
        std::ifstream in(file);
        if (!in) throw LoadError("cannot open " + file, 0);
        std::string line;
        std::size_t i = 0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            jobs.push_back({std::to_string(i++), line});
        }
    }
    if (!from_gt.empty()) {
        const GroundTruthTable gt = load_ground_truth(from_gt);
        for (std::size_t i = 0; i < gt.rows(); ++i)
            jobs.push_back({gt.arch_ids[i], gt.genotypes[i]});
    }
    if (jobs.empty()) throw ConfigError("score: need --genotype, --file, or --from-gt");

    const std::vector<ArchRecord> recs = score_jobs(jobs, cfg);
    std::ofstream f;
    std::ostream& out = open_out(f, out_path);
    for (const ArchRecord& r : recs) out << to_jsonl(r) << '\n';
    return 0;
}

int cmd_rank(const std::string& scores_path, const std::string& proxies,
             const std::string& aggregation, const std::string& out_path) {
    const std::vector<ArchRecord> recs = read_jsonl_file(scores_path);
    if (recs.empty()) throw LoadError("no records in " + scores_path, 0);
    const ScoreTable table = records_to_table(recs);
    const std::vector<std::string> subset = split_list(proxies, ',');
    for (const std::string& name : subset) (void)builtin_proxy_index(name);

    std::vector<double> agg;
    if (aggregation == "nl") agg = aggregate_nonlinear(table, subset);
    else if (aggregation == "linear") agg = aggregate_linear(table, subset);
    else throw ConfigError("aggregation must be nl or linear");

    std::vector<std::size_t> order(recs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (agg[a] != agg[b]) return agg[a] > agg[b];
        return a < b;
    });

    std::ofstream f;
    std::ostream& out = open_out(f, out_path);
    out << "arch_id,genotype,score,sE,sP,sT,sC\n";
    for (std::size_t i : order) {
        const ArchRecord& r = recs[i];
        out << csv_escape(r.id) << ',' << csv_escape(r.genotype) << ',' << format_double(agg[i])
            << ',' << format_double(r.scores.s_E) << ',' << format_double(r.scores.s_P) << ','
            << format_double(r.scores.s_T) << ',' << format_double(r.scores.s_C) << '\n';
    }
    return 0;
}

int cmd_search(const RunConfig& cfg, const std::string& trace_path,
               const std::string& history_path, bool planted_oracle) {
    std::ofstream trace_file;
    TraceSink sink;
    if (!trace_path.empty()) {
        trace_file.open(trace_path);
        if (!trace_file) throw LoadError("cannot write " + trace_path, 0);
        sink = [&trace_file](const TraceEntry& e) {
            ArchRecord rec{std::to_string(e.iteration), e.genotype, e.scores, 0, e.az};
            rec.flops = static_cast<std::uint64_t>(
                std::isfinite(e.scores.s_C) && e.scores.s_C >= 0 ? e.scores.s_C : 0.0);
            trace_file << to_jsonl(rec) << '\n';
        };
    }

    const Scorer scorer = planted_oracle ? planted_oracle_scorer()
                                         : Scorer([&cfg](const Genotype& g) {
                                               return score_architecture(g, cfg.space,
                                                                         cfg.scoring).scores;
                                           });
    const SearchResult res = evolutionary_search(cfg.space, cfg.search, scorer, sink);

    if (!history_path.empty()) {
        std::ofstream hist(history_path);
        if (!hist) throw LoadError("cannot write " + history_path, 0);
        for (std::size_t i = 0; i < res.history.size(); ++i) {
            ArchRecord rec{std::to_string(i + 1), res.history.genotype_strings[i],
                           res.history.scores[i], 0, res.final_az[i]};
            const double c = res.history.scores[i].s_C;
            rec.flops = static_cast<std::uint64_t>(std::isfinite(c) && c >= 0 ? c : 0.0);
            hist << to_jsonl(rec) << '\n';
        }
    }

    std::cerr << "best az: " << format_double(res.best_az) << " at iteration "
              << (res.best_index + 1) << "\n";
    std::cout << format_genotype(res.best) << "\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& scores_path, const std::string& gt_path,
             const std::vector<std::string>& ext_paths, const std::string& subsets_arg,
             bool linear, int runs, int sample, const std::string& out_csv,
             const std::string& scatter_prefix) {
    const std::vector<ArchRecord> recs = read_jsonl_file(scores_path);
    if (recs.empty()) throw LoadError("no records in " + scores_path, 0);
    ScoreTable table = records_to_table(recs);
    for (const std::string& p : ext_paths) merge_external(table, load_external_scores(p));
    const GroundTruthTable gt = load_ground_truth(gt_path);

    std::vector<std::vector<std::string>> subsets;
    for (const std::string& grp : split_list(subsets_arg, ';')) subsets.push_back(split_list(grp, ','));
    if (subsets.empty()) subsets.push_back({"E", "P", "T", "C"});

    ReportOptions opts;
    opts.include_linear = linear;
    opts.selection_runs = runs;
    opts.selection_sample = sample;
    opts.selection_seed = CounterRng(cfg.seed).keyed("protocol").bits(0);
    opts.selection_subset = subsets.front();
    const EvalReport report = correlation_report(table, gt, subsets, opts);

    std::cout << render_report_text(report);
    if (!out_csv.empty()) {
        std::ofstream f(out_csv);
        if (!f) throw LoadError("cannot write " + out_csv, 0);
        f << render_report_csv(report);
    }

    if (!scatter_prefix.empty()) {
        // scatter data for the first subset's non-linear aggregate
        std::unordered_map<std::string, std::size_t> gt_pos;
        for (std::size_t i = 0; i < gt.rows(); ++i) gt_pos[gt.arch_ids[i]] = i;
        const std::vector<double> az = aggregate_nonlinear(table, subsets.front());
        for (std::size_t d = 0; d < gt.dataset_names.size(); ++d) {
            std::vector<double> acc;
            for (const std::string& id : table.arch_ids)
                acc.push_back(gt.accuracy[d][gt_pos.at(id)]);
            emit_scatter_csv(assign_ranks(az), assign_ranks(acc),
                             scatter_prefix + "_" + gt.dataset_names[d] + ".csv");
        }
    }
    return 0;
}

int cmd_space(const RunConfig& cfg, const std::string& mode, std::uint64_t n) {
    if (mode == "enumerate") {
        for (const Genotype& g : enumerate_space(cfg.space))
            std::cout << format_genotype(g) << '\n';
        return 0;
    }
    if (mode == "sample") {
        SeqRng rng(CounterRng(cfg.seed).keyed("space-sample"));
        const std::uint64_t budget =
            cfg.space.flops_budget ? *cfg.space.flops_budget
                                   : std::numeric_limits<std::uint64_t>::max();
        for (std::uint64_t i = 0; i < n; ++i) {
            Genotype g;
            int tries = 0;
            do {
                g = random_genotype(cfg.space, rng);
            } while (count_flops(g, cfg.space) > budget && ++tries < 1000);
            if (count_flops(g, cfg.space) > budget)
                throw InfeasibleBudget("could not sample within budget");
            std::cout << format_genotype(g) << '\n';
        }
        return 0;
    }
    throw ConfigError("space mode must be enumerate or sample");
}

// Compact re-runs of the invariant oracles; exits nonzero on any failure.
int cmd_selftest() {
    int failures = 0;
    auto check = [&](bool ok, const std::string& name) {
        std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
        if (!ok) ++failures;
    };

    {
        Matrix f(2, 4);
        const double a = 1.5, b = std::sqrt(3.0) / 2.0;
        const double r1[4] = {a, a, -a, -a}, r2[4] = {b, -b, b, -b};
        for (int p = 0; p < 4; ++p) {
            f.data[(std::size_t)p] = r1[p];
            f.data[4 + (std::size_t)p] = r2[p];
        }
        check(std::abs(block_expressivity(f) - 0.5623351446188083) < 1e-9,
              "entropy of eigenvalue pair {3,1}");
    }
    {
        const CounterRng rng(4);
        Matrix f(4, 20000);
        for (std::size_t i = 0; i < f.data.size(); ++i) f.data[i] = rng.gaussian(i);
        check(std::abs(block_expressivity(f) - std::log(4.0)) < 0.1,
              "entropy of isotropic features near ln c");
    }
    check(trainability({1.0}) == 0.0 && std::abs(trainability({2.0}) + 0.5) < 1e-15 &&
              std::abs(trainability({0.5}) + 0.5) < 1e-15,
          "trainability penalty symmetry at sigma 2 and 1/2");
    {
        ScoreTable t;
        t.arch_ids = {"A", "B", "X", "Y"};
        t.add_column("E", {40, 20, 10, 30});
        t.add_column("P", {4, 2, 1, 3});
        t.add_column("T", {0, -2, -3, -1});
        t.add_column("C", {1, 2, 3, 4});
        const auto az = aggregate_nonlinear(t, {"E", "P", "T", "C"});
        const auto lin = aggregate_linear(t, {"E", "P", "T", "C"});
        check(std::abs(az[0] + 1.3862943611198906) < 1e-12 &&
                  std::abs(az[1] + 2.772588722239781) < 1e-12 && lin[0] == 13.0 && lin[1] == 8.0,
              "non-linear and linear aggregation worked example");
    }
    {
        SeqRng rng(6);
        bool ok = true;
        for (int t = 0; t < 10 && ok; ++t) {
            std::vector<double> x, y;
            for (int i = 0; i < 100; ++i) {
                x.push_back(static_cast<double>(rng.below(9)));
                y.push_back(static_cast<double>(rng.below(9)));
            }
            double conc = 0, disc = 0, tx = 0, ty = 0;
            for (std::size_t i = 0; i < x.size(); ++i)
                for (std::size_t j = i + 1; j < x.size(); ++j) {
                    const double dx = x[i] - x[j], dy = y[i] - y[j];
                    if (dx == 0) ++tx;
                    if (dy == 0) ++ty;
                    if (dx != 0 && dy != 0) (dx * dy > 0 ? conc : disc) += 1;
                }
            const double n0 = 100.0 * 99.0 / 2.0;
            const double brute =
                (conc - disc) / (std::sqrt(n0 - tx) * std::sqrt(n0 - ty));
            ok = std::abs(kendall_tau(x, y) - brute) < 1e-12;
        }
        check(ok, "tau-b equals quadratic brute force");
    }
    {
        SeqRng rng(8);
        bool ok = true;
        for (int t = 0; t < 10 && ok; ++t) {
            Matrix m(12, 12);
            for (auto& v : m.data) v = rng.uniform01() - 0.5;
            Matrix g(12, 12);
            for (int i = 0; i < 12; ++i)
                for (int j = 0; j < 12; ++j) {
                    double s = 0;
                    for (int k = 0; k < 12; ++k) s += m.at(k, i) * m.at(k, j);
                    g.at(i, j) = s;
                }
            const double exact = std::sqrt(std::max(symmetric_eigenvalues(g)[0], 0.0));
            const double sigma = spectral_norm(m, 20000, 1e-14, 3 + t).sigma;
            ok = std::abs(sigma - exact) / exact < 1e-6;
        }
        check(ok, "power iteration matches dense eigensolver");
    }
    {
        SpaceSpec space;
        space.kind = Nb201Space{16, 1, 16, 10};
        const auto all = enumerate_space(space);
        bool ok = all.size() == 15625;
        SeqRng rng(10);
        for (int t = 0; t < 100 && ok; ++t) {
            const Genotype g = random_genotype(space, rng);
            ok = format_genotype(parse_genotype(format_genotype(g))) == format_genotype(g);
        }
        const InitSpec init{InitMethod::kaiming_normal_fan_in, 1};
        for (int t = 0; t < 5 && ok; ++t) {
            const Genotype g = random_genotype(space, rng);
            ok = count_flops(g, space) == graph_macs(instantiate(g, space, init));
        }
        check(ok, "genotype round-trip, enumeration count, flops dual route");
    }
    {
        // VJP vs central differences on a conv-bn-relu-pool chain
        bool ok = true;
        for (int trial = 0; trial < 3 && ok; ++trial) {
            NetworkGraph g;
            g.in_ch = 3;
            g.in_h = g.in_w = 4;
            PrimaryBlock blk;
            blk.input_node = -1;
            int cur = g.add(LayerSpec::conv(3, 1, 1, 3, 4), {-1});
            blk.nodes.push_back(cur);
            cur = g.add(LayerSpec::batch_norm_layer(4), {cur});
            blk.nodes.push_back(cur);
            cur = g.add(LayerSpec::relu_layer(), {cur});
            blk.nodes.push_back(cur);
            cur = g.add(LayerSpec::avg_pool_layer(3, 1, 1), {cur});
            blk.nodes.push_back(cur);
            blk.output_node = cur;
            g.blocks.push_back(blk);
            infer_shapes(g);
            init_weights(g, InitSpec{InitMethod::kaiming_normal_fan_in,
                                     static_cast<std::uint64_t>(trial + 40)});
            int attempts = 0;
            for (; attempts < 20; ++attempts) {
                const Tensor4 x = sample_gaussian_input(
                    2, 3, 4, 4, static_cast<std::uint64_t>(trial * 100 + attempts));
                const ForwardCache cache = forward(g, x);
                const Tensor4& pre = cache.node_out[1];
                bool near_kink = false;
                for (double v : pre.data)
                    if (std::abs(v) < 1e-3) near_kink = true;
                if (near_kink) continue;
                const Tensor4 go = sample_gaussian_input(2, 4, 4, 4, 7);
                const Tensor4 d = sample_gaussian_input(2, 3, 4, 4, 8);
                const Tensor4 gin = block_vjp(g, cache, 0, go);
                auto dot = [](const Tensor4& p, const Tensor4& q) {
                    double s = 0;
                    for (std::size_t i = 0; i < p.data.size(); ++i) s += p.data[i] * q.data[i];
                    return s;
                };
                Tensor4 xp = x, xm = x;
                const double eps = 1e-4;
                for (std::size_t i = 0; i < x.data.size(); ++i) {
                    xp.data[i] += eps * d.data[i];
                    xm.data[i] -= eps * d.data[i];
                }
                const double fd = (dot(go, block_output(g, forward(g, xp), 0)) -
                                   dot(go, block_output(g, forward(g, xm), 0))) /
                                  (2 * eps);
                const double an = dot(gin, d);
                ok = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-12}) < 1e-4;
                break;
            }
            if (attempts == 20) ok = false;
        }
        check(ok, "block VJP matches finite differences");
    }

    return failures > 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"training-free architecture scoring and search"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    RunConfig cfg;
    std::string config_path;
    std::string init_method;
    std::uint64_t flops_budget = 0;
    std::string space_kind;
    int stem_width = -1, cells_per_stage = -1, resolution = -1, classes = -1;
    std::string proxies_arg;

    app.add_option("--config", config_path, "JSON RunConfig file");
    app.add_option("--seed", cfg.seed, "global seed; sub-seeds fan out from it");
    app.add_option("--workers", cfg.workers, "parallel scoring workers");
    app.add_option("--space", space_kind, "nb201 or mobile");
    app.add_option("--stem-width", stem_width);
    app.add_option("--cells-per-stage", cells_per_stage);
    app.add_option("--resolution", resolution);
    app.add_option("--classes", classes);
    app.add_option("--budget", flops_budget, "MAC budget");
    app.add_option("--batch", cfg.scoring.batch);
    app.add_option("--init", init_method, "kaiming-fan-in|kaiming-fan-out|xavier-normal|normal|uniform");
    app.add_option("--power-iters", cfg.scoring.power_iters);
    app.add_option("--power-tol", cfg.scoring.power_tol);
    app.add_option("--eig-tol", cfg.scoring.eig_tol);
    app.add_option("--iterations", cfg.search.iterations);
    app.add_option("--elite", cfg.search.elite_size);
    app.add_option("--rerank", cfg.search.rerank_period);
    app.add_option("--proxies", proxies_arg, "comma list from E,P,T,C");

    std::string genotype, file, from_gt, out_path;
    CLI::App* score = app.add_subcommand("score", "score genotypes to JSONL");
    score->add_option("--genotype", genotype, "one genotype string");
    score->add_option("--file", file, "file with one genotype per line");
    score->add_option("--from-gt", from_gt, "score the genotypes of a ground-truth table");
    score->add_option("--out", out_path, "output path (default stdout)");

    std::string scores_path, aggregation = "nl", rank_out;
    CLI::App* rank = app.add_subcommand("rank", "aggregate scored JSONL into a ranked CSV");
    rank->add_option("--scores", scores_path, "scores JSONL")->required();
    rank->add_option("--aggregation", aggregation, "nl or linear");
    rank->add_option("--out", rank_out, "output CSV (default stdout)");

    std::string trace_path, history_path;
    bool planted_oracle = false;
    CLI::App* search = app.add_subcommand("search", "evolutionary search under a budget");
    search->add_option("--trace", trace_path, "JSONL search trace");
    search->add_option("--history", history_path, "JSONL full history with final AZ");
    search->add_flag("--planted-oracle", planted_oracle,
                     "replace the scorer with the synthetic planted fitness");

    std::string eval_scores, eval_gt, subsets_arg = "E,P,T,C", eval_csv, scatter_prefix;
    std::vector<std::string> ext_paths;
    bool eval_linear = false;
    int eval_runs = 0, eval_sample = 3000;
    CLI::App* eval = app.add_subcommand("eval", "correlation report against ground truth");
    eval->add_option("--scores", eval_scores)->required();
    eval->add_option("--gt", eval_gt)->required();
    eval->add_option("--ext", ext_paths, "external proxy score CSVs to merge");
    eval->add_option("--subsets", subsets_arg, "semicolon-separated proxy subsets");
    eval->add_flag("--linear", eval_linear, "also report linear aggregation");
    eval->add_option("--runs", eval_runs, "selection-protocol runs");
    eval->add_option("--sample", eval_sample, "selection-protocol sample size");
    eval->add_option("--out-csv", eval_csv);
    eval->add_option("--scatter", scatter_prefix, "prefix for per-dataset scatter CSVs");

    std::string space_mode;
    std::uint64_t sample_n = 10;
    CLI::App* spacecmd = app.add_subcommand("space", "enumerate or sample the space");
    spacecmd->add_option("mode", space_mode, "enumerate or sample")->required();
    spacecmd->add_option("--n", sample_n, "sample count");

    CLI::App* selftest = app.add_subcommand("selftest", "run the invariant oracle suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (!config_path.empty()) load_config_file(config_path, cfg);
        // flags override the config file
        if (!space_kind.empty()) {
            if (space_kind == "nb201" && !cfg.space.is_nb201()) cfg.space.kind = Nb201Space{};
            if (space_kind == "mobile" && cfg.space.is_nb201()) cfg.space.kind = MobileSpace{};
        }
        if (cfg.space.is_nb201()) {
            Nb201Space s = cfg.space.nb201();
            if (stem_width > 0) s.stem_width = stem_width;
            if (cells_per_stage > 0) s.cells_per_stage = cells_per_stage;
            if (resolution > 0) s.resolution = resolution;
            if (classes > 0) s.classes = classes;
            cfg.space.kind = s;
        } else {
            MobileSpace s = cfg.space.mobile();
            if (resolution > 0) s.resolution = resolution;
            if (classes > 0) s.classes = classes;
            cfg.space.kind = s;
        }
        if (flops_budget > 0) cfg.space.flops_budget = flops_budget;
        if (!init_method.empty()) cfg.scoring.init.method = parse_init_method(init_method);
        if (!proxies_arg.empty()) cfg.proxies = split_list(proxies_arg, ',');
        cfg.finalize();

        if (*score) return cmd_score(cfg, genotype, file, from_gt, out_path);
        if (*rank) {
            const std::string p = proxies_arg.empty() ? "E,P,T,C" : proxies_arg;
            return cmd_rank(scores_path, p, aggregation, rank_out);
        }
        if (*search) return cmd_search(cfg, trace_path, history_path, planted_oracle);
        if (*eval)
            return cmd_eval(cfg, eval_scores, eval_gt, ext_paths, subsets_arg, eval_linear,
                            eval_runs, eval_sample, eval_csv, scatter_prefix);
        if (*spacecmd) return cmd_space(cfg, space_mode, sample_n);
        if (*selftest) return cmd_selftest();
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
