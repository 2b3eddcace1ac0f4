#include "aznas/proxies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aznas/errors.hpp"
#include "aznas/rng.hpp"

namespace aznas {

Matrix flatten_features(const Tensor4& t) {
    const int n = t.b * t.h * t.w;
    Matrix m(t.c, n);
    for (int bi = 0; bi < t.b; ++bi)
        for (int ci = 0; ci < t.c; ++ci) {
            const double* src = &t.data[t.index(bi, ci, 0, 0)];
            double* dst = &m.data[static_cast<std::size_t>(ci) * n +
                                  static_cast<std::size_t>(bi) * t.h * t.w];
            for (int i = 0; i < t.h * t.w; ++i) dst[i] = src[i];
        }
    return m;
}

double block_expressivity(const Matrix& features, double eig_tol, bool* dead) {
    const int c = features.rows, n = features.cols;
    if (dead) *dead = false;
    if (n < 2) throw ArgumentError("block_expressivity: need at least 2 feature vectors");

    std::vector<double> mean(static_cast<std::size_t>(c), 0.0);
    for (int i = 0; i < c; ++i) {
        const double* row = &features.data[static_cast<std::size_t>(i) * n];
        double s = 0.0;
        for (int p = 0; p < n; ++p) s += row[p];
        mean[static_cast<std::size_t>(i)] = s / n;
    }

    Matrix cov(c, c);
    const double inv = 1.0 / (n - 1);
    for (int i = 0; i < c; ++i) {
        const double* ri = &features.data[static_cast<std::size_t>(i) * n];
        const double mi = mean[static_cast<std::size_t>(i)];
        for (int j = i; j < c; ++j) {
            const double* rj = &features.data[static_cast<std::size_t>(j) * n];
            const double mj = mean[static_cast<std::size_t>(j)];
            double s = 0.0;
            for (int p = 0; p < n; ++p) s += (ri[p] - mi) * (rj[p] - mj);
            cov.at(i, j) = cov.at(j, i) = s * inv;
        }
    }

    std::vector<double> eig = symmetric_eigenvalues(cov);
    double total = 0.0;
    for (double& e : eig) {
        if (e < 0.0) e = 0.0;
        total += e;
    }
    if (total <= eig_tol) {
        if (dead) *dead = true;
        return 0.0;
    }
    double entropy = 0.0;
    for (double e : eig) {
        const double lam = e / total;
        if (lam > 0.0) entropy -= lam * std::log(lam);
    }
    return entropy;
}

double expressivity(const std::vector<double>& block_entropies) {
    if (block_entropies.empty()) throw ArgumentError("expressivity: need L >= 1");
    double s = 0.0;
    for (double e : block_entropies) s += e;
    return s;
}

double progressivity(const std::vector<double>& block_entropies, bool* warned) {
    if (warned) *warned = false;
    if (block_entropies.size() < 2) {
        if (warned) *warned = true;
        return 0.0;
    }
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t l = 1; l < block_entropies.size(); ++l)
        m = std::min(m, block_entropies[l] - block_entropies[l - 1]);
    return m;
}

Matrix estimate_block_jacobian(const NetworkGraph& graph, const ForwardCache& cache,
                               int block_index, const Matrix& probes) {
    if (block_index < 1 || block_index >= static_cast<int>(graph.blocks.size()))
        throw ArgumentError("estimate_block_jacobian: block index must be in [2, L]");
    const PrimaryBlock& blk = graph.blocks[static_cast<std::size_t>(block_index)];
    const GraphNode& out_node = graph.nodes[static_cast<std::size_t>(blk.output_node)];
    const int b = cache.input.b;
    const int c = out_node.out_c, h = out_node.out_h, w = out_node.out_w;
    const int n = b * h * w;
    if (probes.rows != c || probes.cols != n)
        throw ArgumentError("estimate_block_jacobian: probe shape mismatch");

    Tensor4 grad_out(b, c, h, w);
    for (int ci = 0; ci < c; ++ci) {
        const double* src = &probes.data[static_cast<std::size_t>(ci) * n];
        for (int bi = 0; bi < b; ++bi) {
            double* dst = &grad_out.data[grad_out.index(bi, ci, 0, 0)];
            for (int i = 0; i < h * w; ++i) dst[i] = src[static_cast<std::size_t>(bi) * h * w + i];
        }
    }

    const Tensor4 gin = block_vjp(graph, cache, block_index, grad_out);
    const int cp = gin.c;
    if (gin.h % h != 0 || gin.w % w != 0)
        throw ArgumentError("estimate_block_jacobian: input grid is not a stride "
                            "multiple of the output grid");
    const int sy = gin.h / h, sx = gin.w / w;

    // A^T[i][j] = (1/n) sum_p g_{l-1}(proj(p))_i * g_l(p)_j
    Matrix at(cp, c);
    for (int bi = 0; bi < b; ++bi)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int p = (bi * h + y) * w + x;
                for (int i = 0; i < cp; ++i) {
                    const double gv = gin.at(bi, i, y * sy, x * sx);
                    if (gv == 0.0) continue;
                    double* row = &at.data[static_cast<std::size_t>(i) * c];
                    for (int j = 0; j < c; ++j)
                        row[j] += gv * probes.data[static_cast<std::size_t>(j) * n + p];
                }
            }
    const double inv = 1.0 / n;
    for (double& v : at.data) v *= inv;
    return at;
}

double trainability(const std::vector<double>& sigmas, bool* warned) {
    if (warned) *warned = false;
    if (sigmas.empty()) {
        if (warned) *warned = true;
        return 0.0;
    }
    double s = 0.0;
    for (double sigma : sigmas) {
        if (!(sigma > 0.0)) throw ArgumentError("trainability: sigma must be positive");
        s += -sigma - 1.0 / sigma + 2.0;
    }
    return s / static_cast<double>(sigmas.size());
}

namespace {

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t extra = 0) {
    return CounterRng(base).keyed(tag).keyed(extra).bits(0);
}

ScoreResult failed_result(std::uint64_t flops) {
    ScoreResult r;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    r.scores = ProxyScores{nan, nan, nan, nan};
    r.flops = flops;
    r.failed = true;
    return r;
}

}  // namespace

ScoreResult score_architecture(const Genotype& g, const SpaceSpec& space,
                               const ScoringConfig& cfg) {
    if (cfg.batch < 1) throw ArgumentError("score_architecture: batch must be >= 1");
    if (cfg.power_iters < 1) throw ArgumentError("score_architecture: power_iters must be >= 1");

    SpaceSpec sp = space;
    if (cfg.resolution > 0) {
        if (sp.is_nb201())
            std::get<Nb201Space>(sp.kind).resolution = cfg.resolution;
        else
            std::get<MobileSpace>(sp.kind).resolution = cfg.resolution;
    }

    const std::uint64_t flops = count_flops(g, sp);

    ScoreResult res;
    try {
        // Streams are keyed by the config alone: weights by
        // (seed, node index, weight index), probes by (probe_seed, block),
        // and one input batch shared by every candidate of a run. Candidates
        // therefore see common random numbers wherever their shapes agree,
        // which keeps cross-architecture rankings stable, and results stay
        // independent of evaluation order.
        NetworkGraph graph = instantiate(g, sp, cfg.init);
        const int resolution = sp.is_nb201() ? sp.nb201().resolution : sp.mobile().resolution;
        const Tensor4 input = sample_gaussian_input(cfg.batch, 3, resolution, resolution,
                                                    derive_seed(cfg.input_seed, "input"));
        const ForwardCache cache = forward(graph, input);

        const int blocks = static_cast<int>(graph.blocks.size());
        res.stats.block_entropy.resize(static_cast<std::size_t>(blocks));
        for (int l = 0; l < blocks; ++l) {
            bool dead = false;
            const Matrix feats = flatten_features(block_output(graph, cache, l));
            res.stats.block_entropy[static_cast<std::size_t>(l)] =
                block_expressivity(feats, cfg.eig_tol, &dead);
            res.degenerate |= dead;
        }
        res.scores.s_E = expressivity(res.stats.block_entropy);
        bool warn_p = false;
        res.scores.s_P = progressivity(res.stats.block_entropy, &warn_p);

        for (int l = 1; l < blocks; ++l) {
            const GraphNode& out_node =
                graph.nodes[static_cast<std::size_t>(graph.blocks[static_cast<std::size_t>(l)].output_node)];
            const int n = cfg.batch * out_node.out_h * out_node.out_w;
            const Matrix probes = sample_rademacher(
                out_node.out_c, n,
                derive_seed(cfg.probe_seed, "probe", static_cast<std::uint64_t>(l)));
            const Matrix at = estimate_block_jacobian(graph, cache, l, probes);
            const SpectralNormResult sn = spectral_norm(
                at, cfg.power_iters, cfg.power_tol,
                derive_seed(cfg.probe_seed, "power", static_cast<std::uint64_t>(l)),
                cfg.eig_tol);
            res.degenerate |= sn.degenerate;
            res.stats.block_sigma.push_back(sn.sigma);
        }
        bool warn_t = false;
        res.scores.s_T = trainability(res.stats.block_sigma, &warn_t);
        res.short_network = warn_p || warn_t;
        res.scores.s_C = static_cast<double>(flops);
        res.flops = flops;

        if (!std::isfinite(res.scores.s_E) || !std::isfinite(res.scores.s_P) ||
            !std::isfinite(res.scores.s_T))
            return failed_result(flops);
    } catch (const NumericFailure&) {
        return failed_result(flops);
    }
    return res;
}

}  // namespace aznas
