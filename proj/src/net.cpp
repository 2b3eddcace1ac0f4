#include "aznas/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace aznas {

LayerSpec LayerSpec::conv(int k, int s, int p, int cin, int cout, int groups, bool bias) {
    if (k < 1 || s < 1 || p < 0 || cin < 1 || cout < 1 || groups < 1 ||
        cin % groups != 0 || cout % groups != 0)
        throw ArgumentError("conv: bad geometry");
    LayerSpec l;
    l.kind = LayerKind::conv2d;
    l.kernel = k;
    l.stride = s;
    l.pad = p;
    l.in_ch = cin;
    l.out_ch = cout;
    l.groups = groups;
    l.has_bias = bias;
    l.weight.assign(static_cast<std::size_t>(cout) * (cin / groups) * k * k, 0.0);
    if (bias) l.bias.assign(cout, 0.0);
    return l;
}

LayerSpec LayerSpec::batch_norm_layer(int ch) {
    LayerSpec l;
    l.kind = LayerKind::batch_norm;
    l.in_ch = l.out_ch = ch;
    l.weight.assign(ch, 1.0);  // gamma
    l.bias.assign(ch, 0.0);    // beta
    return l;
}

LayerSpec LayerSpec::relu_layer() {
    LayerSpec l;
    l.kind = LayerKind::relu;
    return l;
}

LayerSpec LayerSpec::avg_pool_layer(int k, int s, int p) {
    LayerSpec l;
    l.kind = LayerKind::avg_pool;
    l.kernel = k;
    l.stride = s;
    l.pad = p;
    return l;
}

LayerSpec LayerSpec::global_avg_pool_layer() {
    LayerSpec l;
    l.kind = LayerKind::global_avg_pool;
    return l;
}

LayerSpec LayerSpec::linear_layer(int in, int out, bool bias) {
    LayerSpec l;
    l.kind = LayerKind::linear;
    l.in_ch = in;
    l.out_ch = out;
    l.has_bias = bias;
    l.weight.assign(static_cast<std::size_t>(out) * in, 0.0);
    if (bias) l.bias.assign(out, 0.0);
    return l;
}

LayerSpec LayerSpec::zeroize_layer() {
    LayerSpec l;
    l.kind = LayerKind::zeroize;
    return l;
}

LayerSpec LayerSpec::identity_layer() {
    LayerSpec l;
    l.kind = LayerKind::identity;
    return l;
}

std::size_t LayerSpec::expected_weight_count() const {
    switch (kind) {
        case LayerKind::conv2d:
            return static_cast<std::size_t>(out_ch) * (in_ch / groups) * kernel * kernel;
        case LayerKind::linear:
            return static_cast<std::size_t>(out_ch) * in_ch;
        case LayerKind::batch_norm:
            return static_cast<std::size_t>(in_ch);
        default:
            return 0;
    }
}

std::size_t LayerSpec::expected_bias_count() const {
    switch (kind) {
        case LayerKind::conv2d:
        case LayerKind::linear:
            return has_bias ? static_cast<std::size_t>(out_ch) : 0;
        case LayerKind::batch_norm:
            return static_cast<std::size_t>(in_ch);
        default:
            return 0;
    }
}

int NetworkGraph::add(LayerSpec layer, std::vector<int> inputs) {
    if (layer.kind != LayerKind::identity && inputs.size() != 1)
        throw ArgumentError("non-identity node must have exactly one input");
    if (inputs.empty()) throw ArgumentError("node needs at least one input");
    const int id = static_cast<int>(nodes.size());
    for (int in : inputs)
        if (in < -1 || in >= id) throw ArgumentError("node input out of range");
    nodes.push_back(GraphNode{std::move(layer), std::move(inputs), 0, 0, 0});
    return id;
}

namespace {

struct Dims {
    int c, h, w;
};

Dims node_dims(const NetworkGraph& g, int id) {
    if (id == -1) return {g.in_ch, g.in_h, g.in_w};
    const GraphNode& n = g.nodes[static_cast<std::size_t>(id)];
    return {n.out_c, n.out_h, n.out_w};
}

int pooled_extent(int in, int k, int s, int p) {
    const int span = in + 2 * p - k;
    if (span < 0) return 0;
    return span / s + 1;
}

}  // namespace

void infer_shapes(NetworkGraph& graph) {
    if (graph.in_ch < 1 || graph.in_h < 1 || graph.in_w < 1)
        throw ArgumentError("graph input dims must be positive");
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        GraphNode& n = graph.nodes[i];
        const Dims d0 = node_dims(graph, n.inputs[0]);
        for (std::size_t j = 1; j < n.inputs.size(); ++j) {
            const Dims dj = node_dims(graph, n.inputs[j]);
            if (dj.c != d0.c || dj.h != d0.h || dj.w != d0.w)
                throw ArgumentError("summed inputs disagree in shape at node " +
                                    std::to_string(i));
        }
        switch (n.layer.kind) {
            case LayerKind::conv2d: {
                if (d0.c != n.layer.in_ch)
                    throw ArgumentError("conv in_ch mismatch at node " + std::to_string(i));
                n.out_c = n.layer.out_ch;
                n.out_h = pooled_extent(d0.h, n.layer.kernel, n.layer.stride, n.layer.pad);
                n.out_w = pooled_extent(d0.w, n.layer.kernel, n.layer.stride, n.layer.pad);
                if (n.out_h < 1 || n.out_w < 1)
                    throw ArgumentError("conv output collapsed at node " + std::to_string(i));
                break;
            }
            case LayerKind::avg_pool: {
                n.out_c = d0.c;
                n.out_h = pooled_extent(d0.h, n.layer.kernel, n.layer.stride, n.layer.pad);
                n.out_w = pooled_extent(d0.w, n.layer.kernel, n.layer.stride, n.layer.pad);
                if (n.out_h < 1 || n.out_w < 1)
                    throw ArgumentError("pool output collapsed at node " + std::to_string(i));
                break;
            }
            case LayerKind::global_avg_pool:
                n.out_c = d0.c;
                n.out_h = n.out_w = 1;
                break;
            case LayerKind::linear:
                if (d0.h != 1 || d0.w != 1 || d0.c != n.layer.in_ch)
                    throw ArgumentError("linear expects (in,1,1) at node " + std::to_string(i));
                n.out_c = n.layer.out_ch;
                n.out_h = n.out_w = 1;
                break;
            case LayerKind::batch_norm:
                if (d0.c != n.layer.in_ch)
                    throw ArgumentError("bn channel mismatch at node " + std::to_string(i));
                [[fallthrough]];
            case LayerKind::relu:
            case LayerKind::zeroize:
            case LayerKind::identity:
                n.out_c = d0.c;
                n.out_h = d0.h;
                n.out_w = d0.w;
                break;
        }
    }
}

void validate_blocks(const NetworkGraph& graph) {
    std::vector<int> owner(graph.nodes.size(), -1);
    int prev_output = -2;
    for (std::size_t l = 0; l < graph.blocks.size(); ++l) {
        const PrimaryBlock& blk = graph.blocks[l];
        if (blk.nodes.empty()) throw ArgumentError("empty primary block");
        for (int id : blk.nodes) {
            if (id < 0 || id >= static_cast<int>(graph.nodes.size()))
                throw ArgumentError("block node out of range");
            if (owner[static_cast<std::size_t>(id)] != -1)
                throw ArgumentError("primary blocks overlap");
            owner[static_cast<std::size_t>(id)] = static_cast<int>(l);
        }
        if (owner[static_cast<std::size_t>(blk.output_node)] != static_cast<int>(l))
            throw ArgumentError("block output_node not a member");
        if (l >= 1 && blk.input_node != prev_output)
            throw ArgumentError("block input slot does not chain to previous output");
        // Every member's inputs stay inside the block or hit the input slot.
        for (int id : blk.nodes)
            for (int in : graph.nodes[static_cast<std::size_t>(id)].inputs)
                if (in != blk.input_node && (in < 0 || owner[static_cast<std::size_t>(in)] !=
                                                          static_cast<int>(l)))
                    throw ArgumentError("block member consumes a non-member activation");
        prev_output = blk.output_node;
    }
}

std::uint64_t graph_macs(const NetworkGraph& graph) {
    std::uint64_t total = 0;
    for (const GraphNode& n : graph.nodes) {
        if (n.layer.kind == LayerKind::conv2d) {
            const LayerSpec& L = n.layer;
            total += static_cast<std::uint64_t>(L.kernel) * L.kernel *
                     (static_cast<std::uint64_t>(L.in_ch) / L.groups) * L.out_ch * n.out_h *
                     n.out_w;
        } else if (n.layer.kind == LayerKind::linear) {
            total += static_cast<std::uint64_t>(n.layer.in_ch) * n.layer.out_ch;
        }
    }
    return total;
}

InitMethod parse_init_method(const std::string& name) {
    if (name == "kaiming-fan-in" || name == "kaiming-normal-fan-in")
        return InitMethod::kaiming_normal_fan_in;
    if (name == "kaiming-fan-out" || name == "kaiming-normal-fan-out")
        return InitMethod::kaiming_normal_fan_out;
    if (name == "xavier-normal" || name == "xavier") return InitMethod::xavier_normal;
    if (name == "normal") return InitMethod::normal;
    if (name == "uniform") return InitMethod::uniform;
    throw ConfigError("unknown init method: " + name);
}

std::string init_method_name(InitMethod m) {
    switch (m) {
        case InitMethod::kaiming_normal_fan_in: return "kaiming-fan-in";
        case InitMethod::kaiming_normal_fan_out: return "kaiming-fan-out";
        case InitMethod::xavier_normal: return "xavier-normal";
        case InitMethod::normal: return "normal";
        case InitMethod::uniform: return "uniform";
    }
    return "?";
}

namespace {

void fan_counts(const LayerSpec& l, double& fan_in, double& fan_out) {
    if (l.kind == LayerKind::conv2d) {
        fan_in = static_cast<double>(l.in_ch / l.groups) * l.kernel * l.kernel;
        fan_out = static_cast<double>(l.out_ch) * l.kernel * l.kernel;
    } else {
        fan_in = static_cast<double>(l.in_ch);
        fan_out = static_cast<double>(l.out_ch);
    }
}

}  // namespace

void init_weights(NetworkGraph& graph, const InitSpec& spec) {
    const CounterRng root(spec.seed);
    for (std::size_t node = 0; node < graph.nodes.size(); ++node) {
        LayerSpec& l = graph.nodes[node].layer;
        if (l.kind == LayerKind::batch_norm) {
            std::fill(l.weight.begin(), l.weight.end(), 1.0);
            std::fill(l.bias.begin(), l.bias.end(), 0.0);
            continue;
        }
        if (l.kind != LayerKind::conv2d && l.kind != LayerKind::linear) continue;

        double fan_in = 1.0, fan_out = 1.0;
        fan_counts(l, fan_in, fan_out);
        const CounterRng stream = root.keyed(node);
        const std::size_t n = l.expected_weight_count();
        if (l.weight.size() != n) l.weight.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double v = 0.0;
            switch (spec.method) {
                case InitMethod::kaiming_normal_fan_in:
                    v = std::sqrt(2.0 / fan_in) * stream.gaussian(i);
                    break;
                case InitMethod::kaiming_normal_fan_out:
                    v = std::sqrt(2.0 / fan_out) * stream.gaussian(i);
                    break;
                case InitMethod::xavier_normal:
                    v = std::sqrt(2.0 / (fan_in + fan_out)) * stream.gaussian(i);
                    break;
                case InitMethod::normal:
                    v = spec.normal_std * stream.gaussian(i);
                    break;
                case InitMethod::uniform:
                    v = spec.uniform_lo +
                        (spec.uniform_hi - spec.uniform_lo) * stream.uniform01(i);
                    break;
            }
            l.weight[i] = v;
        }
        // Biases start at zero regardless of method.
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
}

Tensor4 sample_gaussian_input(int b, int c, int h, int w, std::uint64_t seed) {
    if (b < 1 || c < 1 || h < 1 || w < 1)
        throw ArgumentError("sample_gaussian_input: dims must be positive");
    Tensor4 t(b, c, h, w);
    const CounterRng rng = CounterRng(seed).keyed("gaussian-input");
    for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = rng.gaussian(i);
    return t;
}

Matrix sample_rademacher(int c, int n, std::uint64_t seed) {
    if (c < 1 || n < 1) throw ArgumentError("sample_rademacher: dims must be positive");
    Matrix m(c, n);
    const CounterRng rng = CounterRng(seed).keyed("rademacher");
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = rng.rademacher(i);
    return m;
}

namespace {

// ---- per-layer forward kernels ----

// Valid output range [lo, hi) for one kernel tap: oy*s + ky - p must land in
// [0, extent). Hoists the bounds test out of the pixel loops.
inline void tap_range(int kpos, int s, int p, int in_extent, int out_extent, int& lo, int& hi) {
    const int off = p - kpos;  // iy = oy*s - off
    lo = off <= 0 ? 0 : (off + s - 1) / s;
    const int top = in_extent - 1 + off;
    hi = top < 0 ? 0 : std::min(out_extent, top / s + 1);
    if (lo > hi) lo = hi;
}

Tensor4 conv_forward(const LayerSpec& l, const Tensor4& x, int out_h, int out_w) {
    Tensor4 y(x.b, l.out_ch, out_h, out_w);
    const int icg = l.in_ch / l.groups;
    const int ocg = l.out_ch / l.groups;
    const int k = l.kernel, s = l.stride, p = l.pad;
    for (int bi = 0; bi < x.b; ++bi) {
        for (int g = 0; g < l.groups; ++g) {
            for (int ocl = 0; ocl < ocg; ++ocl) {
                const int oc = g * ocg + ocl;
                double* out = &y.data[y.index(bi, oc, 0, 0)];
                if (l.has_bias) {
                    const double bval = l.bias[static_cast<std::size_t>(oc)];
                    for (int i = 0; i < out_h * out_w; ++i) out[i] = bval;
                }
                for (int icl = 0; icl < icg; ++icl) {
                    const int ic = g * icg + icl;
                    const double* in = &x.data[x.index(bi, ic, 0, 0)];
                    const double* wrow =
                        &l.weight[(static_cast<std::size_t>(oc) * icg + icl) * k * k];
                    for (int ky = 0; ky < k; ++ky) {
                        int oy_lo, oy_hi;
                        tap_range(ky, s, p, x.h, out_h, oy_lo, oy_hi);
                        for (int kx = 0; kx < k; ++kx) {
                            const double wv = wrow[ky * k + kx];
                            if (wv == 0.0) continue;
                            int ox_lo, ox_hi;
                            tap_range(kx, s, p, x.w, out_w, ox_lo, ox_hi);
                            for (int oy = oy_lo; oy < oy_hi; ++oy) {
                                const int iy = oy * s + ky - p;
                                double* orow = out + static_cast<std::size_t>(oy) * out_w;
                                const double* irow = in + static_cast<std::size_t>(iy) * x.w +
                                                     (static_cast<std::size_t>(ox_lo) * s + kx - p);
                                if (s == 1) {
                                    for (int ox = ox_lo; ox < ox_hi; ++ox)
                                        orow[ox] += wv * irow[ox - ox_lo];
                                } else {
                                    for (int ox = ox_lo; ox < ox_hi; ++ox)
                                        orow[ox] += wv * irow[static_cast<std::size_t>(ox - ox_lo) * s];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return y;
}

Tensor4 conv_backward(const LayerSpec& l, const Tensor4& g, int in_h, int in_w) {
    Tensor4 gin(g.b, l.in_ch, in_h, in_w);
    const int icg = l.in_ch / l.groups;
    const int ocg = l.out_ch / l.groups;
    const int k = l.kernel, s = l.stride, p = l.pad;
    for (int bi = 0; bi < g.b; ++bi) {
        for (int grp = 0; grp < l.groups; ++grp) {
            for (int ocl = 0; ocl < ocg; ++ocl) {
                const int oc = grp * ocg + ocl;
                const double* gout = &g.data[g.index(bi, oc, 0, 0)];
                for (int icl = 0; icl < icg; ++icl) {
                    const int ic = grp * icg + icl;
                    double* gi = &gin.data[gin.index(bi, ic, 0, 0)];
                    const double* wrow =
                        &l.weight[(static_cast<std::size_t>(oc) * icg + icl) * k * k];
                    for (int ky = 0; ky < k; ++ky) {
                        int oy_lo, oy_hi;
                        tap_range(ky, s, p, in_h, g.h, oy_lo, oy_hi);
                        for (int kx = 0; kx < k; ++kx) {
                            const double wv = wrow[ky * k + kx];
                            if (wv == 0.0) continue;
                            int ox_lo, ox_hi;
                            tap_range(kx, s, p, in_w, g.w, ox_lo, ox_hi);
                            for (int oy = oy_lo; oy < oy_hi; ++oy) {
                                const int iy = oy * s + ky - p;
                                const double* grow = gout + static_cast<std::size_t>(oy) * g.w;
                                double* girow = gi + static_cast<std::size_t>(iy) * in_w +
                                                (static_cast<std::size_t>(ox_lo) * s + kx - p);
                                if (s == 1) {
                                    for (int ox = ox_lo; ox < ox_hi; ++ox)
                                        girow[ox - ox_lo] += wv * grow[ox];
                                } else {
                                    for (int ox = ox_lo; ox < ox_hi; ++ox)
                                        girow[static_cast<std::size_t>(ox - ox_lo) * s] += wv * grow[ox];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return gin;
}

Tensor4 avg_pool_forward(const LayerSpec& l, const Tensor4& x, int out_h, int out_w) {
    Tensor4 y(x.b, x.c, out_h, out_w);
    const int k = l.kernel, s = l.stride, p = l.pad;
    const double inv = 1.0 / (static_cast<double>(k) * k);
    for (int bi = 0; bi < x.b; ++bi)
        for (int ci = 0; ci < x.c; ++ci)
            for (int oy = 0; oy < out_h; ++oy)
                for (int ox = 0; ox < out_w; ++ox) {
                    double acc = 0.0;
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy * s + ky - p;
                        if (iy < 0 || iy >= x.h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox * s + kx - p;
                            if (ix < 0 || ix >= x.w) continue;
                            acc += x.at(bi, ci, iy, ix);
                        }
                    }
                    y.at(bi, ci, oy, ox) = acc * inv;
                }
    return y;
}

Tensor4 avg_pool_backward(const LayerSpec& l, const Tensor4& g, int in_h, int in_w) {
    Tensor4 gin(g.b, g.c, in_h, in_w);
    const int k = l.kernel, s = l.stride, p = l.pad;
    const double inv = 1.0 / (static_cast<double>(k) * k);
    for (int bi = 0; bi < g.b; ++bi)
        for (int ci = 0; ci < g.c; ++ci)
            for (int oy = 0; oy < g.h; ++oy)
                for (int ox = 0; ox < g.w; ++ox) {
                    const double gv = g.at(bi, ci, oy, ox) * inv;
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy * s + ky - p;
                        if (iy < 0 || iy >= in_h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox * s + kx - p;
                            if (ix < 0 || ix >= in_w) continue;
                            gin.at(bi, ci, iy, ix) += gv;
                        }
                    }
                }
    return gin;
}

Tensor4 bn_forward(const LayerSpec& l, const Tensor4& x, BnBatchStats& stats) {
    const int n = x.b * x.h * x.w;
    stats.mean.assign(static_cast<std::size_t>(x.c), 0.0);
    stats.var.assign(static_cast<std::size_t>(x.c), 0.0);
    for (int ci = 0; ci < x.c; ++ci) {
        double m = 0.0;
        for (int bi = 0; bi < x.b; ++bi) {
            const double* row = &x.data[x.index(bi, ci, 0, 0)];
            for (int i = 0; i < x.h * x.w; ++i) m += row[i];
        }
        m /= n;
        double v = 0.0;
        for (int bi = 0; bi < x.b; ++bi) {
            const double* row = &x.data[x.index(bi, ci, 0, 0)];
            for (int i = 0; i < x.h * x.w; ++i) {
                const double d = row[i] - m;
                v += d * d;
            }
        }
        v /= n;
        stats.mean[static_cast<std::size_t>(ci)] = m;
        stats.var[static_cast<std::size_t>(ci)] = v;
    }
    Tensor4 y(x.b, x.c, x.h, x.w);
    for (int ci = 0; ci < x.c; ++ci) {
        const double m = stats.mean[static_cast<std::size_t>(ci)];
        const double inv_std = 1.0 / std::sqrt(stats.var[static_cast<std::size_t>(ci)] + kBnEps);
        const double gamma = l.weight[static_cast<std::size_t>(ci)];
        const double beta = l.bias[static_cast<std::size_t>(ci)];
        for (int bi = 0; bi < x.b; ++bi) {
            const double* in = &x.data[x.index(bi, ci, 0, 0)];
            double* out = &y.data[y.index(bi, ci, 0, 0)];
            for (int i = 0; i < x.h * x.w; ++i) out[i] = gamma * (in[i] - m) * inv_std + beta;
        }
    }
    return y;
}

// Backward through batch statistics:
//   dL/dx_j = gamma * s * (g_j - mean(g) - xhat_j * mean(g * xhat))
Tensor4 bn_backward(const LayerSpec& l, const Tensor4& g, const Tensor4& x,
                    const BnBatchStats& stats) {
    const int n = x.b * x.h * x.w;
    Tensor4 gin(x.b, x.c, x.h, x.w);
    for (int ci = 0; ci < x.c; ++ci) {
        const double m = stats.mean[static_cast<std::size_t>(ci)];
        const double inv_std = 1.0 / std::sqrt(stats.var[static_cast<std::size_t>(ci)] + kBnEps);
        const double gamma = l.weight[static_cast<std::size_t>(ci)];
        double sum_g = 0.0, sum_gx = 0.0;
        for (int bi = 0; bi < x.b; ++bi) {
            const double* gr = &g.data[g.index(bi, ci, 0, 0)];
            const double* xr = &x.data[x.index(bi, ci, 0, 0)];
            for (int i = 0; i < x.h * x.w; ++i) {
                sum_g += gr[i];
                sum_gx += gr[i] * (xr[i] - m) * inv_std;
            }
        }
        const double mean_g = sum_g / n;
        const double mean_gx = sum_gx / n;
        for (int bi = 0; bi < x.b; ++bi) {
            const double* gr = &g.data[g.index(bi, ci, 0, 0)];
            const double* xr = &x.data[x.index(bi, ci, 0, 0)];
            double* gi = &gin.data[gin.index(bi, ci, 0, 0)];
            for (int i = 0; i < x.h * x.w; ++i) {
                const double xhat = (xr[i] - m) * inv_std;
                gi[i] = gamma * inv_std * (gr[i] - mean_g - xhat * mean_gx);
            }
        }
    }
    return gin;
}

Tensor4 linear_forward(const LayerSpec& l, const Tensor4& x) {
    Tensor4 y(x.b, l.out_ch, 1, 1);
    for (int bi = 0; bi < x.b; ++bi) {
        const double* in = &x.data[x.index(bi, 0, 0, 0)];
        for (int o = 0; o < l.out_ch; ++o) {
            double acc = l.has_bias ? l.bias[static_cast<std::size_t>(o)] : 0.0;
            const double* wr = &l.weight[static_cast<std::size_t>(o) * l.in_ch];
            for (int i = 0; i < l.in_ch; ++i) acc += wr[i] * in[i];
            y.at(bi, o, 0, 0) = acc;
        }
    }
    return y;
}

Tensor4 linear_backward(const LayerSpec& l, const Tensor4& g) {
    Tensor4 gin(g.b, l.in_ch, 1, 1);
    for (int bi = 0; bi < g.b; ++bi) {
        double* gi = &gin.data[gin.index(bi, 0, 0, 0)];
        for (int o = 0; o < l.out_ch; ++o) {
            const double gv = g.at(bi, o, 0, 0);
            if (gv == 0.0) continue;
            const double* wr = &l.weight[static_cast<std::size_t>(o) * l.in_ch];
            for (int i = 0; i < l.in_ch; ++i) gi[i] += wr[i] * gv;
        }
    }
    return gin;
}

const Tensor4& producer_output(const ForwardCache& cache, int id) {
    if (id == -1) return cache.input;
    if (!cache.retained[static_cast<std::size_t>(id)])
        throw ArgumentError("activation for node " + std::to_string(id) +
                            " was not retained by forward");
    return cache.node_out[static_cast<std::size_t>(id)];
}

void add_into(Tensor4& dst, const Tensor4& src) {
    for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace

ForwardCache forward(const NetworkGraph& graph, const Tensor4& input) {
    if (input.c != graph.in_ch || input.h != graph.in_h || input.w != graph.in_w)
        throw ArgumentError("forward: input shape does not match graph stem");
    if (input.b < 1) throw ArgumentError("forward: empty batch");

    const std::size_t n_nodes = graph.nodes.size();

    // Which node outputs must outlive the forward pass. The network input is
    // always kept.
    std::vector<char> retained(n_nodes, 0);
    auto mark = [&](int id) {
        if (id >= 0) retained[static_cast<std::size_t>(id)] = 1;
    };
    for (const PrimaryBlock& blk : graph.blocks) {
        mark(blk.output_node);
        mark(blk.input_node);
        for (int id : blk.nodes) {
            const GraphNode& n = graph.nodes[static_cast<std::size_t>(id)];
            if (n.layer.kind == LayerKind::relu || n.layer.kind == LayerKind::batch_norm)
                mark(n.inputs[0]);
        }
    }
    if (graph.output_node >= 0) mark(graph.output_node);

    std::vector<int> uses(n_nodes, 0);
    for (const GraphNode& n : graph.nodes)
        for (int in : n.inputs)
            if (in >= 0) ++uses[static_cast<std::size_t>(in)];

    ForwardCache cache;
    cache.node_out.resize(n_nodes);
    cache.bn.resize(n_nodes);
    cache.retained = retained;
    cache.input = input;

    for (std::size_t i = 0; i < n_nodes; ++i) {
        const GraphNode& n = graph.nodes[i];
        auto src = [&](int id) -> const Tensor4& {
            return id == -1 ? cache.input : cache.node_out[static_cast<std::size_t>(id)];
        };

        Tensor4 out;
        if (n.layer.kind == LayerKind::identity) {
            out = src(n.inputs[0]);
            for (std::size_t j = 1; j < n.inputs.size(); ++j) add_into(out, src(n.inputs[j]));
        } else {
            const Tensor4& x = src(n.inputs[0]);
            switch (n.layer.kind) {
                case LayerKind::conv2d:
                    out = conv_forward(n.layer, x, n.out_h, n.out_w);
                    break;
                case LayerKind::batch_norm:
                    out = bn_forward(n.layer, x, cache.bn[i]);
                    break;
                case LayerKind::relu: {
                    out = Tensor4(x.b, x.c, x.h, x.w);
                    for (std::size_t j = 0; j < x.data.size(); ++j)
                        out.data[j] = x.data[j] > 0.0 ? x.data[j] : 0.0;
                    break;
                }
                case LayerKind::avg_pool:
                    out = avg_pool_forward(n.layer, x, n.out_h, n.out_w);
                    break;
                case LayerKind::global_avg_pool: {
                    out = Tensor4(x.b, x.c, 1, 1);
                    const double inv = 1.0 / (static_cast<double>(x.h) * x.w);
                    for (int bi = 0; bi < x.b; ++bi)
                        for (int ci = 0; ci < x.c; ++ci) {
                            double acc = 0.0;
                            const double* row = &x.data[x.index(bi, ci, 0, 0)];
                            for (int k = 0; k < x.h * x.w; ++k) acc += row[k];
                            out.at(bi, ci, 0, 0) = acc * inv;
                        }
                    break;
                }
                case LayerKind::linear:
                    out = linear_forward(n.layer, x);
                    break;
                case LayerKind::zeroize:
                    out = Tensor4(x.b, x.c, x.h, x.w);
                    break;
                case LayerKind::identity:
                    break;  // handled above
            }
        }

        if (!out.all_finite())
            throw NumericFailure("non-finite activation", static_cast<int>(i));
        cache.node_out[i] = std::move(out);

        // Release inputs whose consumers are all done.
        for (int in : n.inputs) {
            if (in < 0) continue;
            const std::size_t idx = static_cast<std::size_t>(in);
            if (--uses[idx] == 0 && !retained[idx]) cache.node_out[idx] = Tensor4{};
        }
    }
    for (std::size_t i = 0; i < n_nodes; ++i)
        if (!retained[i] && uses[i] == 0) cache.node_out[i] = Tensor4{};
    return cache;
}

const Tensor4& block_output(const NetworkGraph& graph, const ForwardCache& cache,
                            int block_index) {
    const PrimaryBlock& blk = graph.blocks.at(static_cast<std::size_t>(block_index));
    return producer_output(cache, blk.output_node);
}

const Tensor4& block_input(const NetworkGraph& graph, const ForwardCache& cache,
                           int block_index) {
    const PrimaryBlock& blk = graph.blocks.at(static_cast<std::size_t>(block_index));
    return producer_output(cache, blk.input_node);
}

Tensor4 block_vjp(const NetworkGraph& graph, const ForwardCache& cache, int block_index,
                  const Tensor4& grad_out) {
    const PrimaryBlock& blk = graph.blocks.at(static_cast<std::size_t>(block_index));
    const GraphNode& out_node = graph.nodes[static_cast<std::size_t>(blk.output_node)];
    if (grad_out.c != out_node.out_c || grad_out.h != out_node.out_h ||
        grad_out.w != out_node.out_w || grad_out.b != cache.input.b)
        throw ArgumentError("block_vjp: grad_out shape mismatch");

    // Gradients per node id, shifted by one so id -1 (network input) maps to 0.
    std::vector<Tensor4> grads(graph.nodes.size() + 1);
    std::vector<char> has_grad(graph.nodes.size() + 1, 0);
    auto gslot = [&](int id) -> Tensor4& { return grads[static_cast<std::size_t>(id + 1)]; };
    auto gflag = [&](int id) -> char& { return has_grad[static_cast<std::size_t>(id + 1)]; };
    auto accumulate = [&](int id, Tensor4&& t) {
        if (!gflag(id)) {
            gslot(id) = std::move(t);
            gflag(id) = 1;
        } else {
            add_into(gslot(id), t);
        }
    };

    gslot(blk.output_node) = grad_out;
    gflag(blk.output_node) = 1;

    for (auto it = blk.nodes.rbegin(); it != blk.nodes.rend(); ++it) {
        const int id = *it;
        if (!gflag(id)) continue;
        const GraphNode& n = graph.nodes[static_cast<std::size_t>(id)];
        Tensor4 g = std::move(gslot(id));
        gflag(id) = 0;
        gslot(id) = Tensor4{};

        if (!g.all_finite()) throw NumericFailure("non-finite gradient", id);

        switch (n.layer.kind) {
            case LayerKind::identity: {
                // Sum junction: the same gradient flows to every input.
                for (std::size_t j = 0; j + 1 < n.inputs.size(); ++j)
                    accumulate(n.inputs[j], Tensor4(g));
                accumulate(n.inputs.back(), std::move(g));
                break;
            }
            case LayerKind::zeroize:
                break;  // no path
            case LayerKind::relu: {
                const Tensor4& x = producer_output(cache, n.inputs[0]);
                Tensor4 gin(g.b, g.c, g.h, g.w);
                for (std::size_t j = 0; j < g.data.size(); ++j)
                    gin.data[j] = x.data[j] > 0.0 ? g.data[j] : 0.0;
                accumulate(n.inputs[0], std::move(gin));
                break;
            }
            case LayerKind::batch_norm: {
                const Tensor4& x = producer_output(cache, n.inputs[0]);
                accumulate(n.inputs[0],
                           bn_backward(n.layer, g, x, cache.bn[static_cast<std::size_t>(id)]));
                break;
            }
            case LayerKind::conv2d: {
                const Dims din = node_dims(graph, n.inputs[0]);
                accumulate(n.inputs[0], conv_backward(n.layer, g, din.h, din.w));
                break;
            }
            case LayerKind::avg_pool: {
                const Dims din = node_dims(graph, n.inputs[0]);
                accumulate(n.inputs[0], avg_pool_backward(n.layer, g, din.h, din.w));
                break;
            }
            case LayerKind::global_avg_pool: {
                const Dims din = node_dims(graph, n.inputs[0]);
                Tensor4 gin(g.b, g.c, din.h, din.w);
                const double inv = 1.0 / (static_cast<double>(din.h) * din.w);
                for (int bi = 0; bi < g.b; ++bi)
                    for (int ci = 0; ci < g.c; ++ci) {
                        const double gv = g.at(bi, ci, 0, 0) * inv;
                        double* row = &gin.data[gin.index(bi, ci, 0, 0)];
                        for (int k = 0; k < din.h * din.w; ++k) row[k] = gv;
                    }
                accumulate(n.inputs[0], std::move(gin));
                break;
            }
            case LayerKind::linear:
                accumulate(n.inputs[0], linear_backward(n.layer, g));
                break;
        }
    }

    if (gflag(blk.input_node)) {
        Tensor4 result = std::move(gslot(blk.input_node));
        if (!result.all_finite())
            throw NumericFailure("non-finite gradient at block input", blk.input_node);
        return result;
    }
    // No gradient path (e.g. an all-zeroize block): exact zeros.
    const Dims din = node_dims(graph, blk.input_node);
    return Tensor4(cache.input.b, din.c, din.h, din.w);
}

}  // namespace aznas
