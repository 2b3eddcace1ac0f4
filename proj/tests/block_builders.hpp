#pragma once

// Hand-built graphs and finite-difference helpers shared by the unit and
// acceptance suites.

#include <cmath>
#include <vector>

#include "aznas/net.hpp"
#include "aznas/rng.hpp"

namespace aznas_test {

using namespace aznas;

struct BlockBuilder {
    NetworkGraph g;
    PrimaryBlock blk;
    int cur = -1;

    explicit BlockBuilder(int c, int h, int w) {
        g.in_ch = c;
        g.in_h = h;
        g.in_w = w;
        blk.input_node = -1;
    }
    int add(LayerSpec l, std::vector<int> in) {
        const int id = g.add(std::move(l), std::move(in));
        blk.nodes.push_back(id);
        return id;
    }
    int chain(LayerSpec l) { return cur = add(std::move(l), {cur}); }
    NetworkGraph done(std::uint64_t init_seed = 1) {
        blk.output_node = cur;
        g.blocks.push_back(blk);
        infer_shapes(g);
        validate_blocks(g);
        init_weights(g, InitSpec{InitMethod::kaiming_normal_fan_in, init_seed});
        return std::move(g);
    }
};

inline double inner(const Tensor4& a, const Tensor4& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

inline Tensor4 axpy(const Tensor4& x, double eps, const Tensor4& d) {
    Tensor4 y = x;
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += eps * d.data[i];
    return y;
}

// Random single-block graph mixing conv / bn / relu / avgpool, sometimes with
// a residual sum back to the input.
inline NetworkGraph random_small_block(SeqRng& rng) {
    const int c = 2 + static_cast<int>(rng.below(3));
    const int h = 3 + static_cast<int>(rng.below(2));
    BlockBuilder b(c, h, h);
    b.cur = -1;
    int cur_c = c;
    const int depth = 2 + static_cast<int>(rng.below(3));
    for (int i = 0; i < depth; ++i) {
        switch (rng.below(5)) {
            case 0: {
                const int oc = 2 + static_cast<int>(rng.below(3));
                b.chain(LayerSpec::conv(3, 1, 1, cur_c, oc));
                cur_c = oc;
                break;
            }
            case 1: {
                const int oc = 2 + static_cast<int>(rng.below(3));
                b.chain(LayerSpec::conv(1, 1, 0, cur_c, oc));
                cur_c = oc;
                break;
            }
            case 2:
                b.chain(LayerSpec::batch_norm_layer(cur_c));
                break;
            case 3:
                b.chain(LayerSpec::relu_layer());
                break;
            default:
                b.chain(LayerSpec::avg_pool_layer(3, 1, 1));
                break;
        }
    }
    if (cur_c == c && rng.below(2)) b.add(LayerSpec::identity_layer(), {b.cur, -1});
    if (!b.g.nodes.empty()) b.cur = static_cast<int>(b.g.nodes.size()) - 1;
    return b.done(rng.next_bits());
}

inline bool kink_adjacent(const NetworkGraph& g, const ForwardCache& cache, double margin) {
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        if (g.nodes[i].layer.kind != LayerKind::relu) continue;
        const int in = g.nodes[i].inputs[0];
        const Tensor4& pre =
            in == -1 ? cache.input : cache.node_out[static_cast<std::size_t>(in)];
        for (double v : pre.data)
            if (std::abs(v) < margin) return true;
    }
    return false;
}

// Two-block graph whose second block is a bare 1x1 conv (a pure linear map).
inline NetworkGraph linear_block_graph(int cin, int cout, int h, int w, std::uint64_t seed) {
    NetworkGraph g;
    g.in_ch = cin;
    g.in_h = h;
    g.in_w = w;
    const int pre = g.add(LayerSpec::identity_layer(), {-1});
    const int conv = g.add(LayerSpec::conv(1, 1, 0, cin, cout), {pre});
    g.blocks.push_back(PrimaryBlock{{pre}, -1, pre});
    g.blocks.push_back(PrimaryBlock{{conv}, pre, conv});
    infer_shapes(g);
    validate_blocks(g);
    init_weights(g, InitSpec{InitMethod::kaiming_normal_fan_in, seed});
    return g;
}

}  // namespace aznas_test
