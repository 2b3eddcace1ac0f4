#include <vector>

#include "aznas/errors.hpp"
#include "aznas/space.hpp"

namespace aznas {

namespace {

// Appends one cell; returns the node ids added and the output junction.
// `collector` receives every added node id.
struct CellResult {
    std::vector<int> nodes;
    int output = -1;
};

CellResult build_cell(NetworkGraph& g, const CellGenotype& geno, int input_id, int channels) {
    CellResult res;
    auto add = [&](LayerSpec l, std::vector<int> in) {
        const int id = g.add(std::move(l), std::move(in));
        res.nodes.push_back(id);
        return id;
    };

    std::array<int, 4> node_id{input_id, -1, -1, -1};
    int edge = 0;
    for (int target = 1; target <= 3; ++target) {
        std::vector<int> incoming;
        for (int src = 0; src < target; ++src, ++edge) {
            const int from = node_id[static_cast<std::size_t>(src)];
            switch (geno.edge_ops[static_cast<std::size_t>(edge)]) {
                case op_none:
                    incoming.push_back(add(LayerSpec::zeroize_layer(), {from}));
                    break;
                case op_skip_connect:
                    incoming.push_back(from);
                    break;
                case op_nor_conv_1x1: {
                    const int r = add(LayerSpec::relu_layer(), {from});
                    const int c = add(LayerSpec::conv(1, 1, 0, channels, channels), {r});
                    incoming.push_back(add(LayerSpec::batch_norm_layer(channels), {c}));
                    break;
                }
                case op_nor_conv_3x3: {
                    const int r = add(LayerSpec::relu_layer(), {from});
                    const int c = add(LayerSpec::conv(3, 1, 1, channels, channels), {r});
                    incoming.push_back(add(LayerSpec::batch_norm_layer(channels), {c}));
                    break;
                }
                case op_avg_pool_3x3:
                    incoming.push_back(add(LayerSpec::avg_pool_layer(3, 1, 1), {from}));
                    break;
                default:
                    throw ArgumentError("cell op id out of range");
            }
        }
        node_id[static_cast<std::size_t>(target)] = add(LayerSpec::identity_layer(), incoming);
    }
    res.output = node_id[3];
    return res;
}

// Residual reduction between stages: ReLU-conv3x3(s2)-BN, ReLU-conv3x3-BN main
// path plus avgpool(2)+conv1x1 shortcut, summed.
CellResult build_downsample(NetworkGraph& g, int input_id, int cin) {
    CellResult res;
    auto add = [&](LayerSpec l, std::vector<int> in) {
        const int id = g.add(std::move(l), std::move(in));
        res.nodes.push_back(id);
        return id;
    };
    const int cout = 2 * cin;
    const int r1 = add(LayerSpec::relu_layer(), {input_id});
    const int c1 = add(LayerSpec::conv(3, 2, 1, cin, cout), {r1});
    const int b1 = add(LayerSpec::batch_norm_layer(cout), {c1});
    const int r2 = add(LayerSpec::relu_layer(), {b1});
    const int c2 = add(LayerSpec::conv(3, 1, 1, cout, cout), {r2});
    const int b2 = add(LayerSpec::batch_norm_layer(cout), {c2});
    const int pool = add(LayerSpec::avg_pool_layer(2, 2, 0), {input_id});
    const int sc = add(LayerSpec::conv(1, 1, 0, cin, cout), {pool});
    res.output = add(LayerSpec::identity_layer(), {b2, sc});
    return res;
}

NetworkGraph instantiate_nb201(const CellGenotype& geno, const Nb201Space& sp) {
    NetworkGraph g;
    g.in_ch = 3;
    g.in_h = g.in_w = sp.resolution;

    const int stem_conv = g.add(LayerSpec::conv(3, 1, 1, 3, sp.stem_width), {-1});
    const int stem_bn = g.add(LayerSpec::batch_norm_layer(sp.stem_width), {stem_conv});

    int prev_output = stem_bn;
    for (int stage = 0; stage < 3; ++stage) {
        const int channels = sp.stem_width << stage;
        std::vector<int> pending;  // downsample nodes prepended to the next block
        if (stage > 0) {
            CellResult ds = build_downsample(g, prev_output, channels / 2);
            pending = std::move(ds.nodes);
            prev_output = ds.output;
        }
        for (int i = 0; i < sp.cells_per_stage; ++i) {
            PrimaryBlock blk;
            blk.input_node = g.blocks.empty() ? stem_bn : g.blocks.back().output_node;
            CellResult cell = build_cell(g, geno, prev_output, channels);
            blk.nodes = std::move(pending);
            blk.nodes.insert(blk.nodes.end(), cell.nodes.begin(), cell.nodes.end());
            pending.clear();
            blk.output_node = cell.output;
            prev_output = cell.output;
            g.blocks.push_back(std::move(blk));
        }
    }

    const int head_bn = g.add(LayerSpec::batch_norm_layer(sp.stem_width * 4), {prev_output});
    const int head_relu = g.add(LayerSpec::relu_layer(), {head_bn});
    const int gap = g.add(LayerSpec::global_avg_pool_layer(), {head_relu});
    g.output_node =
        g.add(LayerSpec::linear_layer(sp.stem_width * 4, sp.classes, true), {gap});
    return g;
}

NetworkGraph instantiate_mobile(const MacroGenotype& m, const MobileSpace& sp) {
    NetworkGraph g;
    g.in_ch = 3;
    g.in_h = g.in_w = sp.resolution;

    const int stem_conv = g.add(LayerSpec::conv(3, 2, 1, 3, m.stem_ch), {-1});
    const int stem_bn = g.add(LayerSpec::batch_norm_layer(m.stem_ch), {stem_conv});
    const int stem_relu = g.add(LayerSpec::relu_layer(), {stem_bn});

    int prev_output = stem_relu;
    int cin = m.stem_ch;
    for (const MacroStage& st : m.stages) {
        for (int b = 0; b < st.depth; ++b) {
            const int stride = (b == 0) ? st.stride : 1;
            const int cmid = cin * st.expansion;
            PrimaryBlock blk;
            blk.input_node = prev_output;
            auto add = [&](LayerSpec l, std::vector<int> in) {
                const int id = g.add(std::move(l), std::move(in));
                blk.nodes.push_back(id);
                return id;
            };
            int cur = prev_output;
            if (st.expansion > 1) {
                cur = add(LayerSpec::conv(1, 1, 0, cin, cmid), {cur});
                cur = add(LayerSpec::batch_norm_layer(cmid), {cur});
                cur = add(LayerSpec::relu_layer(), {cur});
            }
            cur = add(LayerSpec::conv(st.kernel, stride, st.kernel / 2, cmid, cmid, cmid), {cur});
            cur = add(LayerSpec::batch_norm_layer(cmid), {cur});
            cur = add(LayerSpec::relu_layer(), {cur});
            cur = add(LayerSpec::conv(1, 1, 0, cmid, st.width), {cur});
            cur = add(LayerSpec::batch_norm_layer(st.width), {cur});
            if (stride == 1 && cin == st.width)
                cur = add(LayerSpec::identity_layer(), {cur, prev_output});
            blk.output_node = cur;
            prev_output = cur;
            cin = st.width;
            g.blocks.push_back(std::move(blk));
        }
    }

    const int head_conv = g.add(LayerSpec::conv(1, 1, 0, cin, m.classifier_width), {prev_output});
    const int head_bn = g.add(LayerSpec::batch_norm_layer(m.classifier_width), {head_conv});
    const int head_relu = g.add(LayerSpec::relu_layer(), {head_bn});
    const int gap = g.add(LayerSpec::global_avg_pool_layer(), {head_relu});
    g.output_node =
        g.add(LayerSpec::linear_layer(m.classifier_width, sp.classes, true), {gap});
    return g;
}

}  // namespace

NetworkGraph instantiate(const Genotype& geno, const SpaceSpec& space, const InitSpec& init) {
    validate_space(space);
    validate_genotype(geno, space);
    NetworkGraph g = space.is_nb201()
                         ? instantiate_nb201(std::get<CellGenotype>(geno), space.nb201())
                         : instantiate_mobile(std::get<MacroGenotype>(geno), space.mobile());
    infer_shapes(g);
    validate_blocks(g);
    init_weights(g, init);
    return g;
}

}  // namespace aznas
