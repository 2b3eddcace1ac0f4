#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aznas/rng.hpp"
#include "aznas/tensor.hpp"

namespace aznas {

// Batch-norm epsilon. Kept tiny so normalized batch variance is 1 to ~1e-10;
// 64-bit arithmetic tolerates it, dead channels just produce large finite
// gradients.
inline constexpr double kBnEps = 1e-10;

enum class LayerKind {
    conv2d,
    batch_norm,
    relu,
    avg_pool,
    global_avg_pool,
    linear,
    zeroize,   // the "none" op: output is a zero tensor of the input shape
    identity,  // pass-through; with multiple graph inputs it is the sum junction
};

struct LayerSpec {
    LayerKind kind = LayerKind::identity;

    // conv2d / avg_pool geometry (avg_pool ignores channels/groups).
    int kernel = 0, stride = 1, pad = 0;
    int in_ch = 0, out_ch = 0, groups = 1;
    bool has_bias = false;

    // conv: out_ch * (in_ch/groups) * k * k; linear: out_ch * in_ch; bn: gamma[ch].
    std::vector<double> weight;
    // conv/linear bias when has_bias; bn: beta[ch].
    std::vector<double> bias;

    static LayerSpec conv(int k, int s, int p, int cin, int cout, int groups = 1,
                          bool bias = false);
    static LayerSpec batch_norm_layer(int ch);
    static LayerSpec relu_layer();
    static LayerSpec avg_pool_layer(int k, int s, int p);
    static LayerSpec global_avg_pool_layer();
    static LayerSpec linear_layer(int in, int out, bool bias = true);
    static LayerSpec zeroize_layer();
    static LayerSpec identity_layer();

    // Number of trainable weight entries (weight + bias), for init addressing.
    std::size_t expected_weight_count() const;
    std::size_t expected_bias_count() const;
};

// One graph node: a layer applied to the elementwise sum of its inputs.
// Non-identity layers always have exactly one input; explicit identity nodes
// act as sum junctions. Input id -1 denotes the network input tensor.
struct GraphNode {
    LayerSpec layer;
    std::vector<int> inputs;
    // Filled by infer_shapes.
    int out_c = 0, out_h = 0, out_w = 0;
};

// A primary block: the node span between consecutive measurement slots.
// `input_node` produces f_{l-1} (it is not a member); `output_node` produces
// f_l. Every member's inputs are members or `input_node`.
struct PrimaryBlock {
    std::vector<int> nodes;  // topologically ordered subset
    int input_node = -1;
    int output_node = -1;
};

struct NetworkGraph {
    int in_ch = 0, in_h = 0, in_w = 0;
    std::vector<GraphNode> nodes;  // topological order
    std::vector<PrimaryBlock> blocks;
    int output_node = -1;  // head output (logits)

    int add(LayerSpec layer, std::vector<int> inputs);
    std::size_t block_count() const { return blocks.size(); }
};

// Per-image shape inference; validates layer/edge shape contracts.
void infer_shapes(NetworkGraph& graph);

// Structural block sanity: disjoint, ordered, chained input/output slots.
void validate_blocks(const NetworkGraph& graph);

// Analytic MAC walk over the inferred shapes (per image, batch excluded):
// conv k^2*(Cin/groups)*Cout*Hout*Wout, linear in*out, everything else 0.
std::uint64_t graph_macs(const NetworkGraph& graph);

enum class InitMethod {
    kaiming_normal_fan_in,
    kaiming_normal_fan_out,
    xavier_normal,
    normal,
    uniform,
};

struct InitSpec {
    InitMethod method = InitMethod::kaiming_normal_fan_in;
    std::uint64_t seed = 0;
    double normal_std = 0.1;  // normal(std)
    double uniform_lo = -0.1, uniform_hi = 0.1;
};

InitMethod parse_init_method(const std::string& name);
std::string init_method_name(InitMethod m);

// Draws every trainable weight from a counter stream keyed by
// (seed, node index, weight index); batch-norm gets gamma=1, beta=0.
void init_weights(NetworkGraph& graph, const InitSpec& spec);

Tensor4 sample_gaussian_input(int b, int c, int h, int w, std::uint64_t seed);

// c x n matrix of +-1 entries, column p is the probe vector for position p.
Matrix sample_rademacher(int c, int n, std::uint64_t seed);

struct BnBatchStats {
    std::vector<double> mean;  // per channel
    std::vector<double> var;   // biased batch variance, per channel
};

// Forward cache: activations needed by block VJPs plus the block outputs.
struct ForwardCache {
    std::vector<Tensor4> node_out;     // empty tensor where not retained
    std::vector<BnBatchStats> bn;      // per node, filled for batch_norm nodes
    std::vector<char> retained;        // whether node_out[i] is valid
    Tensor4 input;                     // network input (retained when a block needs it)
};

// Runs the whole network once with batch statistics; keeps in `cache` every
// activation a later block_vjp will need. Throws NumericFailure on NaN/Inf.
ForwardCache forward(const NetworkGraph& graph, const Tensor4& input);

const Tensor4& block_output(const NetworkGraph& graph, const ForwardCache& cache,
                            int block_index);
const Tensor4& block_input(const NetworkGraph& graph, const ForwardCache& cache,
                           int block_index);

// d<grad_out, f_l>/d f_{l-1}, propagated through block l's nodes only.
// Multi-path merges sum; batch-norm backward includes the batch-statistic
// terms.
Tensor4 block_vjp(const NetworkGraph& graph, const ForwardCache& cache,
                  int block_index, const Tensor4& grad_out);

}  // namespace aznas
