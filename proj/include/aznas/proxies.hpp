#pragma once

#include <cstdint>
#include <vector>

#include "aznas/linalg.hpp"
#include "aznas/net.hpp"
#include "aznas/space.hpp"
#include "aznas/tensor.hpp"

namespace aznas {

// The four per-architecture proxy scores. On a failed evaluation every field
// is NaN so the architecture ranks at the bottom of every proxy.
struct ProxyScores {
    double s_E = 0.0;  // expressivity: summed block feature-space entropy, >= 0
    double s_P = 0.0;  // progressivity: min consecutive entropy increment
    double s_T = 0.0;  // trainability: mean of -(sigma + 1/sigma - 2), <= 0
    double s_C = 0.0;  // complexity: analytic MAC count
};

struct BlockStats {
    std::vector<double> block_entropy;  // length L
    std::vector<double> block_sigma;    // length L-1, blocks 2..L
};

struct ScoringConfig {
    int batch = 64;
    int resolution = 0;  // 0: use the space's resolution
    InitSpec init;
    std::uint64_t input_seed = 0;
    std::uint64_t probe_seed = 0;
    int power_iters = 50;
    double power_tol = 1e-6;
    double eig_tol = 1e-10;
};

// Flattens (b,c,h,w) into a c x n feature matrix, one column per
// spatial-batch position p = ((b*h)+y)*w + x.
Matrix flatten_features(const Tensor4& t);

// Entropy of L1-normalized covariance eigenvalues of the columns of
// `features` (c x n). Negative eigenvalues are clamped to zero; if the
// eigenvalue mass is <= eig_tol the block is dead and the entropy is 0.
// `dead` (optional) reports that case.
double block_expressivity(const Matrix& features, double eig_tol = 1e-10,
                          bool* dead = nullptr);

double expressivity(const std::vector<double>& block_entropies);

// Smallest consecutive difference of block entropies; L < 2 degenerates to 0
// with `warned` set.
double progressivity(const std::vector<double>& block_entropies, bool* warned = nullptr);

// Rademacher-probed estimate of the transposed block Jacobian, (1/n) * sum_p
// g_{l-1}(p) g_l(p)^T, a c' x c matrix. `probes` has one c-vector column per
// output position; for strided blocks each output position is paired with its
// stride-projected input position.
Matrix estimate_block_jacobian(const NetworkGraph& graph, const ForwardCache& cache,
                               int block_index, const Matrix& probes);

// (1/(L-1)) * sum_l (-sigma_l - 1/sigma_l + 2); maximal (0) iff every sigma
// is 1. Fewer than one sigma degenerates to 0 with `warned` set.
double trainability(const std::vector<double>& sigmas, bool* warned = nullptr);

struct ScoreResult {
    ProxyScores scores;
    BlockStats stats;
    std::uint64_t flops = 0;
    bool failed = false;       // numeric failure; scores are the NaN sentinel
    bool degenerate = false;   // dead block or zero Jacobian seen
    bool short_network = false;  // L < 2: s_P / s_T forced to 0
};

// One Gaussian forward pass, per-block entropy, one probe VJP per block
// l in [2, L] against the shared cache, analytic FLOPs. All randomness is
// derived from (cfg, canonical genotype string), so results are independent
// of evaluation order.
ScoreResult score_architecture(const Genotype& g, const SpaceSpec& space,
                               const ScoringConfig& cfg);

}  // namespace aznas
