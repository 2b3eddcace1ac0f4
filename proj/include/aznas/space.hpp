#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "aznas/net.hpp"
#include "aznas/rng.hpp"

namespace aznas {

// ---- cell space (4-node DAG, 6 edges) ----

inline constexpr int kCellEdges = 6;
inline constexpr int kCellOps = 5;
inline constexpr std::uint64_t kCellSpaceSize = 15625;  // 5^6

// Edge order: 0->1, 0->2, 1->2, 0->3, 1->3, 2->3.
inline constexpr std::array<int, kCellEdges> kEdgeSource = {0, 0, 1, 0, 1, 2};
inline constexpr std::array<int, kCellEdges> kEdgeTarget = {1, 2, 2, 3, 3, 3};

enum CellOp : std::uint8_t {
    op_none = 0,
    op_skip_connect = 1,
    op_nor_conv_1x1 = 2,
    op_nor_conv_3x3 = 3,
    op_avg_pool_3x3 = 4,
};

const char* cell_op_name(int op);

struct CellGenotype {
    std::array<std::uint8_t, kCellEdges> edge_ops{};
    bool operator==(const CellGenotype&) const = default;
};

// ---- mobile macro space (inverted-residual stages) ----

struct MacroStage {
    int depth = 1;      // block count, >= 1
    int width = 16;     // output channels, multiple of 8
    int expansion = 1;  // integer expansion ratio
    int kernel = 3;     // depthwise kernel, in {3,5,7}
    int stride = 1;     // first block of the stage, in {1,2}
    bool operator==(const MacroStage&) const = default;
};

struct MacroGenotype {
    std::vector<MacroStage> stages;
    int stem_ch = 32;
    int classifier_width = 1280;
    bool operator==(const MacroGenotype&) const = default;
};

using Genotype = std::variant<CellGenotype, MacroGenotype>;

// ---- space specs ----

struct Nb201Space {
    int stem_width = 16;
    int cells_per_stage = 5;  // N
    int resolution = 32;      // must be divisible by 4
    int classes = 10;
};

// Mutation ranges for the macro space; the defaults are NOT a published
// benchmark configuration.
struct MobileRanges {
    int depth_min = 1, depth_max = 6;
    int width_min = 16, width_max = 320, width_step = 16;
    std::vector<int> expansions = {1, 2, 3, 4, 6};
    std::vector<int> kernels = {3, 5, 7};
    std::vector<int> stage_strides = {1, 2, 2, 2, 1, 2, 1};
    int stem = 32;
    int classifier_width = 1280;
};

struct MobileSpace {
    int resolution = 224;
    int classes = 1000;
    MobileRanges ranges;
};

struct SpaceSpec {
    std::variant<Nb201Space, MobileSpace> kind = Nb201Space{};
    std::optional<std::uint64_t> flops_budget;  // MAC bound

    bool is_nb201() const { return std::holds_alternative<Nb201Space>(kind); }
    const Nb201Space& nb201() const { return std::get<Nb201Space>(kind); }
    const MobileSpace& mobile() const { return std::get<MobileSpace>(kind); }
};

void validate_space(const SpaceSpec& space);
void validate_genotype(const Genotype& g, const SpaceSpec& space);

// ---- genotype grammar ----

// Cell:  |op~0|+|op~0|op~1|+|op~0|op~1|op~2|
// Macro: one-line JSON object {classes, stages[], stem}.
Genotype parse_genotype(const std::string& text);
std::string format_genotype(const Genotype& g);

// ---- enumeration / sampling / mutation ----

CellGenotype cell_from_index(std::uint64_t index);  // lexicographic, edge 0 most significant
std::uint64_t cell_to_index(const CellGenotype& g);

// nb201 only: lexicographic stream of all 15625 genotypes.
std::vector<Genotype> enumerate_space(const SpaceSpec& space);

Genotype random_genotype(const SpaceSpec& space, SeqRng& rng);

// Cell: resample exactly one edge to a different op. Macro: one action from
// {depth +-1, width step, expansion step, kernel swap}, clipped to ranges.
// The result always differs from the input.
Genotype mutate(const Genotype& g, const SpaceSpec& space, SeqRng& rng);

// Analytic MAC count over the whole instantiated network (stem and head
// included), computed in closed form without building a NetworkGraph.
std::uint64_t count_flops(const Genotype& g, const SpaceSpec& space);

// Builds the randomly initialized network. Searchable cells (nb201) or
// inverted-residual blocks (macro) are the primary blocks; the fixed
// downsample path between stages belongs to the following block's VJP span.
NetworkGraph instantiate(const Genotype& g, const SpaceSpec& space, const InitSpec& init);

}  // namespace aznas
