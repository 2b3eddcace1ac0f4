#include "aznas/space.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "aznas/errors.hpp"

namespace aznas {

namespace {

constexpr std::array<const char*, kCellOps> kOpNames = {
    "none", "skip_connect", "nor_conv_1x1", "nor_conv_3x3", "avg_pool_3x3"};

int op_from_name(const std::string& name) {
    for (int i = 0; i < kCellOps; ++i)
        if (name == kOpNames[static_cast<std::size_t>(i)]) return i;
    return -1;
}

}  // namespace

const char* cell_op_name(int op) {
    if (op < 0 || op >= kCellOps) throw ArgumentError("cell op id out of range");
    return kOpNames[static_cast<std::size_t>(op)];
}

void validate_space(const SpaceSpec& space) {
    if (space.flops_budget && *space.flops_budget == 0)
        throw ConfigError("flops_budget must be positive");
    if (space.is_nb201()) {
        const Nb201Space& s = space.nb201();
        if (s.stem_width < 1 || s.cells_per_stage < 1 || s.classes < 1)
            throw ConfigError("nb201 space: positive dims required");
        if (s.resolution < 4 || s.resolution % 4 != 0)
            throw ConfigError("nb201 space: resolution must be a positive multiple of 4");
    } else {
        const MobileSpace& s = space.mobile();
        const MobileRanges& r = s.ranges;
        if (s.classes < 1 || s.resolution < 2) throw ConfigError("mobile space: bad dims");
        if (r.depth_min < 1 || r.depth_max < r.depth_min)
            throw ConfigError("mobile space: bad depth range");
        if (r.width_min < 8 || r.width_min % 8 != 0 || r.width_step % 8 != 0 ||
            r.width_step < 8 || r.width_max < r.width_min)
            throw ConfigError("mobile space: widths must stay multiples of 8");
        if (r.expansions.empty() || r.kernels.empty() || r.stage_strides.empty())
            throw ConfigError("mobile space: empty mutation range");
        for (int k : r.kernels)
            if (k != 3 && k != 5 && k != 7) throw ConfigError("mobile space: kernel not in {3,5,7}");
        for (int st : r.stage_strides)
            if (st != 1 && st != 2) throw ConfigError("mobile space: stride not in {1,2}");
        if (r.stem < 8 || r.stem % 8 != 0 || r.classifier_width < 8)
            throw ConfigError("mobile space: bad stem/classifier width");
        int total_stride = 2;  // stem
        for (int st : r.stage_strides) total_stride *= st;
        if (s.resolution % total_stride != 0)
            throw ConfigError("mobile space: resolution incompatible with total stride");
    }
}

void validate_genotype(const Genotype& g, const SpaceSpec& space) {
    if (space.is_nb201()) {
        if (!std::holds_alternative<CellGenotype>(g))
            throw ArgumentError("genotype does not belong to the nb201 space");
        for (std::uint8_t op : std::get<CellGenotype>(g).edge_ops)
            if (op >= kCellOps) throw ArgumentError("cell op id out of range");
        return;
    }
    if (!std::holds_alternative<MacroGenotype>(g))
        throw ArgumentError("genotype does not belong to the macro space");
    const MacroGenotype& m = std::get<MacroGenotype>(g);
    if (m.stages.empty()) throw ArgumentError("macro genotype needs at least one stage");
    if (m.stem_ch < 1 || m.stem_ch % 8 != 0 || m.classifier_width < 1)
        throw ArgumentError("macro genotype: bad stem/classifier width");
    int total_stride = 2;
    for (const MacroStage& st : m.stages) {
        if (st.depth < 1) throw ArgumentError("macro stage depth must be >= 1");
        if (st.width < 8 || st.width % 8 != 0)
            throw ArgumentError("macro stage width must be a positive multiple of 8");
        if (st.expansion < 1) throw ArgumentError("macro stage expansion must be >= 1");
        if (st.kernel != 3 && st.kernel != 5 && st.kernel != 7)
            throw ArgumentError("macro stage kernel not in {3,5,7}");
        if (st.stride != 1 && st.stride != 2)
            throw ArgumentError("macro stage stride not in {1,2}");
        total_stride *= st.stride;
    }
    if (space.mobile().resolution % total_stride != 0)
        throw ArgumentError("macro genotype: total stride incompatible with resolution");
}

namespace {

CellGenotype parse_cell(const std::string& text) {
    CellGenotype g;
    std::size_t pos = 0;
    int edge = 0;

    auto expect = [&](char c) {
        if (pos >= text.size() || text[pos] != c)
            throw ParseError(std::string("expected '") + c + "'", pos);
        ++pos;
    };
    auto read_edge = [&]() {
        const std::size_t start = pos;
        while (pos < text.size() && text[pos] != '~' && text[pos] != '|') ++pos;
        if (pos >= text.size() || text[pos] != '~')
            throw ParseError("expected '~' after op name", pos);
        const std::string name = text.substr(start, pos - start);
        const int op = op_from_name(name);
        if (op < 0) throw ParseError("unknown op name '" + name + "'", start);
        ++pos;  // '~'
        if (pos >= text.size() || !std::isdigit(static_cast<unsigned char>(text[pos])))
            throw ParseError("expected source node digit", pos);
        const int src = text[pos] - '0';
        if (edge >= kCellEdges) throw ParseError("too many edges", start);
        if (src != kEdgeSource[static_cast<std::size_t>(edge)])
            throw ParseError("edge source node must be " +
                                 std::to_string(kEdgeSource[static_cast<std::size_t>(edge)]),
                             pos);
        ++pos;
        g.edge_ops[static_cast<std::size_t>(edge)] = static_cast<std::uint8_t>(op);
        ++edge;
    };

    // |e|+|e|e|+|e|e|e|
    expect('|');
    read_edge();
    expect('|');
    expect('+');
    expect('|');
    read_edge();
    expect('|');
    read_edge();
    expect('|');
    expect('+');
    expect('|');
    read_edge();
    expect('|');
    read_edge();
    expect('|');
    read_edge();
    expect('|');
    if (pos != text.size()) throw ParseError("trailing characters after genotype", pos);
    return g;
}

MacroGenotype parse_macro(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("macro genotype JSON: ") + e.what(),
                         e.byte > 0 ? e.byte - 1 : 0);
    }
    try {
        MacroGenotype m;
        m.stem_ch = j.at("stem").get<int>();
        // wire key "classes" carries the classifier head width
        m.classifier_width = j.at("classes").get<int>();
        for (const auto& js : j.at("stages")) {
            MacroStage st;
            st.depth = js.at("depth").get<int>();
            st.width = js.at("width").get<int>();
            st.expansion = js.at("expansion").get<int>();
            st.kernel = js.at("kernel").get<int>();
            st.stride = js.at("stride").get<int>();
            m.stages.push_back(st);
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("macro genotype fields: ") + e.what(), 0);
    }
}

}  // namespace

Genotype parse_genotype(const std::string& text) {
    std::size_t first = text.find_first_not_of(" \t");
    if (first == std::string::npos) throw ParseError("empty genotype", 0);
    if (text[first] == '{') return parse_macro(text);
    return parse_cell(text);
}

std::string format_genotype(const Genotype& g) {
    if (std::holds_alternative<CellGenotype>(g)) {
        const CellGenotype& c = std::get<CellGenotype>(g);
        std::string s;
        int edge = 0;
        for (int node = 1; node <= 3; ++node) {
            if (node > 1) s += '+';
            s += '|';
            for (int srcs = 0; srcs < node; ++srcs) {
                s += kOpNames[c.edge_ops[static_cast<std::size_t>(edge)]];
                s += '~';
                s += static_cast<char>('0' + kEdgeSource[static_cast<std::size_t>(edge)]);
                s += '|';
                ++edge;
            }
        }
        return s;
    }
    const MacroGenotype& m = std::get<MacroGenotype>(g);
    nlohmann::json j;
    j["stem"] = m.stem_ch;
    j["classes"] = m.classifier_width;
    nlohmann::json stages = nlohmann::json::array();
    for (const MacroStage& st : m.stages) {
        nlohmann::json js;
        js["depth"] = st.depth;
        js["width"] = st.width;
        js["expansion"] = st.expansion;
        js["kernel"] = st.kernel;
        js["stride"] = st.stride;
        stages.push_back(js);
    }
    j["stages"] = stages;
    return j.dump();
}

CellGenotype cell_from_index(std::uint64_t index) {
    if (index >= kCellSpaceSize) throw ArgumentError("cell index out of range");
    CellGenotype g;
    for (int e = kCellEdges - 1; e >= 0; --e) {
        g.edge_ops[static_cast<std::size_t>(e)] = static_cast<std::uint8_t>(index % kCellOps);
        index /= kCellOps;
    }
    return g;
}

std::uint64_t cell_to_index(const CellGenotype& g) {
    std::uint64_t idx = 0;
    for (int e = 0; e < kCellEdges; ++e)
        idx = idx * kCellOps + g.edge_ops[static_cast<std::size_t>(e)];
    return idx;
}

std::vector<Genotype> enumerate_space(const SpaceSpec& space) {
    if (!space.is_nb201())
        throw UnsupportedOperation("enumerate_space supports only the nb201 cell space");
    std::vector<Genotype> out;
    out.reserve(kCellSpaceSize);
    for (std::uint64_t i = 0; i < kCellSpaceSize; ++i) out.emplace_back(cell_from_index(i));
    return out;
}

Genotype random_genotype(const SpaceSpec& space, SeqRng& rng) {
    if (space.is_nb201()) {
        CellGenotype g;
        for (int e = 0; e < kCellEdges; ++e)
            g.edge_ops[static_cast<std::size_t>(e)] =
                static_cast<std::uint8_t>(rng.below(kCellOps));
        return g;
    }
    const MobileRanges& r = space.mobile().ranges;
    MacroGenotype m;
    m.stem_ch = r.stem;
    m.classifier_width = r.classifier_width;
    const std::uint64_t width_steps =
        static_cast<std::uint64_t>((r.width_max - r.width_min) / r.width_step) + 1;
    for (std::size_t i = 0; i < r.stage_strides.size(); ++i) {
        MacroStage st;
        st.stride = r.stage_strides[i];
        st.depth = r.depth_min +
                   static_cast<int>(rng.below(static_cast<std::uint64_t>(r.depth_max - r.depth_min + 1)));
        st.width = r.width_min + r.width_step * static_cast<int>(rng.below(width_steps));
        st.expansion = r.expansions[static_cast<std::size_t>(rng.below(r.expansions.size()))];
        st.kernel = r.kernels[static_cast<std::size_t>(rng.below(r.kernels.size()))];
        m.stages.push_back(st);
    }
    return m;
}

Genotype mutate(const Genotype& g, const SpaceSpec& space, SeqRng& rng) {
    validate_genotype(g, space);
    if (space.is_nb201()) {
        CellGenotype c = std::get<CellGenotype>(g);
        const std::size_t edge = static_cast<std::size_t>(rng.below(kCellEdges));
        const std::uint8_t old = c.edge_ops[edge];
        c.edge_ops[edge] =
            static_cast<std::uint8_t>((old + 1 + rng.below(kCellOps - 1)) % kCellOps);
        return c;
    }

    const MobileRanges& r = space.mobile().ranges;
    const MacroGenotype& parent = std::get<MacroGenotype>(g);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        MacroGenotype m = parent;
        MacroStage& st = m.stages[static_cast<std::size_t>(rng.below(m.stages.size()))];
        switch (rng.below(4)) {
            case 0: {  // depth +-1
                const int d = st.depth + (rng.below(2) ? 1 : -1);
                st.depth = std::clamp(d, r.depth_min, r.depth_max);
                break;
            }
            case 1: {  // width step
                const int w = st.width + (rng.below(2) ? r.width_step : -r.width_step);
                st.width = std::clamp(w, r.width_min, r.width_max);
                break;
            }
            case 2: {  // expansion step
                const auto it = std::find(r.expansions.begin(), r.expansions.end(), st.expansion);
                std::size_t idx =
                    it == r.expansions.end()
                        ? 0
                        : static_cast<std::size_t>(std::distance(r.expansions.begin(), it));
                if (rng.below(2)) {
                    if (idx + 1 < r.expansions.size()) ++idx;
                } else {
                    if (idx > 0) --idx;
                }
                st.expansion = r.expansions[idx];
                break;
            }
            default: {  // kernel swap
                if (r.kernels.size() > 1) {
                    int k = st.kernel;
                    while (k == st.kernel)
                        k = r.kernels[static_cast<std::size_t>(rng.below(r.kernels.size()))];
                    st.kernel = k;
                }
                break;
            }
        }
        if (!(m == parent)) return m;
    }
    throw ConfigError("mutation ranges too degenerate to produce a distinct genotype");
}

namespace {

std::uint64_t conv_macs(std::uint64_t k, std::uint64_t cin, std::uint64_t cout,
                        std::uint64_t groups, std::uint64_t hout, std::uint64_t wout) {
    return k * k * (cin / groups) * cout * hout * wout;
}

std::uint64_t nb201_cell_macs(const CellGenotype& g, std::uint64_t c, std::uint64_t s) {
    std::uint64_t total = 0;
    for (std::uint8_t op : g.edge_ops) {
        if (op == op_nor_conv_1x1) total += conv_macs(1, c, c, 1, s, s);
        else if (op == op_nor_conv_3x3) total += conv_macs(3, c, c, 1, s, s);
    }
    return total;
}

std::uint64_t nb201_downsample_macs(std::uint64_t cin, std::uint64_t s_out) {
    const std::uint64_t cout = 2 * cin;
    return conv_macs(3, cin, cout, 1, s_out, s_out)    // main path, stride 2
           + conv_macs(3, cout, cout, 1, s_out, s_out) // main path, stride 1
           + conv_macs(1, cin, cout, 1, s_out, s_out); // shortcut 1x1 after avgpool
}

}  // namespace

std::uint64_t count_flops(const Genotype& g, const SpaceSpec& space) {
    validate_genotype(g, space);
    if (space.is_nb201()) {
        const Nb201Space& sp = space.nb201();
        const CellGenotype& cg = std::get<CellGenotype>(g);
        const std::uint64_t w = static_cast<std::uint64_t>(sp.stem_width);
        const std::uint64_t r = static_cast<std::uint64_t>(sp.resolution);
        const std::uint64_t n = static_cast<std::uint64_t>(sp.cells_per_stage);
        std::uint64_t total = conv_macs(3, 3, w, 1, r, r);  // stem
        total += n * nb201_cell_macs(cg, w, r);
        total += nb201_downsample_macs(w, r / 2);
        total += n * nb201_cell_macs(cg, 2 * w, r / 2);
        total += nb201_downsample_macs(2 * w, r / 4);
        total += n * nb201_cell_macs(cg, 4 * w, r / 4);
        total += 4 * w * static_cast<std::uint64_t>(sp.classes);  // head linear
        return total;
    }

    const MobileSpace& sp = space.mobile();
    const MacroGenotype& m = std::get<MacroGenotype>(g);
    std::uint64_t spatial = static_cast<std::uint64_t>(sp.resolution) / 2;
    std::uint64_t total = conv_macs(3, 3, static_cast<std::uint64_t>(m.stem_ch), 1, spatial, spatial);
    std::uint64_t cin = static_cast<std::uint64_t>(m.stem_ch);
    for (const MacroStage& st : m.stages) {
        for (int b = 0; b < st.depth; ++b) {
            const std::uint64_t stride = (b == 0) ? static_cast<std::uint64_t>(st.stride) : 1;
            const std::uint64_t cmid = cin * static_cast<std::uint64_t>(st.expansion);
            const std::uint64_t s_out = spatial / stride;
            if (st.expansion > 1) total += conv_macs(1, cin, cmid, 1, spatial, spatial);
            total += conv_macs(static_cast<std::uint64_t>(st.kernel), cmid, cmid, cmid, s_out, s_out);
            total += conv_macs(1, cmid, static_cast<std::uint64_t>(st.width), 1, s_out, s_out);
            spatial = s_out;
            cin = static_cast<std::uint64_t>(st.width);
        }
    }
    total += conv_macs(1, cin, static_cast<std::uint64_t>(m.classifier_width), 1, spatial, spatial);
    total += static_cast<std::uint64_t>(m.classifier_width) * static_cast<std::uint64_t>(sp.classes);
    return total;
}

}  // namespace aznas
