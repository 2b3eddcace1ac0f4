#include "aznas/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "aznas/errors.hpp"
#include "aznas/io.hpp"
#include "aznas/rng.hpp"
#include "aznas/space.hpp"

namespace aznas {

namespace {

double parse_accuracy(const std::string& s, std::size_t row) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw LoadError("non-numeric accuracy '" + s + "'", row);
    if (!(v >= 0.0 && v <= 100.0))
        throw LoadError("accuracy out of [0,100]: " + s, row);
    return v;
}

void append_gt_row(GroundTruthTable& gt, std::set<std::string>& seen,
                   const std::string& id, const std::string& genotype,
                   const std::vector<double>& accs, std::size_t row) {
    if (!seen.insert(id).second) throw LoadError("duplicate arch_id '" + id + "'", row);
    try {
        (void)parse_genotype(genotype);
    } catch (const ParseError& e) {
        throw LoadError(std::string("bad genotype: ") + e.what(), row);
    }
    gt.arch_ids.push_back(id);
    gt.genotypes.push_back(genotype);
    for (std::size_t d = 0; d < accs.size(); ++d) gt.accuracy[d].push_back(accs[d]);
}

GroundTruthTable load_ground_truth_json(const std::string& path) {
    std::ifstream in(path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw LoadError(std::string("ground truth JSON: ") + e.what(), 0);
    }
    if (!j.is_array()) throw LoadError("ground truth JSON must be an array", 0);
    GroundTruthTable gt;
    std::set<std::string> seen;
    std::size_t row = 0;
    for (const auto& obj : j) {
        ++row;
        if (!obj.contains("arch_id") || !obj.contains("genotype"))
            throw LoadError("record needs arch_id and genotype", row);
        if (gt.dataset_names.empty()) {
            for (auto it = obj.begin(); it != obj.end(); ++it)
                if (it.key() != "arch_id" && it.key() != "genotype") {
                    gt.dataset_names.push_back(it.key());
                    gt.accuracy.emplace_back();
                }
            if (gt.dataset_names.empty())
                throw LoadError("ground truth has no accuracy columns", row);
        }
        std::vector<double> accs;
        for (const std::string& d : gt.dataset_names) {
            if (!obj.contains(d)) throw LoadError("record missing dataset " + d, row);
            if (!obj.at(d).is_number()) throw LoadError("non-numeric accuracy for " + d, row);
            const double v = obj.at(d).get<double>();
            if (!(v >= 0.0 && v <= 100.0))
                throw LoadError("accuracy out of [0,100] for " + d, row);
            accs.push_back(v);
        }
        append_gt_row(gt, seen, obj.at("arch_id").get<std::string>(),
                      obj.at("genotype").get<std::string>(), accs, row);
    }
    return gt;
}

}  // namespace

GroundTruthTable load_ground_truth(const std::string& path) {
    if (path.size() > 5 && path.substr(path.size() - 5) == ".json")
        return load_ground_truth_json(path);

    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path, 0);
    std::string line;
    if (!std::getline(in, line)) throw LoadError("empty file", 0);
    const std::vector<std::string> header = split_csv_record(line, 0);
    if (header.size() < 3 || header[0] != "arch_id" || header[1] != "genotype")
        throw LoadError("header must be arch_id,genotype,<dataset>...", 0);

    GroundTruthTable gt;
    for (std::size_t i = 2; i < header.size(); ++i) {
        gt.dataset_names.push_back(header[i]);
        gt.accuracy.emplace_back();
    }
    std::set<std::string> seen;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const std::vector<std::string> f = split_csv_record(line, row);
        if (f.size() != header.size())
            throw LoadError("expected " + std::to_string(header.size()) + " fields, got " +
                                std::to_string(f.size()),
                            row);
        std::vector<double> accs;
        for (std::size_t d = 0; d < gt.dataset_names.size(); ++d)
            accs.push_back(parse_accuracy(f[d + 2], row));
        append_gt_row(gt, seen, f[0], f[1], accs, row);
    }
    if (gt.rows() == 0) throw LoadError("no data rows", 0);
    return gt;
}

ExternalScores load_external_scores(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path, 0);
    std::string line;
    if (!std::getline(in, line)) throw LoadError("empty file", 0);
    const std::vector<std::string> header = split_csv_record(line, 0);
    if (header.size() < 2 || header[0] != "arch_id")
        throw LoadError("header must be arch_id,<proxy_name>...", 0);

    ExternalScores ext;
    for (std::size_t i = 1; i < header.size(); ++i) {
        ext.column_names.push_back(header[i]);
        ext.columns.emplace_back();
    }
    std::set<std::string> seen;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const std::vector<std::string> f = split_csv_record(line, row);
        if (f.size() != header.size()) throw LoadError("wrong field count", row);
        if (!seen.insert(f[0]).second)
            throw LoadError("duplicate arch_id '" + f[0] + "'", row);
        ext.arch_ids.push_back(f[0]);
        for (std::size_t c = 0; c < ext.column_names.size(); ++c) {
            char* end = nullptr;
            const double v = std::strtod(f[c + 1].c_str(), &end);
            if (end == f[c + 1].c_str() || *end != '\0')
                throw LoadError("non-numeric score '" + f[c + 1] + "'", row);
            ext.columns[c].push_back(v);
        }
    }
    return ext;
}

void merge_external(ScoreTable& table, const ExternalScores& ext) {
    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < ext.arch_ids.size(); ++i) pos[ext.arch_ids[i]] = i;

    std::vector<std::string> missing;
    std::vector<std::size_t> take;
    std::set<std::string> used;
    for (const std::string& id : table.arch_ids) {
        const auto it = pos.find(id);
        if (it == pos.end()) {
            missing.push_back(id);
        } else {
            take.push_back(it->second);
            used.insert(id);
        }
    }
    for (const std::string& id : ext.arch_ids)
        if (!used.count(id)) missing.push_back(id);
    if (!missing.empty()) throw JoinError(std::move(missing));

    for (std::size_t c = 0; c < ext.column_names.size(); ++c) {
        std::vector<double> col;
        col.reserve(take.size());
        for (std::size_t i : take) col.push_back(ext.columns[c][i]);
        table.add_column(ext.column_names[c], std::move(col));
    }
}

namespace {

struct Joined {
    ScoreTable scores;                       // canonical (sorted by arch_id) order
    std::vector<std::vector<double>> accs;   // per dataset, same order
};

Joined join_by_id(const ScoreTable& scores, const GroundTruthTable& gt) {
    std::unordered_map<std::string, std::size_t> gt_pos;
    for (std::size_t i = 0; i < gt.rows(); ++i) gt_pos[gt.arch_ids[i]] = i;

    std::vector<std::string> missing;
    for (const std::string& id : scores.arch_ids)
        if (!gt_pos.count(id)) missing.push_back(id);
    if (!missing.empty()) throw JoinError(std::move(missing));

    // Canonical order makes the report independent of input shuffles.
    std::vector<std::size_t> order(scores.rows());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores.arch_ids[a] < scores.arch_ids[b];
    });

    Joined j;
    for (std::size_t i : order) j.scores.arch_ids.push_back(scores.arch_ids[i]);
    for (std::size_t c = 0; c < scores.column_names.size(); ++c) {
        std::vector<double> col;
        col.reserve(order.size());
        for (std::size_t i : order) col.push_back(scores.columns[c][i]);
        j.scores.add_column(scores.column_names[c], std::move(col));
    }
    j.accs.resize(gt.dataset_names.size());
    for (std::size_t d = 0; d < gt.dataset_names.size(); ++d)
        for (std::size_t i : order)
            j.accs[d].push_back(gt.accuracy[d][gt_pos.at(scores.arch_ids[i])]);
    return j;
}

}  // namespace

EvalReport correlation_report(const ScoreTable& scores, const GroundTruthTable& gt,
                              const std::vector<std::vector<std::string>>& proxy_subsets,
                              const ReportOptions& opts) {
    if (proxy_subsets.empty()) throw ArgumentError("correlation_report: no subsets");
    const Joined joined = join_by_id(scores, gt);
    EvalReport report;
    report.m = joined.scores.rows();

    auto eval_subset = [&](const std::vector<std::string>& subset, bool nonlinear) {
        SubsetEval ev;
        ev.subset = subset;
        ev.nonlinear = nonlinear;
        const std::vector<double> agg = nonlinear
                                            ? aggregate_nonlinear(joined.scores, subset)
                                            : aggregate_linear(joined.scores, subset);
        for (std::size_t d = 0; d < gt.dataset_names.size(); ++d) {
            SubsetEval::Cell cell;
            cell.dataset = gt.dataset_names[d];
            try {
                cell.tau = kendall_tau(agg, joined.accs[d]);
                cell.rho = spearman_rho(agg, joined.accs[d]);
            } catch (const UndefinedCorrelation&) {
                cell.undefined = true;
            }
            ev.cells.push_back(cell);
        }
        report.subsets.push_back(std::move(ev));
    };

    for (const auto& subset : proxy_subsets) {
        eval_subset(subset, true);
        if (opts.include_linear) eval_subset(subset, false);
    }

    if (opts.selection_runs > 0) {
        const std::size_t m = joined.scores.rows();
        const std::size_t sample =
            std::min<std::size_t>(static_cast<std::size_t>(opts.selection_sample), m);
        std::vector<std::vector<double>> picks(gt.dataset_names.size());
        SeqRng rng(CounterRng(opts.selection_seed).keyed("selection-protocol"));
        for (int run = 0; run < opts.selection_runs; ++run) {
            // Partial Fisher-Yates over the canonical row order.
            std::vector<std::size_t> rows(m);
            std::iota(rows.begin(), rows.end(), 0);
            for (std::size_t i = 0; i < sample; ++i)
                std::swap(rows[i], rows[i + rng.below(m - i)]);
            rows.resize(sample);
            std::sort(rows.begin(), rows.end());

            ScoreTable sub;
            for (std::size_t r : rows) sub.arch_ids.push_back(joined.scores.arch_ids[r]);
            for (std::size_t c = 0; c < joined.scores.column_names.size(); ++c) {
                std::vector<double> col;
                col.reserve(sample);
                for (std::size_t r : rows) col.push_back(joined.scores.columns[c][r]);
                sub.add_column(joined.scores.column_names[c], std::move(col));
            }
            const std::vector<double> az = aggregate_nonlinear(sub, opts.selection_subset);
            std::size_t best = 0;
            for (std::size_t i = 1; i < az.size(); ++i)
                if (az[i] > az[best]) best = i;
            for (std::size_t d = 0; d < gt.dataset_names.size(); ++d)
                picks[d].push_back(joined.accs[d][rows[best]]);
        }
        for (std::size_t d = 0; d < gt.dataset_names.size(); ++d) {
            SelectionEval sel;
            sel.subset = opts.selection_subset;
            sel.dataset = gt.dataset_names[d];
            sel.runs = opts.selection_runs;
            sel.sample_size = static_cast<int>(sample);
            double mean = 0.0;
            for (double v : picks[d]) mean += v;
            mean /= static_cast<double>(picks[d].size());
            double var = 0.0;
            for (double v : picks[d]) var += (v - mean) * (v - mean);
            sel.mean_accuracy = mean;
            sel.std_accuracy =
                picks[d].size() > 1 ? std::sqrt(var / static_cast<double>(picks[d].size() - 1))
                                    : 0.0;
            report.selection.push_back(sel);
        }
    }
    return report;
}

void emit_scatter_csv(const std::vector<double>& pred_ranks,
                      const std::vector<double>& gt_ranks, const std::string& path) {
    if (pred_ranks.size() != gt_ranks.size())
        throw ArgumentError("emit_scatter_csv: length mismatch");
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path, 0);
    out << "pred_rank,gt_rank\n";
    for (std::size_t i = 0; i < pred_ranks.size(); ++i)
        out << format_double(pred_ranks[i]) << ',' << format_double(gt_ranks[i]) << '\n';
}

namespace {

std::string subset_label(const std::vector<std::string>& subset) {
    std::string s;
    for (std::size_t i = 0; i < subset.size(); ++i) {
        if (i) s += '+';
        s += subset[i];
    }
    return s;
}

}  // namespace

std::string render_report_text(const EvalReport& report) {
    std::ostringstream os;
    os << "architectures: " << report.m << "\n";
    os << "subset  aggregation  dataset  tau  rho\n";
    for (const SubsetEval& ev : report.subsets)
        for (const SubsetEval::Cell& c : ev.cells) {
            os << subset_label(ev.subset) << "  " << (ev.nonlinear ? "NL" : "L") << "  "
               << c.dataset << "  ";
            if (c.undefined) os << "undefined  undefined\n";
            else os << format_double(c.tau) << "  " << format_double(c.rho) << "\n";
        }
    for (const SelectionEval& s : report.selection)
        os << "selection[" << subset_label(s.subset) << "] " << s.dataset << ": "
           << format_double(s.mean_accuracy) << " +- " << format_double(s.std_accuracy)
           << " (runs=" << s.runs << ", sample=" << s.sample_size << ")\n";
    return os.str();
}

std::string render_report_csv(const EvalReport& report) {
    std::ostringstream os;
    os << "subset,aggregation,dataset,tau,rho,m\n";
    for (const SubsetEval& ev : report.subsets)
        for (const SubsetEval::Cell& c : ev.cells) {
            os << csv_escape(subset_label(ev.subset)) << ',' << (ev.nonlinear ? "NL" : "L")
               << ',' << csv_escape(c.dataset) << ',';
            if (c.undefined) os << "undefined,undefined";
            else os << format_double(c.tau) << ',' << format_double(c.rho);
            os << ',' << report.m << "\n";
        }
    for (const SelectionEval& s : report.selection)
        os << csv_escape("selection:" + subset_label(s.subset)) << ",NL,"
           << csv_escape(s.dataset) << ',' << format_double(s.mean_accuracy) << ','
           << format_double(s.std_accuracy) << ',' << s.sample_size << "\n";
    return os.str();
}

}  // namespace aznas
