#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aznas/ranking.hpp"

namespace aznas {

// User-supplied accuracy table: one row per architecture, named accuracy
// columns in percent.
struct GroundTruthTable {
    std::vector<std::string> arch_ids;
    std::vector<std::string> genotypes;
    std::vector<std::string> dataset_names;
    std::vector<std::vector<double>> accuracy;  // per dataset, parallel to arch_ids

    std::size_t rows() const { return arch_ids.size(); }
};

// CSV `arch_id,genotype,<dataset>...` (quoted genotype field) or a JSON array
// of objects with the same fields. Genotypes are validated against the
// grammar; duplicate ids, bad genotypes and non-numeric accuracies fail with
// the offending row number.
GroundTruthTable load_ground_truth(const std::string& path);

struct ExternalScores {
    std::vector<std::string> arch_ids;
    std::vector<std::string> column_names;
    std::vector<std::vector<double>> columns;
};

// CSV `arch_id,<proxy_name>...`.
ExternalScores load_external_scores(const std::string& path);

// 1:1 id join: every table id must appear in `ext` and vice versa, otherwise
// JoinError lists the unmatched ids. Matched columns are appended.
void merge_external(ScoreTable& table, const ExternalScores& ext);

struct SubsetEval {
    std::vector<std::string> subset;
    bool nonlinear = true;
    struct Cell {
        std::string dataset;
        double tau = 0.0;
        double rho = 0.0;
        bool undefined = false;
    };
    std::vector<Cell> cells;
};

struct SelectionEval {
    std::vector<std::string> subset;
    std::string dataset;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;  // sample std over runs
    int runs = 0;
    int sample_size = 0;
};

struct EvalReport {
    std::size_t m = 0;  // joined architectures
    std::vector<SubsetEval> subsets;
    std::vector<SelectionEval> selection;
};

struct ReportOptions {
    bool include_linear = false;
    int selection_runs = 0;  // 0 disables the selection protocol
    int selection_sample = 3000;
    std::uint64_t selection_seed = 0;
    std::vector<std::string> selection_subset = {"E", "P", "T", "C"};
};

// For each subset: aggregate, then tau-b / rho against every accuracy column.
// Optionally runs the random-sample selection protocol: per run, sample
// `selection_sample` architectures, rank within the sample, pick the argmax
// AZ, and report mean +- std of its ground-truth accuracy.
EvalReport correlation_report(const ScoreTable& scores, const GroundTruthTable& gt,
                              const std::vector<std::vector<std::string>>& proxy_subsets,
                              const ReportOptions& opts = {});

void emit_scatter_csv(const std::vector<double>& pred_ranks,
                      const std::vector<double>& gt_ranks, const std::string& path);

std::string render_report_text(const EvalReport& report);
std::string render_report_csv(const EvalReport& report);

}  // namespace aznas
