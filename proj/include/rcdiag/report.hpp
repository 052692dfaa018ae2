#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rcdiag/corpus.hpp"

namespace rcdiag {

// Best ablated accuracy minus full accuracy, rounded to one decimal.
// Near-zero or positive values mean the ablated input alone suffices.
double compute_delta(double full_pct, double q_only_pct, double p_only_pct);

struct VariantResult {
    double accuracy_pct = 0.0;  // stored at one-decimal precision
    std::uint64_t seed = 0;
    std::string dataset_hash;  // FNV-1a of the variant's canonical test set
};

struct AblationReport {
    std::string task_name;
    // Keys: full, q_only, p_only, truncate:<k>, anonymized.
    std::map<std::string, VariantResult> rows;
    std::optional<double> delta_min;
    std::string plan_hash;

    bool has(const std::string& variant) const { return rows.count(variant) != 0; }
};

// Assembles a report from per-variant results. delta_min is populated only
// when full, q_only and p_only are all present; absent variants stay
// absent. Duplicate variants are an error.
AblationReport build_report(
    const std::vector<std::pair<std::string, VariantResult>>& results,
    const std::string& task_name);

// Deterministic renderings. Markdown: one table, variants as rows, the
// top-accuracy variant in bold, delta row last. CSV: header
// variant,accuracy,seed,dataset_hash plus the delta row; the plan hash, if
// any, rides in a leading '#' comment.
enum class ReportFormat { markdown, csv };
ReportFormat report_format_from_string(const std::string& name);
std::string render_report(const AblationReport& report, ReportFormat format);

// Inverse of the CSV rendering (task name is not part of the CSV).
AblationReport parse_report_csv(const std::string& text);

// Hash of a dataset's canonical serialization, printed as 16 hex digits.
std::string dataset_hash(const Dataset& dataset);

}  // namespace rcdiag
