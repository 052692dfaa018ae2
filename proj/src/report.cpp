#include "rcdiag/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "rcdiag/hash.hpp"

namespace rcdiag {

namespace {

double round1(double v) { return std::round(v * 10.0) / 10.0; }

void check_pct(double v, const char* what) {
    if (!(v >= 0.0 && v <= 100.0))
        throw ValidationError(std::string("accuracy '") + what + "' outside [0, 100]");
}

std::string format_pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return buf;
}

// Canonical row order: full, q_only, p_only, truncate:<k> ascending,
// anonymized, anything else lexicographic.
int variant_rank(const std::string& variant) {
    if (variant == "full") return 0;
    if (variant == "q_only") return 1;
    if (variant == "p_only") return 2;
    if (variant.rfind("truncate:", 0) == 0) return 3;
    if (variant == "anonymized") return 4;
    return 5;
}

std::vector<std::string> ordered_variants(const AblationReport& report) {
    std::vector<std::string> names;
    for (const auto& [name, row] : report.rows) names.push_back(name);
    std::sort(names.begin(), names.end(), [](const std::string& a, const std::string& b) {
        const int ra = variant_rank(a), rb = variant_rank(b);
        if (ra != rb) return ra < rb;
        if (ra == 3) {
            const long ka = std::strtol(a.c_str() + 9, nullptr, 10);
            const long kb = std::strtol(b.c_str() + 9, nullptr, 10);
            if (ka != kb) return ka < kb;
        }
        return a < b;
    });
    return names;
}

}  // namespace

double compute_delta(double full_pct, double q_only_pct, double p_only_pct) {
    check_pct(full_pct, "full");
    check_pct(q_only_pct, "q_only");
    check_pct(p_only_pct, "p_only");
    return round1(std::max(q_only_pct, p_only_pct) - full_pct);
}

AblationReport build_report(
    const std::vector<std::pair<std::string, VariantResult>>& results,
    const std::string& task_name) {
    AblationReport report;
    report.task_name = task_name;
    for (const auto& [variant, row] : results) {
        check_pct(row.accuracy_pct, variant.c_str());
        VariantResult stored = row;
        stored.accuracy_pct = round1(row.accuracy_pct);
        if (!report.rows.emplace(variant, stored).second)
            throw ValidationError("build_report: duplicate variant '" + variant + "'");
    }
    if (!report.has("full")) throw ValidationError("build_report: the full variant is required");
    if (report.has("q_only") && report.has("p_only"))
        report.delta_min = compute_delta(report.rows.at("full").accuracy_pct,
                                         report.rows.at("q_only").accuracy_pct,
                                         report.rows.at("p_only").accuracy_pct);
    return report;
}

ReportFormat report_format_from_string(const std::string& name) {
    if (name == "markdown" || name == "md") return ReportFormat::markdown;
    if (name == "csv") return ReportFormat::csv;
    throw UsageError("unknown report format '" + name + "'");
}

std::string render_report(const AblationReport& report, ReportFormat format) {
    const std::vector<std::string> order = ordered_variants(report);

    if (format == ReportFormat::csv) {
        std::ostringstream out;
        if (!report.plan_hash.empty()) out << "# plan " << report.plan_hash << "\n";
        out << "variant,accuracy,seed,dataset_hash\n";
        for (const std::string& name : order) {
            const VariantResult& row = report.rows.at(name);
            out << name << "," << format_pct(row.accuracy_pct) << "," << row.seed << ","
                << row.dataset_hash << "\n";
        }
        if (report.delta_min)
            out << "delta_min," << format_pct(*report.delta_min) << ",,\n";
        return out.str();
    }

    double best = 0.0;
    for (const std::string& name : order) best = std::max(best, report.rows.at(name).accuracy_pct);

    std::ostringstream out;
    out << "# Ablation report: " << report.task_name << "\n\n";
    out << "| Variant | Accuracy (%) |\n";
    out << "| --- | --- |\n";
    for (const std::string& name : order) {
        const VariantResult& row = report.rows.at(name);
        const bool bold = row.accuracy_pct == best;
        out << "| " << name << " | " << (bold ? "**" : "") << format_pct(row.accuracy_pct)
            << (bold ? "**" : "") << " |\n";
    }
    if (report.delta_min) out << "| Δ (min) | " << format_pct(*report.delta_min) << " |\n";
    out << "\nProvenance:\n\n";
    if (!report.plan_hash.empty()) out << "- plan: " << report.plan_hash << "\n";
    for (const std::string& name : order) {
        const VariantResult& row = report.rows.at(name);
        out << "- " << name << ": seed=" << row.seed << " dataset=" << row.dataset_hash << "\n";
    }
    return out.str();
}

AblationReport parse_report_csv(const std::string& text) {
    AblationReport report;
    std::istringstream in(text);
    std::string line;
    bool saw_header = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.rfind("# plan ", 0) == 0) report.plan_hash = line.substr(7);
            continue;
        }
        if (!saw_header) {
            if (line != "variant,accuracy,seed,dataset_hash")
                throw ParseError("report csv line " + std::to_string(line_no) +
                                 ": unexpected header");
            saw_header = true;
            continue;
        }
        std::vector<std::string> fields;
        std::string cur;
        for (char c : line + ",") {
            if (c == ',') {
                fields.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        if (fields.size() != 4)
            throw ParseError("report csv line " + std::to_string(line_no) + ": expected 4 fields");
        if (fields[0] == "delta_min") {
            report.delta_min = std::stod(fields[1]);
            continue;
        }
        VariantResult row;
        row.accuracy_pct = std::stod(fields[1]);
        row.seed = fields[2].empty() ? 0 : std::stoull(fields[2]);
        row.dataset_hash = fields[3];
        if (!report.rows.emplace(fields[0], row).second)
            throw ParseError("report csv line " + std::to_string(line_no) +
                             ": duplicate variant '" + fields[0] + "'");
    }
    if (!saw_header) throw ParseError("report csv: missing header");
    return report;
}

std::string dataset_hash(const Dataset& dataset) {
    return hex64(fnv1a64(canonical_string(dataset)));
}

}  // namespace rcdiag
