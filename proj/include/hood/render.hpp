// Table rendering: one row per report, AUROC/FPR pairs per holdout level
// plus All and ST columns. Values are percentages with two decimals
// (half-even); levels absent from a report render blank.
#pragma once

#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hood/core.hpp"
#include "hood/metrics.hpp"

namespace hood {

// Round-half-even to `decimals` places.
inline double round_half_even(double x, int decimals) {
    double scale = 1.0;
    for (int i = 0; i < decimals; ++i) scale *= 10.0;
    return std::nearbyint(x * scale) / scale; // FE_TONEAREST ties to even
}

// 0.93645 -> "93.64" style percentage formatting.
inline std::string format_percent(double fraction) {
    const double pct = round_half_even(fraction * 100.0, 2);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", pct);
    return buf;
}

struct NamedReport {
    std::string name;
    MetricReport report;
};

namespace detail {

inline const std::vector<std::string>& table_sets() {
    static const std::vector<std::string> sets{"L1", "L2", "L3", "All", "ST"};
    return sets;
}

} // namespace detail

// CSV: method plus <set>_auroc/<set>_fpr columns; absent cells stay empty.
inline std::string render_csv(const std::vector<NamedReport>& reports) {
    if (reports.empty()) throw DataError("render: no reports");
    std::string out = "method";
    for (const auto& set : detail::table_sets()) {
        out += "," + set + "_auroc," + set + "_fpr";
    }
    out += ",id_accuracy\n";
    for (const auto& nr : reports) {
        out += nr.name;
        for (const auto& set : detail::table_sets()) {
            const MetricRow* row = nr.report.find(set);
            if (row) {
                out += "," + format_percent(row->auroc) + "," + format_percent(row->fpr_at_95tpr);
            } else {
                out += ",,";
            }
        }
        out += ",";
        if (nr.report.id_accuracy) out += format_percent(*nr.report.id_accuracy);
        out += "\n";
    }
    return out;
}

// Inverse of render_csv, for round-trip checks and downstream tooling.
inline std::vector<NamedReport> parse_rendered_csv(const std::string& text) {
    std::vector<NamedReport> reports;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DataError("rendered csv: empty input");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        cells.resize(2 * detail::table_sets().size() + 2);
        NamedReport nr;
        nr.name = cells[0];
        for (std::size_t i = 0; i < detail::table_sets().size(); ++i) {
            const std::string& a = cells[1 + 2 * i];
            const std::string& f = cells[2 + 2 * i];
            if (a.empty() && f.empty()) continue;
            MetricRow row;
            row.set_name = detail::table_sets()[i];
            row.auroc = std::stod(a) / 100.0;
            row.fpr_at_95tpr = std::stod(f) / 100.0;
            nr.report.rows.push_back(std::move(row));
        }
        const std::string& acc = cells[2 * detail::table_sets().size() + 1];
        if (!acc.empty()) nr.report.id_accuracy = std::stod(acc) / 100.0;
        reports.push_back(std::move(nr));
    }
    return reports;
}

// Aligned text table with "AUROC / FPR" cells.
inline std::string render_text_table(const std::vector<NamedReport>& reports) {
    if (reports.empty()) throw DataError("render: no reports");
    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> header{"method"};
    for (const auto& set : detail::table_sets()) header.push_back(set + " AUROC/FPR");
    header.push_back("ID Acc");
    grid.push_back(header);

    for (const auto& nr : reports) {
        std::vector<std::string> cells{nr.name};
        for (const auto& set : detail::table_sets()) {
            const MetricRow* row = nr.report.find(set);
            cells.push_back(row ? format_percent(row->auroc) + " / " + format_percent(row->fpr_at_95tpr)
                                : "");
        }
        cells.push_back(nr.report.id_accuracy ? format_percent(*nr.report.id_accuracy) : "");
        grid.push_back(std::move(cells));
    }

    std::vector<std::size_t> widths(grid.front().size(), 0);
    for (const auto& row : grid)
        for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());

    std::string out;
    for (const auto& row : grid) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out += row[c];
            if (c + 1 < row.size()) out += std::string(widths[c] - row[c].size() + 2, ' ');
        }
        while (!out.empty() && out.back() == ' ') out.pop_back();
        out += '\n';
    }
    return out;
}

// Aggregate cell: mean with sample standard deviation.
struct AggregateCell {
    double mean = 0.0;
    double sd = 0.0;
    std::size_t n = 0;
};

inline AggregateCell aggregate(const std::vector<double>& xs) {
    AggregateCell c;
    c.n = xs.size();
    if (xs.empty()) return c;
    for (double x : xs) c.mean += x;
    c.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - c.mean) * (x - c.mean);
        c.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return c;
}

inline std::string format_aggregate(const AggregateCell& c) {
    return format_percent(c.mean) + " ± " + format_percent(c.sd);
}

} // namespace hood
