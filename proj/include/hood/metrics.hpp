// Exact ROC machinery plus the two stratified evaluations: per-holdout-level
// AUROC/FPR against the ID set, and Semantic-vs-True AUROC/FPR between the
// held-out (semantic) and foreign (true) OOD sets.
//
// Conventions, pinned for reproducibility:
//   - higher score = more in-distribution; "score >= tau" predicts ID
//   - AUROC uses midrank tie handling (Mann-Whitney)
//   - FPR@95 picks the largest threshold whose TPR is still >= 0.95
//   - empty score sets raise, they never yield silent 0 or NaN rows
#pragma once

#include <array>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hood/core.hpp"
#include "hood/records.hpp"

namespace hood {

class MetricError : public DataError {
public:
    using DataError::DataError;
};

namespace detail {

inline void check_scores(std::span<const double> xs, const char* what) {
    if (xs.empty()) throw MetricError(std::string("undefined metric: no ") + what + " scores");
    if (!all_finite(xs)) throw MetricError(std::string(what) + " scores contain non-finite values");
}

// Pair counts underlying the Mann-Whitney statistic.
struct PairCounts {
    std::uint64_t wins = 0; // pos > neg
    std::uint64_t ties = 0; // pos == neg
};

inline PairCounts count_pairs_sorted(std::vector<double> pos, std::vector<double> neg) {
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());
    PairCounts c;
    std::size_t below = 0; // negs strictly below current value
    std::size_t i = 0, j = 0;
    while (i < pos.size()) {
        const double v = pos[i];
        while (j < neg.size() && neg[j] < v) {
            ++j;
        }
        below = j;
        std::size_t eq_neg = 0;
        std::size_t jj = j;
        while (jj < neg.size() && neg[jj] == v) {
            ++eq_neg;
            ++jj;
        }
        std::size_t eq_pos = 0;
        while (i < pos.size() && pos[i] == v) {
            ++eq_pos;
            ++i;
        }
        c.wins += static_cast<std::uint64_t>(eq_pos) * below;
        c.ties += static_cast<std::uint64_t>(eq_pos) * eq_neg;
    }
    return c;
}

// Smallest k with k/n >= target, robust to the target not being exactly
// representable. Integer scan around floor(target*n) sidesteps fp edge cases.
inline std::size_t min_count_for_rate(std::size_t n, double target) {
    auto ok = [&](std::size_t k) {
        return static_cast<double>(k) / static_cast<double>(n) >= target;
    };
    std::size_t k = static_cast<std::size_t>(std::floor(target * static_cast<double>(n)));
    if (k > n) k = n;
    while (k > 0 && ok(k - 1)) --k;
    while (k <= n && !ok(k)) ++k;
    return k;
}

} // namespace detail

// P(pos > neg) + 0.5 * P(pos == neg), computed by sort-and-count in
// O(n log n). Exactly equal to the O(n*m) pairwise statistic.
inline double auroc(std::span<const double> pos_scores, std::span<const double> neg_scores) {
    detail::check_scores(pos_scores, "positive");
    detail::check_scores(neg_scores, "negative");
    const auto c = detail::count_pairs_sorted({pos_scores.begin(), pos_scores.end()},
                                              {neg_scores.begin(), neg_scores.end()});
    const double total = 2.0 * static_cast<double>(pos_scores.size()) *
                         static_cast<double>(neg_scores.size());
    return static_cast<double>(2 * c.wins + c.ties) / total;
}

// FPR at the largest threshold tau with TPR(tau) >= tpr_target.
inline double fpr_at_tpr(std::span<const double> pos_scores, std::span<const double> neg_scores,
                         double tpr_target = 0.95) {
    detail::check_scores(pos_scores, "positive");
    detail::check_scores(neg_scores, "negative");
    if (!(tpr_target > 0.0 && tpr_target <= 1.0))
        throw MetricError("tpr target must lie in (0, 1]");

    std::vector<double> pos(pos_scores.begin(), pos_scores.end());
    std::sort(pos.begin(), pos.end(), std::greater<>());
    const std::size_t k = detail::min_count_for_rate(pos.size(), tpr_target);
    const double tau = pos[k - 1]; // k >= 1 since tpr_target > 0

    std::size_t fp = 0;
    for (double s : neg_scores)
        if (s >= tau) ++fp;
    return static_cast<double>(fp) / static_cast<double>(neg_scores.size());
}

// Threshold tau achieving TPR >= target (the operating point fpr_at_tpr
// reports); useful for the ternary summary below.
inline double threshold_at_tpr(std::span<const double> pos_scores, double tpr_target) {
    detail::check_scores(pos_scores, "positive");
    std::vector<double> pos(pos_scores.begin(), pos_scores.end());
    std::sort(pos.begin(), pos.end(), std::greater<>());
    const std::size_t k = detail::min_count_for_rate(pos.size(), tpr_target);
    return pos[k - 1];
}

// Full ROC curve over the distinct score values, with the (0,0) and (1,1)
// endpoints pinned at +/-infinity thresholds. Thresholds ascend, so tpr and
// fpr are non-increasing.
struct RocCurve {
    std::vector<double> thresholds;
    std::vector<double> tpr;
    std::vector<double> fpr;
};

inline RocCurve roc_curve(std::span<const double> pos_scores, std::span<const double> neg_scores) {
    detail::check_scores(pos_scores, "positive");
    detail::check_scores(neg_scores, "negative");
    std::vector<double> all(pos_scores.begin(), pos_scores.end());
    all.insert(all.end(), neg_scores.begin(), neg_scores.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());

    RocCurve curve;
    curve.thresholds.push_back(-std::numeric_limits<double>::infinity());
    for (double t : all) curve.thresholds.push_back(t);
    curve.thresholds.push_back(std::numeric_limits<double>::infinity());

    for (double tau : curve.thresholds) {
        std::size_t tp = 0, fp = 0;
        for (double s : pos_scores)
            if (s >= tau) ++tp;
        for (double s : neg_scores)
            if (s >= tau) ++fp;
        curve.tpr.push_back(static_cast<double>(tp) / static_cast<double>(pos_scores.size()));
        curve.fpr.push_back(static_cast<double>(fp) / static_cast<double>(neg_scores.size()));
    }
    return curve;
}

struct MetricRow {
    std::string set_name;
    double auroc = 0.0;
    double fpr_at_95tpr = 0.0;
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
};

struct MetricReport {
    std::vector<MetricRow> rows; // ordered L1, L2, L3, All, ST (present only)
    std::optional<double> id_accuracy;

    const MetricRow* find(const std::string& name) const {
        for (const auto& r : rows)
            if (r.set_name == name) return &r;
        return nullptr;
    }
};

namespace detail {

inline double record_score(const ScoreRecord& r) {
    if (!r.score) throw MetricError("record '" + r.record_id + "' has no score");
    if (!std::isfinite(*r.score)) throw MetricError("record '" + r.record_id + "' has non-finite score");
    return *r.score;
}

inline std::map<Membership, std::vector<double>> scores_by_membership(
    const std::vector<ScoreRecord>& records) {
    std::map<Membership, std::vector<double>> by;
    for (const auto& r : records) by[r.membership].push_back(record_score(r));
    return by;
}

inline MetricRow make_row(std::string name, std::span<const double> pos,
                          std::span<const double> neg) {
    MetricRow row;
    row.set_name = std::move(name);
    row.auroc = auroc(pos, neg);
    row.fpr_at_95tpr = fpr_at_tpr(pos, neg, 0.95);
    row.n_pos = pos.size();
    row.n_neg = neg.size();
    return row;
}

} // namespace detail

// One row per holdout level present (ID vs OOD_Lk) plus the "All" row
// against the union of the levels. Levels absent from the input are simply
// omitted. TRUE_OOD records are ignored here; they belong to the ST metric.
inline MetricReport hierarchical_report(const std::vector<ScoreRecord>& records) {
    auto by = detail::scores_by_membership(records);
    if (!by.count(Membership::Id)) throw MetricError("no ID records to evaluate against");
    const auto& id_scores = by.at(Membership::Id);

    MetricReport report;
    std::vector<double> all_ood;
    const std::array<std::pair<Membership, const char*>, 3> levels{{
        {Membership::OodL1, "L1"},
        {Membership::OodL2, "L2"},
        {Membership::OodL3, "L3"},
    }};
    for (const auto& [membership, name] : levels) {
        auto it = by.find(membership);
        if (it == by.end()) continue;
        report.rows.push_back(detail::make_row(name, id_scores, it->second));
        all_ood.insert(all_ood.end(), it->second.begin(), it->second.end());
    }
    if (all_ood.empty()) throw MetricError("no held-out OOD records present");
    report.rows.push_back(detail::make_row("All", id_scores, all_ood));
    return report;
}

// Semantic (held-out classes, positives) versus True (foreign) OOD.
inline MetricRow semantic_true_row(const std::vector<ScoreRecord>& records) {
    std::vector<double> semantic, true_ood;
    for (const auto& r : records) {
        if (is_semantic_ood(r.membership)) semantic.push_back(detail::record_score(r));
        else if (r.membership == Membership::TrueOod) true_ood.push_back(detail::record_score(r));
    }
    if (semantic.empty()) throw MetricError("no semantic OOD records for the ST metric");
    if (true_ood.empty()) throw MetricError("no TRUE_OOD records for the ST metric");
    return detail::make_row("ST", semantic, true_ood);
}

inline MetricReport semantic_true_report(const std::vector<ScoreRecord>& records) {
    MetricReport report;
    report.rows.push_back(semantic_true_row(records));
    return report;
}

// Fraction of labeled ID records whose argmax logit hits true_class.
inline double id_accuracy(const std::vector<ScoreRecord>& records) {
    std::size_t n = 0, correct = 0;
    for (const auto& r : records) {
        if (r.membership != Membership::Id || !r.true_class || r.logits.empty()) continue;
        ++n;
        if (static_cast<int>(argmax(r.logits)) == *r.true_class) ++correct;
    }
    if (n == 0) throw MetricError("no labeled ID records with logits; cannot compute accuracy");
    return static_cast<double>(correct) / static_cast<double>(n);
}

// Two-threshold (ternary) view: tau_high separates ID from everything else
// at 95% ID TPR, tau_low separates semantic from true OOD at 95% semantic
// TPR. Rows of the confusion matrix are the actual memberships {ID,
// semantic, true}, columns the predicted band. If the two thresholds cross,
// the semantic band is empty and the matrix collapses accordingly.
struct TernarySummary {
    double tau_high = 0.0;
    double tau_low = 0.0;
    std::array<std::array<std::size_t, 3>, 3> confusion{}; // [actual][predicted]
};

inline TernarySummary ternary_threshold_summary(const std::vector<ScoreRecord>& records) {
    std::vector<double> id_scores, semantic, true_ood;
    for (const auto& r : records) {
        const double s = detail::record_score(r);
        if (r.membership == Membership::Id) id_scores.push_back(s);
        else if (is_semantic_ood(r.membership)) semantic.push_back(s);
        else true_ood.push_back(s);
    }
    if (id_scores.empty() || semantic.empty() || true_ood.empty())
        throw MetricError("ternary summary needs ID, semantic and TRUE_OOD records");

    TernarySummary out;
    out.tau_high = threshold_at_tpr(id_scores, 0.95);
    out.tau_low = threshold_at_tpr(semantic, 0.95);

    auto classify = [&](double s) -> std::size_t {
        if (s >= out.tau_high) return 0;
        if (s >= out.tau_low) return 1;
        return 2;
    };
    for (double s : id_scores) ++out.confusion[0][classify(s)];
    for (double s : semantic) ++out.confusion[1][classify(s)];
    for (double s : true_ood) ++out.confusion[2][classify(s)];
    return out;
}

} // namespace hood
