#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "foregan/mask.hpp"

namespace foregan {

struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;

    std::int64_t total() const { return tp + fp + fn + tn; }

    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
};

struct MetricReport {
    float accuracy = 0.0f;
    float f_measure = 0.0f;
    float precision = 0.0f;
    float recall = 0.0f;
    float specificity = 0.0f;
    ConfusionCounts counts;
};

// Per-pixel tallies; pixels where ignore == 1 are excluded.
inline ConfusionCounts confusion(const Mask& pred, const Mask& gt, const Mask* ignore = nullptr) {
    if (pred.width != gt.width || pred.height != gt.height)
        throw DimensionError("confusion: mask dimensions differ, pred=" +
                             std::to_string(pred.width) + "x" + std::to_string(pred.height) +
                             ", gt=" + std::to_string(gt.width) + "x" +
                             std::to_string(gt.height));
    if (ignore && (ignore->width != gt.width || ignore->height != gt.height))
        throw DimensionError("confusion: ignore mask dimensions differ from gt");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.bits.size(); ++i) {
        if (ignore && ignore->bits[i]) continue;
        const bool p = pred.bits[i] != 0;
        const bool g = gt.bits[i] != 0;
        if (p && g)
            ++c.tp;
        else if (p && !g)
            ++c.fp;
        else if (!p && g)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

// Accuracy, F-measure, Precision, Recall, Specificity. Zero-denominator
// conventions: with no positives anywhere (tp=fp=fn=0) the prediction is
// vacuously perfect and Pre=Re=F=1; with tp=0 but fp>0 or fn>0 the affected
// metric is 0. An undefined specificity (no true negatives possible) is 1.
inline MetricReport compute_metrics(const ConfusionCounts& c) {
    if (c.total() < 1) throw ContractError("compute_metrics: no evaluated pixels");
    MetricReport r;
    r.counts = c;
    r.accuracy =
        static_cast<float>(static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total()));
    if (c.tp == 0 && c.fp == 0 && c.fn == 0) {
        r.precision = r.recall = r.f_measure = 1.0f;
    } else {
        r.precision = (c.tp + c.fp) > 0
                          ? static_cast<float>(static_cast<double>(c.tp) /
                                               static_cast<double>(c.tp + c.fp))
                          : 0.0f;
        r.recall = (c.tp + c.fn) > 0 ? static_cast<float>(static_cast<double>(c.tp) /
                                                          static_cast<double>(c.tp + c.fn))
                                     : 0.0f;
        const double pr = static_cast<double>(r.precision) + r.recall;
        r.f_measure = pr > 0.0 ? static_cast<float>(2.0 * r.precision * r.recall / pr) : 0.0f;
    }
    r.specificity = (c.tn + c.fp) > 0 ? static_cast<float>(static_cast<double>(c.tn) /
                                                           static_cast<double>(c.tn + c.fp))
                                      : 1.0f;
    return r;
}

// Unweighted frame-level mean of each metric; counts are summed for
// reference.
inline MetricReport aggregate(const std::vector<MetricReport>& reports) {
    if (reports.empty()) throw ContractError("aggregate: empty report list");
    MetricReport agg;
    double a = 0, f = 0, p = 0, re = 0, sp = 0;
    for (const auto& r : reports) {
        a += r.accuracy;
        f += r.f_measure;
        p += r.precision;
        re += r.recall;
        sp += r.specificity;
        agg.counts += r.counts;
    }
    const double n = static_cast<double>(reports.size());
    agg.accuracy = static_cast<float>(a / n);
    agg.f_measure = static_cast<float>(f / n);
    agg.precision = static_cast<float>(p / n);
    agg.recall = static_cast<float>(re / n);
    agg.specificity = static_cast<float>(sp / n);
    return agg;
}

// The count-pooled variant: metrics recomputed from summed confusion counts.
inline MetricReport aggregate_pooled(const std::vector<MetricReport>& reports) {
    if (reports.empty()) throw ContractError("aggregate_pooled: empty report list");
    ConfusionCounts c;
    for (const auto& r : reports) c += r.counts;
    return compute_metrics(c);
}

struct MetricRow {
    std::string sequence;
    std::string frame;
    MetricReport report;
};

namespace detail {

inline std::string metric_csv_line(const std::string& sequence, const std::string& frame,
                                   const MetricReport& r) {
    char buf[192];
    std::snprintf(buf, sizeof(buf), "%lld,%lld,%lld,%lld,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                  static_cast<long long>(r.counts.tp), static_cast<long long>(r.counts.fp),
                  static_cast<long long>(r.counts.fn), static_cast<long long>(r.counts.tn),
                  r.accuracy, r.precision, r.recall, r.specificity, r.f_measure);
    return sequence + "," + frame + "," + buf;
}

} // namespace detail

// Per-frame rows plus two aggregate rows: the frame-level mean (primary)
// and the count-pooled variant.
inline std::string metrics_csv(const std::vector<MetricRow>& rows) {
    std::string out =
        "sequence,frame,tp,fp,fn,tn,accuracy,precision,recall,specificity,f_measure\n";
    std::vector<MetricReport> reports;
    reports.reserve(rows.size());
    for (const auto& row : rows) {
        out += detail::metric_csv_line(row.sequence, row.frame, row.report);
        reports.push_back(row.report);
    }
    if (!reports.empty()) {
        out += detail::metric_csv_line("all", "aggregate-mean", aggregate(reports));
        out += detail::metric_csv_line("all", "aggregate-pooled", aggregate_pooled(reports));
    }
    return out;
}

} // namespace foregan
