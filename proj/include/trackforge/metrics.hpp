#pragma once

// Absence-aware tracking quality metrics: per-frame scores, per-object
// accuracy/robustness/error decomposition, AUC over a fixed 101-point
// threshold grid, and unweighted aggregation across (sequence, object)
// pairs. The count-based fields are exact rational arithmetic over frame
// counts, so R + NRE + DRE == 1 holds bit-exactly.

#include <stdexcept>
#include <vector>

namespace trackforge {

struct FrameOutcome {
    bool gt_visible = false;
    bool predicted = false;
    double overlap = 0.0;  // meaningful only when gt_visible && predicted
};

// visible & predicted -> overlap; absent & unreported -> 1; otherwise 0.
inline double frame_score(const FrameOutcome& o) {
    if (o.gt_visible && o.predicted) return o.overlap;
    if (!o.gt_visible && !o.predicted) return 1.0;
    return 0.0;
}

struct ObjectMetrics {
    double auc = 0.0;
    double accuracy = 0.0;
    double robustness = 0.0;
    double nre = 0.0;
    double dre = 0.0;
    double adq = 0.0;
    double quality = 0.0;
    std::vector<double> scores;  // per-frame trace

    // Exact frame counts behind the ratios; tracked + missed + drifted ==
    // visible_frames by construction, which is the rational form of
    // R + NRE + DRE == 1.
    long long visible_frames = 0;
    long long absent_frames = 0;
    long long tracked_frames = 0;
    long long missed_frames = 0;
    long long drifted_frames = 0;
};

inline double auc_from_scores(const std::vector<double>& scores) {
    if (scores.empty()) throw std::invalid_argument("auc: empty score list");
    double total = 0.0;
    for (int t = 0; t <= 100; ++t) {
        double theta = t / 100.0;
        long long hits = 0;
        for (double s : scores)
            if (s >= theta) ++hits;
        total += static_cast<double>(hits) / scores.size();
    }
    return total / 101.0;
}

inline ObjectMetrics per_object_metrics(const std::vector<FrameOutcome>& outcomes) {
    if (outcomes.empty())
        throw std::invalid_argument("per_object_metrics: empty outcome list");
    ObjectMetrics m;
    long long visible = 0, absent = 0;
    long long tracked = 0;        // visible & predicted & overlap > 0
    long long drifted = 0;        // visible & predicted & overlap == 0
    long long missed = 0;         // visible & !predicted
    long long correct_absent = 0; // !visible & !predicted
    long long overlap_frames = 0;
    double overlap_sum = 0.0;
    double score_sum = 0.0;
    for (const auto& o : outcomes) {
        double s = frame_score(o);
        m.scores.push_back(s);
        score_sum += s;
        if (o.gt_visible) {
            ++visible;
            if (o.predicted) {
                ++overlap_frames;
                overlap_sum += o.overlap;
                if (o.overlap > 0.0)
                    ++tracked;
                else
                    ++drifted;
            } else {
                ++missed;
            }
        } else {
            ++absent;
            if (!o.predicted) ++correct_absent;
        }
    }
    m.accuracy = overlap_frames > 0 ? overlap_sum / overlap_frames : 0.0;
    if (visible > 0) {
        m.robustness = static_cast<double>(tracked) / visible;
        m.nre = static_cast<double>(missed) / visible;
        m.dre = static_cast<double>(drifted) / visible;
    }
    m.adq = absent > 0 ? static_cast<double>(correct_absent) / absent : 1.0;
    m.quality = score_sum / outcomes.size();
    m.auc = auc_from_scores(m.scores);
    m.visible_frames = visible;
    m.absent_frames = absent;
    m.tracked_frames = tracked;
    m.missed_frames = missed;
    m.drifted_frames = drifted;
    return m;
}

// Unweighted mean over all (sequence, object) pairs, field by field.
inline ObjectMetrics aggregate(const std::vector<ObjectMetrics>& per_object) {
    if (per_object.empty()) throw std::invalid_argument("aggregate: empty input");
    ObjectMetrics agg;
    for (const auto& m : per_object) {
        agg.auc += m.auc;
        agg.accuracy += m.accuracy;
        agg.robustness += m.robustness;
        agg.nre += m.nre;
        agg.dre += m.dre;
        agg.adq += m.adq;
        agg.quality += m.quality;
    }
    double n = static_cast<double>(per_object.size());
    agg.auc /= n;
    agg.accuracy /= n;
    agg.robustness /= n;
    agg.nre /= n;
    agg.dre /= n;
    agg.adq /= n;
    agg.quality /= n;
    return agg;
}

struct SequenceMetrics {
    ObjectMetrics overall;
    std::vector<ObjectMetrics> per_object;
};

inline SequenceMetrics sequence_metrics(
    const std::vector<std::vector<FrameOutcome>>& per_object_outcomes) {
    SequenceMetrics sm;
    for (const auto& outcomes : per_object_outcomes)
        sm.per_object.push_back(per_object_metrics(outcomes));
    sm.overall = aggregate(sm.per_object);
    return sm;
}

}  // namespace trackforge
