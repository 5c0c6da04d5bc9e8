#pragma once

// Per-sequence tracker state and the frame-by-frame predict loop:
// encode -> propagate -> decode -> split, with the memory schedule applied
// after each prediction. Single-writer: one frame at a time per state.

#include <stdexcept>
#include <utility>
#include <vector>

#include "trackforge/config.hpp"
#include "trackforge/maskcore.hpp"
#include "trackforge/membank.hpp"
#include "trackforge/propagation.hpp"

namespace trackforge {

class TrackerState {
public:
    TrackerState(TrackerConfig cfg, GpmParams params, int object_count,
                 const Image& first_frame, const LabelMap& first_annotation)
        : TrackerState(cfg, std::move(params),
                       IdentityBank(object_count, cfg.c_id, cfg.seed), first_frame,
                       first_annotation) {}

    // Explicit-bank variant, used when the caller controls identity vectors.
    TrackerState(TrackerConfig cfg, GpmParams params, IdentityBank bank,
                 const Image& first_frame, const LabelMap& first_annotation)
        : cfg_(std::move(cfg)),
          params_(std::move(params)),
          bank_(std::move(bank)),
          memory_(cfg_.memory_capacity),
          width_(first_frame.width),
          height_(first_frame.height) {
        cfg_.validate();
        if (first_annotation.width() != width_ || first_annotation.height() != height_)
            throw std::invalid_argument("tracker: annotation/frame dimension mismatch");
        if (first_annotation.max_label() > bank_.object_count())
            throw std::invalid_argument("tracker: annotation label exceeds object count");
        memory_.initialize(make_entry(0, first_frame, first_annotation));
        frame_index_ = 0;
    }

    const TrackerConfig& config() const { return cfg_; }
    const IdentityBank& bank() const { return bank_; }
    const MemoryBank& memory() const { return memory_; }
    const GpmStats& stats() const { return stats_; }
    int frame_index() const { return frame_index_; }
    int width() const { return width_; }
    int height() const { return height_; }

    long long stores_total() const { return stores_total_; }

    // Predict the next frame and advance the memory schedule.
    FrameResult step(const Image& frame) {
        if (frame.width != width_ || frame.height != height_)
            throw std::invalid_argument("tracker: frame dimension mismatch");
        ++frame_index_;

        FeaturePyramid enc = encode_frame(frame, params_, cfg_);
        MemoryView view = memory_.gather();
        FeaturePyramid prop = propagate(enc, view, params_, cfg_, &stats_);
        int m = bank_.object_count();
        Tensor logits = decode(prop, enc, bank_, params_, cfg_, width_, height_);
        LabelMap labels = argmax_labels(logits, m + 1, width_, height_);

        FrameResult result(width_, height_);
        result.labels = labels;
        result.masks = split(labels, m);
        result.confidences = confidences(logits, labels, m);

        // Memory update uses pre-refinement predictions.
        MemoryEntry entry = make_entry_from_pyramid(frame_index_, enc, labels);
        if (should_store(frame_index_, cfg_.memory_gap)) {
            memory_.store(entry);
            ++stores_total_;
        }
        memory_.update_short_term(std::move(entry));
        return result;
    }

    // The initialization contract: frame 0 output equals the annotation.
    static FrameResult initial_result(const LabelMap& annotation, int object_count) {
        FrameResult r(annotation.width(), annotation.height());
        r.labels = annotation;
        r.masks = split(annotation, object_count);
        r.confidences.assign(object_count, 0.0);
        return r;
    }

private:
    MemoryEntry make_entry(int frame_idx, const Image& frame, const LabelMap& labels) {
        FeaturePyramid enc = encode_frame(frame, params_, cfg_);
        return make_entry_from_pyramid(frame_idx, enc, labels);
    }

    MemoryEntry make_entry_from_pyramid(int frame_idx, const FeaturePyramid& enc,
                                        const LabelMap& labels) {
        MemoryEntry e;
        e.frame_index = frame_idx;
        auto scale_entry = [&](const Tensor& feat, int h, int w,
                               const MemoryProjParams& mp) {
            LabelMap scaled = resample(labels, w, h);
            Tensor id_rows = embed_identities(scaled, bank_);
            return project_memory(as_rows(feat, h, w, cfg_.c_vis), id_rows, mp);
        };
        e.s16 = scale_entry(enc.s16, enc.h16, enc.w16, params_.mem16);
        e.s8 = scale_entry(enc.s8, enc.h8, enc.w8, params_.mem8);
        return e;
    }

    std::vector<double> confidences(const Tensor& logits, const LabelMap& labels,
                                    int m) const {
        std::vector<double> sums(m, 0.0);
        std::vector<long long> counts(m, 0);
        for (int y = 0; y < height_; ++y)
            for (int x = 0; x < width_; ++x) {
                int id = labels.at(x, y);
                if (id == 0) continue;
                double own = logits[(static_cast<size_t>(id) * height_ + y) * width_ + x];
                double other = -1e300;
                for (int c = 0; c <= m; ++c) {
                    if (c == id) continue;
                    other = std::max(
                        other,
                        logits[(static_cast<size_t>(c) * height_ + y) * width_ + x]);
                }
                sums[id - 1] += own - other;
                ++counts[id - 1];
            }
        std::vector<double> out(m, 0.0);
        for (int i = 0; i < m; ++i)
            if (counts[i] > 0) out[i] = sums[i] / counts[i];
        return out;
    }

    TrackerConfig cfg_;
    GpmParams params_;
    IdentityBank bank_;
    MemoryBank memory_;
    GpmStats stats_;
    int width_, height_;
    int frame_index_ = 0;
    long long stores_total_ = 0;
};

}  // namespace trackforge
