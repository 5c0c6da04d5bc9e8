#pragma once

// Long/short-term propagation memory. The initial frame entry is pinned
// forever; long-term entries are written every G frames into a FIFO of
// capacity L; short-term holds exactly the previous frame.

#include <optional>
#include <stdexcept>
#include <vector>

#include "trackforge/tensor.hpp"

namespace trackforge {

// Keys/values at one propagation scale, one row per spatial location.
struct ScaleMemory {
    Tensor keys;        // N x C_vis
    Tensor vis_values;  // N x C_vis
    Tensor id_values;   // N x C_id
};

struct MemoryEntry {
    int frame_index = 0;
    ScaleMemory s16;
    ScaleMemory s8;
};

// Concatenated view over (initial, long_term..., short_term), deduplicated
// by frame index.
struct MemoryView {
    std::vector<int> frame_indices;
    ScaleMemory s16;
    ScaleMemory s8;
};

inline bool should_store(int frame_index, int gap) {
    if (frame_index < 1)
        throw std::invalid_argument("should_store: frame index must be >= 1");
    if (gap < 1) throw std::invalid_argument("should_store: gap must be >= 1");
    return frame_index % gap == 0;
}

class MemoryBank {
public:
    explicit MemoryBank(int capacity) : capacity_(capacity) {
        if (capacity < 1)
            throw std::invalid_argument("MemoryBank: capacity must be >= 1");
    }

    void initialize(MemoryEntry initial) {
        initial_ = std::move(initial);
        short_term_ = *initial_;
        long_term_.clear();
        last_store_index_ = initial_->frame_index;
    }

    bool initialized() const { return initial_.has_value(); }
    const MemoryEntry& initial() const { return require(initial_); }
    const MemoryEntry& short_term() const { return require(short_term_); }
    const std::vector<MemoryEntry>& long_term() const { return long_term_; }
    int last_store_index() const { return last_store_index_; }

    void store(MemoryEntry entry) {
        require(initial_);
        if (entry.frame_index <= last_store_index_)
            throw std::invalid_argument("MemoryBank: out-of-order insertion");
        last_store_index_ = entry.frame_index;
        long_term_.push_back(std::move(entry));
        if (static_cast<int>(long_term_.size()) > capacity_)
            long_term_.erase(long_term_.begin());  // FIFO, initial never evicted
    }

    void update_short_term(MemoryEntry entry) {
        require(initial_);
        short_term_ = std::move(entry);
    }

    MemoryView gather() const {
        require(initial_);
        std::vector<const MemoryEntry*> entries;
        entries.push_back(&*initial_);
        for (const auto& e : long_term_) entries.push_back(&e);
        bool dup = short_term_->frame_index == initial_->frame_index;
        for (const auto& e : long_term_)
            dup = dup || e.frame_index == short_term_->frame_index;
        if (!dup) entries.push_back(&*short_term_);

        MemoryView view;
        for (const auto* e : entries) view.frame_indices.push_back(e->frame_index);
        view.s16 = concat(entries, [](const MemoryEntry& e) -> const ScaleMemory& { return e.s16; });
        view.s8 = concat(entries, [](const MemoryEntry& e) -> const ScaleMemory& { return e.s8; });
        return view;
    }

private:
    static const MemoryEntry& require(const std::optional<MemoryEntry>& e) {
        if (!e) throw std::logic_error("MemoryBank: not initialized");
        return *e;
    }

    template <typename Pick>
    static ScaleMemory concat(const std::vector<const MemoryEntry*>& entries, Pick pick) {
        ScaleMemory out;
        auto stack = [&](Tensor ScaleMemory::*field) {
            int rows = 0;
            int cols = (pick(*entries.front()).*field).cols();
            for (const auto* e : entries) rows += (pick(*e).*field).rows();
            Tensor t({rows, cols});
            size_t off = 0;
            for (const auto* e : entries) {
                const Tensor& src = pick(*e).*field;
                for (size_t i = 0; i < src.size(); ++i) t[off + i] = src[i];
                off += src.size();
            }
            return t;
        };
        out.keys = stack(&ScaleMemory::keys);
        out.vis_values = stack(&ScaleMemory::vis_values);
        out.id_values = stack(&ScaleMemory::id_values);
        return out;
    }

    int capacity_;
    std::optional<MemoryEntry> initial_;
    std::optional<MemoryEntry> short_term_;
    std::vector<MemoryEntry> long_term_;
    int last_store_index_ = -1;
};

}  // namespace trackforge
