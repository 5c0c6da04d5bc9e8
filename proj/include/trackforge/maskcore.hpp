#pragma once

// Binary and labeled mask types plus their exact geometric/set operations.
// Everything here is immutable after construction and safe to share across
// threads.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace trackforge {

class Bitmask {
public:
    Bitmask(int width, int height)
        : w_(width), h_(height), bits_(static_cast<size_t>(width) * height, 0) {
        if (width < 1 || height < 1)
            throw std::invalid_argument("Bitmask: dimensions must be >= 1");
    }

    int width() const { return w_; }
    int height() const { return h_; }

    bool at(int x, int y) const { return bits_[idx(x, y)] != 0; }
    void set(int x, int y, bool v = true) { bits_[idx(x, y)] = v ? 1 : 0; }

    size_t count() const {
        size_t n = 0;
        for (uint8_t b : bits_) n += b;
        return n;
    }
    bool empty() const { return count() == 0; }

    const std::vector<uint8_t>& bits() const { return bits_; }

    friend bool operator==(const Bitmask& a, const Bitmask& b) {
        return a.w_ == b.w_ && a.h_ == b.h_ && a.bits_ == b.bits_;
    }
    friend bool operator!=(const Bitmask& a, const Bitmask& b) { return !(a == b); }

private:
    size_t idx(int x, int y) const {
        if (x < 0 || x >= w_ || y < 0 || y >= h_)
            throw std::out_of_range("Bitmask: pixel out of range");
        return static_cast<size_t>(y) * w_ + x;
    }

    int w_, h_;
    std::vector<uint8_t> bits_;
};

// Inclusive pixel coordinates on both ends.
struct Box {
    int x_min, y_min, x_max, y_max;

    int width() const { return x_max - x_min + 1; }
    int height() const { return y_max - y_min + 1; }
    bool contains(int x, int y) const {
        return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
    }
    friend bool operator==(const Box& a, const Box& b) {
        return a.x_min == b.x_min && a.y_min == b.y_min &&
               a.x_max == b.x_max && a.y_max == b.y_max;
    }
};

// Per-pixel object ids; 0 is background, 1..M are objects.
class LabelMap {
public:
    LabelMap(int width, int height)
        : w_(width), h_(height), labels_(static_cast<size_t>(width) * height, 0) {
        if (width < 1 || height < 1)
            throw std::invalid_argument("LabelMap: dimensions must be >= 1");
    }

    int width() const { return w_; }
    int height() const { return h_; }

    int at(int x, int y) const { return labels_[idx(x, y)]; }
    void set(int x, int y, int label) {
        if (label < 0) throw std::invalid_argument("LabelMap: negative label");
        labels_[idx(x, y)] = label;
    }

    int max_label() const {
        int m = 0;
        for (int l : labels_) m = std::max(m, l);
        return m;
    }

    const std::vector<int>& labels() const { return labels_; }

    friend bool operator==(const LabelMap& a, const LabelMap& b) {
        return a.w_ == b.w_ && a.h_ == b.h_ && a.labels_ == b.labels_;
    }
    friend bool operator!=(const LabelMap& a, const LabelMap& b) { return !(a == b); }

private:
    size_t idx(int x, int y) const {
        if (x < 0 || x >= w_ || y < 0 || y >= h_)
            throw std::out_of_range("LabelMap: pixel out of range");
        return static_cast<size_t>(y) * w_ + x;
    }

    int w_, h_;
    std::vector<int> labels_;
};

// Alternating run lengths over the row-major scan, first run is background.
struct RleMask {
    int width = 0;
    int height = 0;
    std::vector<long long> runs;
};

// IoU with the degenerate case pinned: two empty masks agree, so iou = 1.
inline double iou(const Bitmask& a, const Bitmask& b) {
    if (a.width() != b.width() || a.height() != b.height())
        throw std::invalid_argument("iou: dimension mismatch");
    size_t inter = 0, uni = 0;
    const auto& ba = a.bits();
    const auto& bb = b.bits();
    for (size_t i = 0; i < ba.size(); ++i) {
        inter += (ba[i] & bb[i]);
        uni += (ba[i] | bb[i]);
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

inline std::optional<Box> enclosing_box(const Bitmask& m) {
    int x0 = m.width(), y0 = m.height(), x1 = -1, y1 = -1;
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x)
            if (m.at(x, y)) {
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
            }
    if (x1 < 0) return std::nullopt;
    return Box{x0, y0, x1, y1};
}

inline std::vector<Bitmask> split(const LabelMap& l, int object_count) {
    if (object_count < 1)
        throw std::invalid_argument("split: object count must be >= 1");
    std::vector<Bitmask> masks(object_count, Bitmask(l.width(), l.height()));
    for (int y = 0; y < l.height(); ++y)
        for (int x = 0; x < l.width(); ++x) {
            int id = l.at(x, y);
            if (id > object_count)
                throw std::invalid_argument("split: label exceeds object count");
            if (id > 0) masks[id - 1].set(x, y);
        }
    return masks;
}

// Inverse of split. Overlaps resolved in favor of the highest object index,
// matching the decoder argmax tie rule.
inline LabelMap merge(const std::vector<Bitmask>& masks) {
    if (masks.empty())
        throw std::invalid_argument("merge: at least one mask required");
    int w = masks[0].width(), h = masks[0].height();
    for (const auto& m : masks)
        if (m.width() != w || m.height() != h)
            throw std::invalid_argument("merge: dimension mismatch");
    LabelMap out(w, h);
    for (size_t i = 0; i < masks.size(); ++i)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (masks[i].at(x, y)) out.set(x, y, static_cast<int>(i) + 1);
    return out;
}

// Nearest-neighbor resampling; keeps masks binary across scale changes.
inline Bitmask resample(const Bitmask& m, int new_w, int new_h) {
    if (new_w < 1 || new_h < 1)
        throw std::invalid_argument("resample: dimensions must be >= 1");
    Bitmask out(new_w, new_h);
    for (int y = 0; y < new_h; ++y) {
        int sy = static_cast<int>(static_cast<long long>(y) * m.height() / new_h);
        for (int x = 0; x < new_w; ++x) {
            int sx = static_cast<int>(static_cast<long long>(x) * m.width() / new_w);
            out.set(x, y, m.at(sx, sy));
        }
    }
    return out;
}

inline LabelMap resample(const LabelMap& l, int new_w, int new_h) {
    if (new_w < 1 || new_h < 1)
        throw std::invalid_argument("resample: dimensions must be >= 1");
    LabelMap out(new_w, new_h);
    for (int y = 0; y < new_h; ++y) {
        int sy = static_cast<int>(static_cast<long long>(y) * l.height() / new_h);
        for (int x = 0; x < new_w; ++x) {
            int sx = static_cast<int>(static_cast<long long>(x) * l.width() / new_w);
            out.set(x, y, l.at(sx, sy));
        }
    }
    return out;
}

inline RleMask rle_encode(const Bitmask& m) {
    RleMask r;
    r.width = m.width();
    r.height = m.height();
    const auto& bits = m.bits();
    uint8_t current = 0;  // first run counts background
    long long run = 0;
    for (uint8_t b : bits) {
        if (b == current) {
            ++run;
        } else {
            r.runs.push_back(run);
            current = b;
            run = 1;
        }
    }
    r.runs.push_back(run);
    return r;
}

inline Bitmask rle_decode(const RleMask& r) {
    long long total = 0;
    for (long long run : r.runs) {
        if (run < 0) throw std::invalid_argument("rle_decode: negative run");
        total += run;
    }
    if (total != static_cast<long long>(r.width) * r.height)
        throw std::invalid_argument("rle_decode: run sum does not match dimensions");
    Bitmask m(r.width, r.height);
    long long pos = 0;
    bool value = false;
    for (long long run : r.runs) {
        if (value)
            for (long long i = 0; i < run; ++i) {
                long long p = pos + i;
                m.set(static_cast<int>(p % r.width), static_cast<int>(p / r.width));
            }
        pos += run;
        value = !value;
    }
    return m;
}

// Text line format: `w h r0 r1 r2 ...`, first run is background length.
inline std::string rle_to_line(const RleMask& r) {
    std::ostringstream os;
    os << r.width << ' ' << r.height;
    for (long long run : r.runs) os << ' ' << run;
    return os.str();
}

inline RleMask rle_from_line(const std::string& line) {
    std::istringstream is(line);
    RleMask r;
    if (!(is >> r.width >> r.height))
        throw std::invalid_argument("rle_from_line: missing dimensions");
    long long run;
    while (is >> run) r.runs.push_back(run);
    if (r.runs.empty())
        throw std::invalid_argument("rle_from_line: missing runs");
    return r;
}

}  // namespace trackforge
