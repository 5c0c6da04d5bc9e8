#pragma once

// Box-prompt extraction, mock mask refiners, and the IoU-gated selector
// between the propagated mask and the refined mask. The refiners are
// deterministic stand-ins for a large promptable segmenter; the selector
// logic is the part under test.

#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "trackforge/maskcore.hpp"
#include "trackforge/propagation.hpp"

namespace trackforge {

struct RefinerKind {
    enum class Type { identity, dilate, noise, oracle_snap };

    Type type = Type::identity;
    int radius = 1;               // dilate
    double flip_p = 0.0;          // noise
    uint64_t seed = 0;            // noise, oracle_snap
    double improve_above = 0.3;   // oracle_snap
    double degrade_below = 0.3;   // oracle_snap

    // Flag syntax: identity | dilate:r | noise:p:seed | oracle:hi:lo:seed
    static RefinerKind parse(const std::string& flag) {
        RefinerKind k;
        std::vector<std::string> parts;
        std::istringstream is(flag);
        std::string part;
        while (std::getline(is, part, ':')) parts.push_back(part);
        if (parts.empty()) throw std::invalid_argument("refiner: empty flag");
        if (parts[0] == "identity" && parts.size() == 1) {
            k.type = Type::identity;
        } else if (parts[0] == "dilate" && parts.size() == 2) {
            k.type = Type::dilate;
            k.radius = std::stoi(parts[1]);
            if (k.radius < 0) throw std::invalid_argument("refiner: negative radius");
        } else if (parts[0] == "noise" && parts.size() == 3) {
            k.type = Type::noise;
            k.flip_p = std::stod(parts[1]);
            k.seed = std::stoull(parts[2]);
            if (k.flip_p < 0.0 || k.flip_p > 1.0)
                throw std::invalid_argument("refiner: flip probability outside [0,1]");
        } else if (parts[0] == "oracle" && parts.size() == 4) {
            k.type = Type::oracle_snap;
            k.improve_above = std::stod(parts[1]);
            k.degrade_below = std::stod(parts[2]);
            k.seed = std::stoull(parts[3]);
            if (k.improve_above < 0.0 || k.improve_above > 1.0 ||
                k.degrade_below < 0.0 || k.degrade_below > 1.0)
                throw std::invalid_argument("refiner: thresholds outside [0,1]");
        } else {
            throw std::invalid_argument("refiner: bad flag '" + flag + "'");
        }
        return k;
    }
};

struct SelectionDecision {
    int object_id = 0;
    double iou_vmos_refined = 0.0;
    bool chose_refined = false;
};

inline std::vector<std::pair<int, Box>> extract_prompts(const FrameResult& fr) {
    std::vector<std::pair<int, Box>> prompts;
    for (size_t i = 0; i < fr.masks.size(); ++i)
        if (auto box = enclosing_box(fr.masks[i]))
            prompts.push_back({static_cast<int>(i) + 1, *box});
    return prompts;
}

namespace detail {

// Chebyshev dilation; added pixels are clipped to the prompt box.
inline Bitmask dilate_in_box(const Bitmask& m, int radius, const Box& box) {
    Bitmask out = m;
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) {
            if (m.at(x, y) || !box.contains(x, y)) continue;
            bool near = false;
            for (int dy = -radius; dy <= radius && !near; ++dy)
                for (int dx = -radius; dx <= radius && !near; ++dx) {
                    int nx = x + dx, ny = y + dy;
                    if (nx >= 0 && nx < m.width() && ny >= 0 && ny < m.height() &&
                        m.at(nx, ny))
                        near = true;
                }
            if (near) out.set(x, y);
        }
    return out;
}

// A small seeded fragment of the box pixels not claimed by the proposal,
// modelling a refiner hallucinating a wrong sliver. When the box is fully
// covered, a single seeded pixel from the one-pixel ring around it is used
// instead. Empty only if the proposal covers the whole frame.
inline Bitmask disjoint_blob(const Bitmask& vmos, const Box& box, uint64_t seed) {
    Bitmask out(vmos.width(), vmos.height());
    std::mt19937_64 g(seed);
    std::vector<std::pair<int, int>> free_px;
    for (int y = box.y_min; y <= box.y_max; ++y)
        for (int x = box.x_min; x <= box.x_max; ++x)
            if (!vmos.at(x, y)) free_px.push_back({x, y});
    if (!free_px.empty()) {
        size_t target = std::max<size_t>(1, free_px.size() / 8);
        size_t start = g() % free_px.size();
        for (size_t i = 0; i < target; ++i) {
            auto [x, y] = free_px[(start + i) % free_px.size()];
            out.set(x, y);
        }
        return out;
    }
    std::vector<std::pair<int, int>> ring;
    for (int y = box.y_min - 1; y <= box.y_max + 1; ++y)
        for (int x = box.x_min - 1; x <= box.x_max + 1; ++x) {
            if (x < 0 || x >= vmos.width() || y < 0 || y >= vmos.height()) continue;
            if (box.contains(x, y) || vmos.at(x, y)) continue;
            ring.push_back({x, y});
        }
    if (!ring.empty()) {
        auto [x, y] = ring[g() % ring.size()];
        out.set(x, y);
    }
    return out;
}

}  // namespace detail

inline Bitmask refine(const RefinerKind& kind, const Image& image, const Box& box,
                      const Bitmask& vmos_mask,
                      const std::optional<Bitmask>& gt_mask = std::nullopt) {
    (void)image;  // mock refiners do not consult pixel data
    if (box.x_min < 0 || box.y_min < 0 || box.x_max >= vmos_mask.width() ||
        box.y_max >= vmos_mask.height() || box.x_min > box.x_max ||
        box.y_min > box.y_max)
        throw std::invalid_argument("refine: box outside frame");
    switch (kind.type) {
        case RefinerKind::Type::identity:
            return vmos_mask;
        case RefinerKind::Type::dilate:
            return detail::dilate_in_box(vmos_mask, kind.radius, box);
        case RefinerKind::Type::noise: {
            Bitmask out = vmos_mask;
            std::mt19937_64 g(kind.seed);
            for (int y = box.y_min; y <= box.y_max; ++y)
                for (int x = box.x_min; x <= box.x_max; ++x)
                    if (rng_uniform(g) < kind.flip_p) out.set(x, y, !out.at(x, y));
            return out;
        }
        case RefinerKind::Type::oracle_snap: {
            if (!gt_mask)
                throw std::invalid_argument("refine: oracle_snap requires ground truth");
            double score = iou(vmos_mask, *gt_mask);
            if (score >= kind.improve_above) return *gt_mask;
            if (score < kind.degrade_below)
                return detail::disjoint_blob(vmos_mask, box, kind.seed);
            return vmos_mask;
        }
    }
    throw std::logic_error("refine: unreachable");
}

// Strict gate: the refined mask wins only when iou(vmos, refined) > tau.
inline std::pair<Bitmask, SelectionDecision> select(const Bitmask& vmos_mask,
                                                    const Bitmask& refined_mask,
                                                    double tau, int object_id = 0) {
    if (tau < 0.0 || tau > 1.0)
        throw std::invalid_argument("select: tau outside [0,1]");
    SelectionDecision d;
    d.object_id = object_id;
    d.iou_vmos_refined = iou(vmos_mask, refined_mask);
    d.chose_refined = d.iou_vmos_refined > tau;
    return {d.chose_refined ? refined_mask : vmos_mask, d};
}

// Per-object prompt -> refine -> select; objects without prompts pass through.
// refine_all bypasses the gate and always takes the refined mask.
inline std::pair<FrameResult, std::vector<SelectionDecision>> refine_frame(
    const FrameResult& fr, const RefinerKind& kind, double tau, const Image& image,
    const std::optional<LabelMap>& gt = std::nullopt, bool refine_all = false) {
    FrameResult out = fr;
    std::vector<SelectionDecision> decisions;
    std::optional<std::vector<Bitmask>> gt_masks;
    if (gt) gt_masks = split(*gt, static_cast<int>(fr.masks.size()));

    for (const auto& [id, box] : extract_prompts(fr)) {
        std::optional<Bitmask> gt_mask;
        if (gt_masks) gt_mask = (*gt_masks)[id - 1];
        Bitmask refined = refine(kind, image, box, fr.masks[id - 1], gt_mask);
        if (refine_all) {
            SelectionDecision d;
            d.object_id = id;
            d.iou_vmos_refined = iou(fr.masks[id - 1], refined);
            d.chose_refined = true;
            out.masks[id - 1] = refined;
            decisions.push_back(d);
        } else {
            auto [mask, d] = select(fr.masks[id - 1], refined, tau, id);
            out.masks[id - 1] = mask;
            decisions.push_back(d);
        }
    }
    // Re-merge to restore mutual exclusivity after per-object refinement.
    out.labels = merge(out.masks);
    out.masks = split(out.labels, static_cast<int>(out.masks.size()));
    return {out, decisions};
}

}  // namespace trackforge
