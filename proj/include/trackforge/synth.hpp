#pragma once

// Deterministic synthetic sequences: moving rects/disks with piecewise-linear
// trajectories, depth-ordered occlusion, visibility intervals, image-only
// distractor clones, and a seeded background texture. (spec, seed) fully
// determines every output byte.

#include <algorithm>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "trackforge/maskcore.hpp"
#include "trackforge/propagation.hpp"

namespace trackforge {

struct PathKey {
    int t = 0;
    double x = 0.0, y = 0.0;  // object center
};

struct SizeKey {
    int t = 0;
    double w = 0.0, h = 0.0;  // rect extents; disks use w as the radius
};

struct ObjectSpec {
    enum class Shape { rect, disk };
    Shape shape = Shape::rect;
    double gray = 0.8;
    int depth = 0;  // 0 is frontmost
    std::vector<PathKey> path;
    std::vector<SizeKey> size;
    std::vector<std::pair<int, int>> visible;  // inclusive intervals; empty = always
};

struct DistractorSpec {
    int of = 0;  // index into objects
    double dx = 0.0, dy = 0.0;
};

struct SceneSpec {
    int width = 64, height = 64, length = 1;
    uint64_t seed = 0;
    double background_noise = 0.05;
    std::vector<ObjectSpec> objects;
    std::vector<DistractorSpec> distractors;

    static SceneSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    void validate() const;
};

struct SynthFrame {
    Image image;
    LabelMap gt;
    std::vector<bool> visible;  // per object: has at least one gt pixel
    SynthFrame(int w, int h, int objects)
        : image(w, h), gt(w, h), visible(objects, false) {}
};

namespace detail {

inline double interp_1d(int t, int t0, double v0, int t1, double v1) {
    if (t1 == t0) return v0;
    double f = static_cast<double>(t - t0) / (t1 - t0);
    return v0 + f * (v1 - v0);
}

template <typename Key, typename Get>
double interp_keys(const std::vector<Key>& keys, int t, Get get) {
    if (keys.empty()) throw std::invalid_argument("synth: empty keyframe list");
    if (t <= keys.front().t) return get(keys.front());
    if (t >= keys.back().t) return get(keys.back());
    for (size_t i = 1; i < keys.size(); ++i)
        if (t <= keys[i].t)
            return interp_1d(t, keys[i - 1].t, get(keys[i - 1]), keys[i].t,
                             get(keys[i]));
    return get(keys.back());
}

inline bool in_visibility(const ObjectSpec& o, int t) {
    if (o.visible.empty()) return true;
    for (auto [a, b] : o.visible)
        if (t >= a && t <= b) return true;
    return false;
}

// Pixel-center rasterization. Rect covers centers in the half-open extent;
// disks cover centers strictly inside the radius.
inline bool covers(const ObjectSpec& o, double cx, double cy, double w, double h,
                   int px, int py) {
    double x = px + 0.5, y = py + 0.5;
    if (o.shape == ObjectSpec::Shape::rect)
        return x >= cx - w / 2 && x < cx + w / 2 && y >= cy - h / 2 && y < cy + h / 2;
    double dx = x - cx, dy = y - cy;
    return dx * dx + dy * dy < w * w;  // w is the radius
}

}  // namespace detail

inline SynthFrame render(const SceneSpec& spec, int t) {
    if (t < 0 || t >= spec.length)
        throw std::out_of_range("render: frame index out of range");
    int m = static_cast<int>(spec.objects.size());
    SynthFrame frame(spec.width, spec.height, m);

    // Seeded background texture, independent per frame.
    std::mt19937_64 g(derive_seed(spec.seed, "bg." + std::to_string(t)));
    for (double& p : frame.image.pixels)
        p = 0.15 + spec.background_noise * rng_uniform(g);

    struct Placed {
        const ObjectSpec* obj;
        double cx, cy, w, h;
        int label;  // 0 for distractors (image only)
        int depth;
    };
    std::vector<Placed> placed;
    auto place = [&](const ObjectSpec& o, double dx, double dy, int label) {
        if (!detail::in_visibility(o, t)) return;
        double cx = detail::interp_keys(o.path, t, [](const PathKey& k) { return k.x; });
        double cy = detail::interp_keys(o.path, t, [](const PathKey& k) { return k.y; });
        double w = detail::interp_keys(o.size, t, [](const SizeKey& k) { return k.w; });
        double h = detail::interp_keys(o.size, t, [](const SizeKey& k) { return k.h; });
        placed.push_back({&o, cx + dx, cy + dy, w, h, label, o.depth});
    };
    for (const auto& d : spec.distractors) {
        if (d.of < 0 || d.of >= m)
            throw std::invalid_argument("synth: distractor references unknown object");
        place(spec.objects[d.of], d.dx, d.dy, 0);
    }
    for (int i = 0; i < m; ++i) place(spec.objects[i], 0.0, 0.0, i + 1);

    // Painter's algorithm: far (large depth) first; distractors behind objects
    // at equal depth. Distractors touch only the image, never the labels.
    std::stable_sort(placed.begin(), placed.end(), [](const Placed& a, const Placed& b) {
        if (a.depth != b.depth) return a.depth > b.depth;
        return a.label == 0 && b.label != 0;
    });
    for (const auto& p : placed)
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x)
                if (detail::covers(*p.obj, p.cx, p.cy, p.w, p.h, x, y)) {
                    frame.image.at(x, y) = p.obj->gray;
                    if (p.label > 0) frame.gt.set(x, y, p.label);
                }
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x)
            if (frame.gt.at(x, y) > 0) frame.visible[frame.gt.at(x, y) - 1] = true;
    return frame;
}

inline std::vector<SynthFrame> generate(const SceneSpec& spec) {
    spec.validate();
    std::vector<SynthFrame> frames;
    frames.reserve(spec.length);
    for (int t = 0; t < spec.length; ++t) frames.push_back(render(spec, t));
    return frames;
}

inline void SceneSpec::validate() const {
    if (width < 1 || height < 1) throw std::invalid_argument("synth: bad frame dims");
    if (length < 1) throw std::invalid_argument("synth: length must be >= 1");
    if (objects.empty()) throw std::invalid_argument("synth: need at least one object");
    for (const auto& o : objects) {
        if (o.path.empty() || o.size.empty())
            throw std::invalid_argument("synth: object needs path and size keyframes");
        for (auto [a, b] : o.visible)
            if (a < 0 || b >= length || a > b)
                throw std::invalid_argument("synth: visibility interval out of range");
    }
}

inline SceneSpec SceneSpec::from_json(const nlohmann::json& j) {
    SceneSpec s;
    s.width = j.at("width").get<int>();
    s.height = j.at("height").get<int>();
    s.length = j.at("length").get<int>();
    s.seed = j.value("seed", 0ull);
    s.background_noise = j.value("background_noise", 0.05);
    for (const auto& jo : j.at("objects")) {
        ObjectSpec o;
        std::string shape = jo.value("shape", "rect");
        if (shape == "rect")
            o.shape = ObjectSpec::Shape::rect;
        else if (shape == "disk")
            o.shape = ObjectSpec::Shape::disk;
        else
            throw std::invalid_argument("synth: unknown shape " + shape);
        o.gray = jo.value("gray", 0.8);
        o.depth = jo.value("depth", 0);
        for (const auto& jk : jo.at("path"))
            o.path.push_back({jk.at("t").get<int>(), jk.at("x").get<double>(),
                              jk.at("y").get<double>()});
        for (const auto& jk : jo.at("size")) {
            SizeKey k;
            k.t = jk.at("t").get<int>();
            if (o.shape == ObjectSpec::Shape::disk) {
                k.w = jk.at("r").get<double>();
                k.h = k.w;
            } else {
                k.w = jk.at("w").get<double>();
                k.h = jk.at("h").get<double>();
            }
            o.size.push_back(k);
        }
        if (jo.contains("visible"))
            for (const auto& ji : jo.at("visible"))
                o.visible.push_back({ji.at(0).get<int>(), ji.at(1).get<int>()});
        s.objects.push_back(std::move(o));
    }
    if (j.contains("distractors"))
        for (const auto& jd : j.at("distractors"))
            s.distractors.push_back({jd.at("of").get<int>(), jd.at("dx").get<double>(),
                                     jd.at("dy").get<double>()});
    s.validate();
    return s;
}

inline nlohmann::json SceneSpec::to_json() const {
    nlohmann::json j;
    j["width"] = width;
    j["height"] = height;
    j["length"] = length;
    j["seed"] = seed;
    j["background_noise"] = background_noise;
    j["objects"] = nlohmann::json::array();
    for (const auto& o : objects) {
        nlohmann::json jo;
        jo["shape"] = o.shape == ObjectSpec::Shape::rect ? "rect" : "disk";
        jo["gray"] = o.gray;
        jo["depth"] = o.depth;
        jo["path"] = nlohmann::json::array();
        for (const auto& k : o.path)
            jo["path"].push_back({{"t", k.t}, {"x", k.x}, {"y", k.y}});
        jo["size"] = nlohmann::json::array();
        for (const auto& k : o.size) {
            if (o.shape == ObjectSpec::Shape::disk)
                jo["size"].push_back({{"t", k.t}, {"r", k.w}});
            else
                jo["size"].push_back({{"t", k.t}, {"w", k.w}, {"h", k.h}});
        }
        if (!o.visible.empty()) {
            jo["visible"] = nlohmann::json::array();
            for (auto [a, b] : o.visible) jo["visible"].push_back({a, b});
        }
        j["objects"].push_back(jo);
    }
    if (!distractors.empty()) {
        j["distractors"] = nlohmann::json::array();
        for (const auto& d : distractors)
            j["distractors"].push_back({{"of", d.of}, {"dx", d.dx}, {"dy", d.dy}});
    }
    return j;
}

}  // namespace trackforge
