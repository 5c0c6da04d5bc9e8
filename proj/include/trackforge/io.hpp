#pragma once

// On-disk formats: binary PGM frames, one-RLE-line-per-object mask files,
// sequence directories with meta.json, and the TFW1 weights container
// (big-endian, IEEE-754 binary64). All formats round-trip byte-exactly.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "trackforge/maskcore.hpp"
#include "trackforge/propagation.hpp"
#include "trackforge/synth.hpp"

namespace trackforge {

namespace fs = std::filesystem;

inline std::string frame_name(int index, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06d%s", index, ext);
    return buf;
}

// ---- PGM (binary P5, maxval 255) ----

inline void write_pgm(const fs::path& path, const Image& img) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_pgm: cannot open " + path.string());
    f << "P5\n" << img.width << " " << img.height << "\n255\n";
    for (double v : img.pixels) {
        double c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        f.put(static_cast<char>(static_cast<int>(c * 255.0 + 0.5)));
    }
}

inline Image read_pgm(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_pgm: cannot open " + path.string());
    std::string magic;
    int w, h, maxval;
    f >> magic >> w >> h >> maxval;
    if (magic != "P5" || maxval != 255)
        throw std::runtime_error("read_pgm: unsupported format in " + path.string());
    f.get();  // single whitespace after header
    Image img(w, h);
    for (double& v : img.pixels) {
        int c = f.get();
        if (c == EOF) throw std::runtime_error("read_pgm: truncated " + path.string());
        v = c / 255.0;
    }
    return img;
}

// ---- RLE mask files: one line per object, ordered by id ----

inline void write_masks_rle(const fs::path& path, const std::vector<Bitmask>& masks) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_masks_rle: cannot open " + path.string());
    for (const auto& m : masks) f << rle_to_line(rle_encode(m)) << "\n";
}

inline std::vector<Bitmask> read_masks_rle(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("read_masks_rle: cannot open " + path.string());
    std::vector<Bitmask> masks;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        masks.push_back(rle_decode(rle_from_line(line)));
    }
    return masks;
}

// ---- Sequence directory ----

struct SequenceMeta {
    int object_count = 0;
    int frame_count = 0;
    int width = 0;
    int height = 0;
};

inline void write_meta(const fs::path& dir, const SequenceMeta& meta) {
    nlohmann::json j;
    j["object_count"] = meta.object_count;
    j["frame_count"] = meta.frame_count;
    j["width"] = meta.width;
    j["height"] = meta.height;
    std::ofstream f(dir / "meta.json");
    f << j.dump(2) << "\n";
}

inline SequenceMeta read_meta(const fs::path& dir) {
    std::ifstream f(dir / "meta.json");
    if (!f) throw std::runtime_error("read_meta: missing meta.json in " + dir.string());
    nlohmann::json j;
    f >> j;
    SequenceMeta meta;
    meta.object_count = j.at("object_count").get<int>();
    meta.frame_count = j.at("frame_count").get<int>();
    meta.width = j.at("width").get<int>();
    meta.height = j.at("height").get<int>();
    return meta;
}

inline void write_sequence(const fs::path& dir, const SceneSpec& spec) {
    fs::create_directories(dir / "frames");
    fs::create_directories(dir / "gt");
    int m = static_cast<int>(spec.objects.size());
    for (int t = 0; t < spec.length; ++t) {
        SynthFrame frame = render(spec, t);
        write_pgm(dir / "frames" / frame_name(t, ".pgm"), frame.image);
        write_masks_rle(dir / "gt" / frame_name(t, ".rle"), split(frame.gt, m));
    }
    write_meta(dir, {m, spec.length, spec.width, spec.height});
}

inline Image read_frame(const fs::path& seq_dir, int t) {
    return read_pgm(seq_dir / "frames" / frame_name(t, ".pgm"));
}

inline std::vector<Bitmask> read_gt(const fs::path& seq_dir, int t, int object_count) {
    auto masks = read_masks_rle(seq_dir / "gt" / frame_name(t, ".rle"));
    if (static_cast<int>(masks.size()) != object_count)
        throw std::runtime_error("read_gt: object count mismatch at frame " +
                                 std::to_string(t));
    return masks;
}

// ---- TFW1 weights container ----

namespace detail {

inline void put_u16be(std::ostream& os, uint16_t v) {
    os.put(static_cast<char>(v >> 8));
    os.put(static_cast<char>(v & 0xff));
}

inline void put_u32be(std::ostream& os, uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) os.put(static_cast<char>((v >> s) & 0xff));
}

inline void put_f64be(std::ostream& os, double d) {
    uint64_t bits;
    std::memcpy(&bits, &d, 8);
    for (int s = 56; s >= 0; s -= 8) os.put(static_cast<char>((bits >> s) & 0xff));
}

inline uint16_t get_u16be(std::istream& is) {
    uint16_t v = 0;
    for (int i = 0; i < 2; ++i) {
        int c = is.get();
        if (c == EOF) throw std::runtime_error("weights: truncated file");
        v = static_cast<uint16_t>((v << 8) | c);
    }
    return v;
}

inline uint32_t get_u32be(std::istream& is) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        int c = is.get();
        if (c == EOF) throw std::runtime_error("weights: truncated file");
        v = (v << 8) | static_cast<uint32_t>(c);
    }
    return v;
}

inline double get_f64be(std::istream& is) {
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
        int c = is.get();
        if (c == EOF) throw std::runtime_error("weights: truncated file");
        bits = (bits << 8) | static_cast<uint64_t>(c);
    }
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

}  // namespace detail

inline void save_weights(const fs::path& path,
                         const std::map<std::string, Tensor>& named) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_weights: cannot open " + path.string());
    f.write("TFW1", 4);
    for (const auto& [name, t] : named) {
        detail::put_u16be(f, static_cast<uint16_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        f.put(static_cast<char>(t.shape().size()));
        for (int d : t.shape()) detail::put_u32be(f, static_cast<uint32_t>(d));
        for (size_t i = 0; i < t.size(); ++i) detail::put_f64be(f, t[i]);
    }
}

inline std::map<std::string, Tensor> load_weights(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_weights: cannot open " + path.string());
    char magic[4];
    f.read(magic, 4);
    if (f.gcount() != 4 || std::memcmp(magic, "TFW1", 4) != 0)
        throw std::runtime_error("load_weights: bad magic");
    std::map<std::string, Tensor> named;
    while (f.peek() != EOF) {
        uint16_t name_len = detail::get_u16be(f);
        std::string name(name_len, '\0');
        f.read(name.data(), name_len);
        if (f.gcount() != name_len) throw std::runtime_error("weights: truncated name");
        int rank = f.get();
        if (rank == EOF) throw std::runtime_error("weights: truncated rank");
        std::vector<int> shape;
        size_t count = 1;
        for (int i = 0; i < rank; ++i) {
            uint32_t d = detail::get_u32be(f);
            shape.push_back(static_cast<int>(d));
            count *= d;
        }
        std::vector<double> values(count);
        for (double& v : values) v = detail::get_f64be(f);
        named.emplace(std::move(name), Tensor(std::move(shape), std::move(values)));
    }
    return named;
}

// Loads a weights file and checks names/shapes against the config.
inline GpmParams load_params(const fs::path& path, const TrackerConfig& cfg) {
    return params_from_named(cfg, load_weights(path));
}

}  // namespace trackforge
