#pragma once

// Toy-scale multi-object mask propagation network. A seeded patch-projection
// encoder stands in for a pretrained backbone; the propagation cascade runs
// dual-branch gated attention layers at 1/16 and 1/8 scale and reaches 1/4
// scale through up-sampling and linear projection only. The decoder is a
// top-down feature-pyramid fusion followed by a per-pixel correlation with
// the identity bank.

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "trackforge/config.hpp"
#include "trackforge/maskcore.hpp"
#include "trackforge/membank.hpp"
#include "trackforge/tensor.hpp"

namespace trackforge {

// Gray image, values in [0,1].
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;  // row-major

    Image() = default;
    Image(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h, 0.0) {}
    double at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
    double& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
};

inline int scale_dim(int full, int scale) { return (full + scale - 1) / scale; }

// Per-scale feature maps stored as (h x w x c) tensors.
struct FeaturePyramid {
    Tensor s16, s8, s4;
    int w16 = 0, h16 = 0, w8 = 0, h8 = 0, w4 = 0, h4 = 0;
};

struct GpmLayerParams {
    Tensor query;     // C_vis x C_vis
    Tensor gate_vis;  // C_vis x C_vis
    Tensor gate_id;   // C_id x C_vis
};

struct EncoderScaleParams {
    Tensor weight;  // C_vis x (s*s)
    Tensor bias;    // 1 x C_vis
};

struct MemoryProjParams {
    Tensor key;      // C_vis x C_vis
    Tensor val_vis;  // C_vis x C_vis
    Tensor val_id;   // C_id x C_id
};

struct DecoderScaleParams {
    Tensor prop;  // C_id x (C_vis + C_id)
    Tensor enc;   // C_id x C_vis
};

struct GpmParams {
    EncoderScaleParams enc16, enc8, enc4;
    MemoryProjParams mem16, mem8;
    std::vector<GpmLayerParams> layers16, layers8;
    Tensor cross_16_8;  // C_vis x C_vis
    Tensor cross_8_4;   // C_vis x C_vis
    DecoderScaleParams dec16, dec8, dec4;
};

// Expected parameter names and shapes for a config; the single source of
// truth for both seeded initialization and the weights-file loader.
inline std::vector<std::pair<std::string, std::vector<int>>> parameter_spec(
    const TrackerConfig& cfg) {
    std::vector<std::pair<std::string, std::vector<int>>> spec;
    for (int s : {16, 8, 4}) {
        std::string p = "enc.s" + std::to_string(s);
        spec.push_back({p + ".weight", {cfg.c_vis, s * s}});
        spec.push_back({p + ".bias", {1, cfg.c_vis}});
    }
    for (int s : {16, 8}) {
        std::string p = "mem.s" + std::to_string(s);
        spec.push_back({p + ".key", {cfg.c_vis, cfg.c_vis}});
        spec.push_back({p + ".val_vis", {cfg.c_vis, cfg.c_vis}});
        spec.push_back({p + ".val_id", {cfg.c_id, cfg.c_id}});
    }
    auto layer_spec = [&](int s, int count) {
        for (int i = 0; i < count; ++i) {
            std::string p = "gpm.s" + std::to_string(s) + ".l" + std::to_string(i);
            spec.push_back({p + ".query", {cfg.c_vis, cfg.c_vis}});
            spec.push_back({p + ".gate_vis", {cfg.c_vis, cfg.c_vis}});
            spec.push_back({p + ".gate_id", {cfg.c_id, cfg.c_vis}});
        }
    };
    layer_spec(16, cfg.gpm_layers_16);
    layer_spec(8, cfg.gpm_layers_8);
    spec.push_back({"cross.s16_s8", {cfg.c_vis, cfg.c_vis}});
    spec.push_back({"cross.s8_s4", {cfg.c_vis, cfg.c_vis}});
    for (int s : {16, 8, 4}) {
        std::string p = "dec.s" + std::to_string(s);
        spec.push_back({p + ".prop", {cfg.c_id, cfg.c_vis + cfg.c_id}});
        spec.push_back({p + ".enc", {cfg.c_id, cfg.c_vis}});
    }
    return spec;
}

inline GpmParams params_from_named(const TrackerConfig& cfg,
                                   const std::map<std::string, Tensor>& named) {
    auto get = [&](const std::string& name) -> const Tensor& {
        auto it = named.find(name);
        if (it == named.end())
            throw std::invalid_argument("params: missing parameter " + name);
        return it->second;
    };
    for (const auto& [name, shape] : parameter_spec(cfg))
        if (get(name).shape() != shape)
            throw std::invalid_argument("params: shape mismatch for " + name);
    for (const auto& [name, t] : named) {
        bool known = false;
        for (const auto& [n, s] : parameter_spec(cfg)) known = known || n == name;
        if (!known) throw std::invalid_argument("params: unknown parameter " + name);
    }

    GpmParams p;
    auto enc = [&](int s) {
        std::string pre = "enc.s" + std::to_string(s);
        return EncoderScaleParams{get(pre + ".weight"), get(pre + ".bias")};
    };
    p.enc16 = enc(16);
    p.enc8 = enc(8);
    p.enc4 = enc(4);
    auto mem = [&](int s) {
        std::string pre = "mem.s" + std::to_string(s);
        return MemoryProjParams{get(pre + ".key"), get(pre + ".val_vis"),
                                get(pre + ".val_id")};
    };
    p.mem16 = mem(16);
    p.mem8 = mem(8);
    auto layers = [&](int s, int count) {
        std::vector<GpmLayerParams> out;
        for (int i = 0; i < count; ++i) {
            std::string pre = "gpm.s" + std::to_string(s) + ".l" + std::to_string(i);
            out.push_back({get(pre + ".query"), get(pre + ".gate_vis"),
                           get(pre + ".gate_id")});
        }
        return out;
    };
    p.layers16 = layers(16, cfg.gpm_layers_16);
    p.layers8 = layers(8, cfg.gpm_layers_8);
    p.cross_16_8 = get("cross.s16_s8");
    p.cross_8_4 = get("cross.s8_s4");
    auto dec = [&](int s) {
        std::string pre = "dec.s" + std::to_string(s);
        return DecoderScaleParams{get(pre + ".prop"), get(pre + ".enc")};
    };
    p.dec16 = dec(16);
    p.dec8 = dec(8);
    p.dec4 = dec(4);
    return p;
}

inline std::map<std::string, Tensor> named_from_seed(const TrackerConfig& cfg) {
    std::map<std::string, Tensor> named;
    for (const auto& [name, shape] : parameter_spec(cfg))
        named[name] = random_matrix(shape[0], shape[1], derive_seed(cfg.seed, name));
    return named;
}

inline GpmParams make_params(const TrackerConfig& cfg) {
    return params_from_named(cfg, named_from_seed(cfg));
}

// One fixed vector per object id; index 0 is background.
class IdentityBank {
public:
    IdentityBank(int object_count, int c_id, uint64_t seed) : c_id_(c_id) {
        if (object_count < 1)
            throw std::invalid_argument("IdentityBank: need at least one object");
        std::mt19937_64 g(derive_seed(seed, "identity_bank"));
        vectors_.resize(object_count + 1, std::vector<double>(c_id));
        for (auto& v : vectors_)
            for (double& x : v) x = rng_normal(g);
    }

    int object_count() const { return static_cast<int>(vectors_.size()) - 1; }
    int c_id() const { return c_id_; }
    const std::vector<double>& vec(int id) const {
        if (id < 0 || id >= static_cast<int>(vectors_.size()))
            throw std::out_of_range("IdentityBank: unknown id");
        return vectors_[id];
    }
    std::vector<double>& vec_mut(int id) { return vectors_[id]; }

private:
    int c_id_;
    std::vector<std::vector<double>> vectors_;
};

inline Tensor embed_identities(const LabelMap& labels, const IdentityBank& bank) {
    int n = labels.width() * labels.height();
    Tensor out({n, bank.c_id()});
    for (int y = 0; y < labels.height(); ++y)
        for (int x = 0; x < labels.width(); ++x) {
            int id = labels.at(x, y);
            if (id > bank.object_count())
                throw std::invalid_argument("embed_identities: label outside bank");
            const auto& v = bank.vec(id);
            int row = y * labels.width() + x;
            for (int k = 0; k < bank.c_id(); ++k) out.at2(row, k) = v[k];
        }
    return out;
}

// Row-stochastic attention weights: softmax(q k^T / sqrt(C)).
inline Tensor attention_weights(const Tensor& q, const Tensor& k) {
    if (q.cols() != k.cols())
        throw std::invalid_argument("attention: channel mismatch");
    if (k.rows() < 1) throw std::invalid_argument("attention: empty memory");
    int n = q.rows(), t = k.rows(), c = q.cols();
    double scale = 1.0 / std::sqrt(static_cast<double>(c));
    Tensor w({n, t});
    for (int i = 0; i < n; ++i) {
        double mx = -1e300;
        for (int j = 0; j < t; ++j) {
            double s = 0.0;
            for (int d = 0; d < c; ++d) s += q.at2(i, d) * k.at2(j, d);
            s *= scale;
            w.at2(i, j) = s;
            mx = std::max(mx, s);
        }
        double sum = 0.0;
        for (int j = 0; j < t; ++j) {
            double e = std::exp(w.at2(i, j) - mx);
            w.at2(i, j) = e;
            sum += e;
        }
        for (int j = 0; j < t; ++j) w.at2(i, j) /= sum;
    }
    return w;
}

inline Tensor apply_weights(const Tensor& w, const Tensor& v) {
    if (w.cols() != v.rows())
        throw std::invalid_argument("attention: value row mismatch");
    Tensor out({w.rows(), v.cols()});
    for (int i = 0; i < w.rows(); ++i)
        for (int k = 0; k < v.cols(); ++k) {
            double s = 0.0;
            for (int j = 0; j < w.cols(); ++j) s += w.at2(i, j) * v.at2(j, k);
            out.at2(i, k) = s;
        }
    return out;
}

inline Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v) {
    return apply_weights(attention_weights(q, k), v);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Counts of propagation-layer applications, for cascade-contract checks.
struct GpmStats {
    long long calls_16 = 0;
    long long calls_8 = 0;
    long long calls_4 = 0;
};

// Dual-branch gated propagation: one attention over memory keys, its weights
// shared by the visual and identity branches, each gated and residual-added.
inline std::pair<Tensor, Tensor> gpm_layer(const Tensor& vis, const Tensor& id,
                                           const Tensor& mem_keys,
                                           const Tensor& mem_vis_values,
                                           const Tensor& mem_id_values,
                                           const GpmLayerParams& p) {
    Tensor q = matmul_t(vis, p.query);
    Tensor w = attention_weights(q, mem_keys);
    Tensor vis_att = apply_weights(w, mem_vis_values);
    Tensor id_att = apply_weights(w, mem_id_values);
    Tensor gate_v = matmul_t(vis, p.gate_vis);
    Tensor gate_i = matmul_t(vis, p.gate_id);

    Tensor vis_out = vis;
    for (int i = 0; i < vis.rows(); ++i)
        for (int c = 0; c < vis.cols(); ++c)
            vis_out.at2(i, c) += sigmoid(gate_v.at2(i, c)) * vis_att.at2(i, c);
    Tensor id_out = id;
    for (int i = 0; i < id.rows(); ++i)
        for (int c = 0; c < id.cols(); ++c)
            id_out.at2(i, c) += sigmoid(gate_i.at2(i, c)) * id_att.at2(i, c);
    return {vis_out, id_out};
}

// Strided patch projection with tanh nonlinearity; one projection per scale.
inline FeaturePyramid encode_frame(const Image& frame, const GpmParams& params,
                                   const TrackerConfig& cfg) {
    if (frame.width < 16 || frame.height < 16)
        throw std::invalid_argument("encode_frame: frame must be at least 16x16");
    FeaturePyramid pyr;
    auto encode_scale = [&](int s, const EncoderScaleParams& ep, int& ow, int& oh) {
        ow = scale_dim(frame.width, s);
        oh = scale_dim(frame.height, s);
        Tensor out({oh, ow, cfg.c_vis});
        std::vector<double> patch(static_cast<size_t>(s) * s);
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                for (int py = 0; py < s; ++py)
                    for (int px = 0; px < s; ++px) {
                        int x = ox * s + px, y = oy * s + py;
                        patch[static_cast<size_t>(py) * s + px] =
                            (x < frame.width && y < frame.height) ? frame.at(x, y) : 0.0;
                    }
                for (int c = 0; c < cfg.c_vis; ++c) {
                    double v = ep.bias.at2(0, c);
                    for (size_t i = 0; i < patch.size(); ++i)
                        v += ep.weight.at2(c, static_cast<int>(i)) * patch[i];
                    out[(static_cast<size_t>(oy) * ow + ox) * cfg.c_vis + c] =
                        std::tanh(v);
                }
            }
        return out;
    };
    pyr.s16 = encode_scale(16, params.enc16, pyr.w16, pyr.h16);
    pyr.s8 = encode_scale(8, params.enc8, pyr.w8, pyr.h8);
    pyr.s4 = encode_scale(4, params.enc4, pyr.w4, pyr.h4);
    return pyr;
}

// Memory projections applied at store time; rows are spatial locations.
inline ScaleMemory project_memory(const Tensor& feat_rows, const Tensor& id_rows,
                                  const MemoryProjParams& mp) {
    ScaleMemory m;
    m.keys = matmul_t(feat_rows, mp.key);
    m.vis_values = matmul_t(feat_rows, mp.val_vis);
    m.id_values = matmul_t(id_rows, mp.val_id);
    return m;
}

inline Tensor as_rows(const Tensor& grid, int h, int w, int c) {
    return Tensor({h * w, c}, grid.values());
}

inline Tensor as_grid(const Tensor& rows, int h, int w, int c) {
    return Tensor({h, w, c}, rows.values());
}

// Multi-scale propagation cascade. Output per scale is the channel
// concatenation of the propagated visual and identity features.
inline FeaturePyramid propagate(const FeaturePyramid& enc, const MemoryView& memory,
                                const GpmParams& params, const TrackerConfig& cfg,
                                GpmStats* stats = nullptr) {
    if (memory.frame_indices.empty())
        throw std::invalid_argument("propagate: empty memory");

    auto run_scale = [&](Tensor vis, Tensor id, const ScaleMemory& mem,
                         const std::vector<GpmLayerParams>& layers,
                         long long* counter) {
        for (const auto& lp : layers) {
            auto [v, i] = gpm_layer(vis, id, mem.keys, mem.vis_values, mem.id_values, lp);
            vis = std::move(v);
            id = std::move(i);
            if (counter) ++*counter;
        }
        return std::pair<Tensor, Tensor>{std::move(vis), std::move(id)};
    };

    // 1/16 scale
    Tensor vis16 = as_rows(enc.s16, enc.h16, enc.w16, cfg.c_vis);
    Tensor id16({enc.h16 * enc.w16, cfg.c_id});
    auto [pv16, pi16] = run_scale(vis16, id16, memory.s16, params.layers16,
                                  stats ? &stats->calls_16 : nullptr);

    // project + upsample to 1/8, then the 1/8 layers
    Tensor vis8_up = resize_bilinear(as_grid(matmul_t(pv16, params.cross_16_8),
                                             enc.h16, enc.w16, cfg.c_vis),
                                     enc.h16, enc.w16, cfg.c_vis, enc.h8, enc.w8);
    Tensor id8_up = resize_bilinear(as_grid(pi16, enc.h16, enc.w16, cfg.c_id),
                                    enc.h16, enc.w16, cfg.c_id, enc.h8, enc.w8);
    Tensor vis8 = add(as_rows(enc.s8, enc.h8, enc.w8, cfg.c_vis),
                      as_rows(vis8_up, enc.h8, enc.w8, cfg.c_vis));
    Tensor id8 = as_rows(id8_up, enc.h8, enc.w8, cfg.c_id);
    auto [pv8, pi8] = run_scale(vis8, id8, memory.s8, params.layers8,
                                stats ? &stats->calls_8 : nullptr);

    // 1/4 scale: up-sampling and linear projection only, no propagation layers
    Tensor vis4_up = resize_bilinear(as_grid(matmul_t(pv8, params.cross_8_4),
                                             enc.h8, enc.w8, cfg.c_vis),
                                     enc.h8, enc.w8, cfg.c_vis, enc.h4, enc.w4);
    Tensor id4_up = resize_bilinear(as_grid(pi8, enc.h8, enc.w8, cfg.c_id),
                                    enc.h8, enc.w8, cfg.c_id, enc.h4, enc.w4);
    Tensor vis4 = add(as_rows(enc.s4, enc.h4, enc.w4, cfg.c_vis),
                      as_rows(vis4_up, enc.h4, enc.w4, cfg.c_vis));
    Tensor id4 = as_rows(id4_up, enc.h4, enc.w4, cfg.c_id);

    auto concat_vi = [&](const Tensor& v, const Tensor& i, int h, int w) {
        Tensor out({h, w, cfg.c_vis + cfg.c_id});
        for (int r = 0; r < h * w; ++r) {
            for (int c = 0; c < cfg.c_vis; ++c)
                out[static_cast<size_t>(r) * (cfg.c_vis + cfg.c_id) + c] = v.at2(r, c);
            for (int c = 0; c < cfg.c_id; ++c)
                out[static_cast<size_t>(r) * (cfg.c_vis + cfg.c_id) + cfg.c_vis + c] =
                    i.at2(r, c);
        }
        return out;
    };

    FeaturePyramid out;
    out.w16 = enc.w16; out.h16 = enc.h16;
    out.w8 = enc.w8; out.h8 = enc.h8;
    out.w4 = enc.w4; out.h4 = enc.h4;
    out.s16 = concat_vi(pv16, pi16, enc.h16, enc.w16);
    out.s8 = concat_vi(pv8, pi8, enc.h8, enc.w8);
    out.s4 = concat_vi(vis4, id4, enc.h4, enc.w4);
    return out;
}

// Top-down FPN fusion; final per-pixel logits are the correlation of the
// fused feature with each identity vector.
inline Tensor decode(const FeaturePyramid& propagated, const FeaturePyramid& enc,
                     const IdentityBank& bank, const GpmParams& params,
                     const TrackerConfig& cfg, int full_w, int full_h) {
    int cc = cfg.c_vis + cfg.c_id;
    auto lateral = [&](const Tensor& prop, const Tensor& encoder, int h, int w,
                       const DecoderScaleParams& dp) {
        Tensor p = matmul_t(as_rows(prop, h, w, cc), dp.prop);
        Tensor e = matmul_t(as_rows(encoder, h, w, cfg.c_vis), dp.enc);
        return as_grid(add(p, e), h, w, cfg.c_id);
    };
    Tensor f16 = lateral(propagated.s16, enc.s16, enc.h16, enc.w16, params.dec16);
    Tensor f8 = lateral(propagated.s8, enc.s8, enc.h8, enc.w8, params.dec8);
    Tensor f4 = lateral(propagated.s4, enc.s4, enc.h4, enc.w4, params.dec4);

    Tensor g8 = add(f8, resize_bilinear(f16, enc.h16, enc.w16, cfg.c_id, enc.h8, enc.w8));
    Tensor g4 = add(f4, resize_bilinear(g8, enc.h8, enc.w8, cfg.c_id, enc.h4, enc.w4));
    Tensor full = resize_bilinear(g4, enc.h4, enc.w4, cfg.c_id, full_h, full_w);

    int m = bank.object_count();
    Tensor logits({m + 1, full_h, full_w});
    for (int id = 0; id <= m; ++id) {
        const auto& v = bank.vec(id);
        for (int y = 0; y < full_h; ++y)
            for (int x = 0; x < full_w; ++x) {
                double s = 0.0;
                for (int k = 0; k < cfg.c_id; ++k)
                    s += full[(static_cast<size_t>(y) * full_w + x) * cfg.c_id + k] * v[k];
                logits[(static_cast<size_t>(id) * full_h + y) * full_w + x] = s;
            }
    }
    return logits;
}

// Per-pixel argmax over channels; ties go to the higher channel index.
inline LabelMap argmax_labels(const Tensor& logits, int channels, int w, int h) {
    LabelMap out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int best = 0;
            double best_v = logits[(static_cast<size_t>(0) * h + y) * w + x];
            for (int c = 1; c < channels; ++c) {
                double v = logits[(static_cast<size_t>(c) * h + y) * w + x];
                if (v >= best_v) {
                    best_v = v;
                    best = c;
                }
            }
            out.set(x, y, best);
        }
    return out;
}

struct FrameResult {
    LabelMap labels;
    std::vector<Bitmask> masks;        // one per object id 1..M
    std::vector<double> confidences;   // mean logit margin per object, 0 if empty
    FrameResult(int w, int h) : labels(w, h) {}
};

}  // namespace trackforge
