#include <catch_amalgamated.hpp>

#include <random>

#include "trackforge/tracker.hpp"

using namespace trackforge;

namespace {

Tensor random_tensor(std::vector<int> shape, std::mt19937_64& g, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (size_t i = 0; i < t.size(); ++i) t[i] = rng_normal(g) * scale;
    return t;
}

// Naive double-loop attention in long double, independent of the kernel.
Tensor attention_oracle(const Tensor& q, const Tensor& k, const Tensor& v) {
    int n = q.rows(), t = k.rows(), c = q.cols(), cv = v.cols();
    long double scale = 1.0L / std::sqrt(static_cast<long double>(c));
    Tensor out({n, cv});
    for (int i = 0; i < n; ++i) {
        std::vector<long double> w(t);
        long double sum = 0.0L;
        for (int j = 0; j < t; ++j) {
            long double s = 0.0L;
            for (int d = 0; d < c; ++d)
                s += static_cast<long double>(q.at2(i, d)) * k.at2(j, d);
            w[j] = std::exp(s * scale);
            sum += w[j];
        }
        for (int o = 0; o < cv; ++o) {
            long double acc = 0.0L;
            for (int j = 0; j < t; ++j) acc += w[j] / sum * v.at2(j, o);
            out.at2(i, o) = static_cast<double>(acc);
        }
    }
    return out;
}

Image constant_frame(int w, int h, double v) {
    Image img(w, h);
    for (double& p : img.pixels) p = v;
    return img;
}

TrackerConfig small_config(uint64_t seed = 3) {
    TrackerConfig cfg;
    cfg.c_vis = 8;
    cfg.c_id = 4;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("attention with a single memory row returns that value row") {
    std::mt19937_64 g(1);
    Tensor q = random_tensor({3, 4}, g);
    Tensor k = random_tensor({1, 4}, g);
    Tensor v = random_tensor({1, 2}, g);
    Tensor out = attention(q, k, v);
    for (int i = 0; i < 3; ++i)
        for (int c = 0; c < 2; ++c) CHECK(out.at2(i, c) == Catch::Approx(v.at2(0, c)));
}

TEST_CASE("attention scalar example") {
    Tensor q({1, 2}, {1.0, 0.0});
    Tensor k({2, 2}, {1.0, 0.0, 0.0, 1.0});
    Tensor v({2, 1}, {2.0, 4.0});
    double s1 = std::exp(1.0 / std::sqrt(2.0)), s2 = std::exp(0.0);
    double w1 = s1 / (s1 + s2), w2 = s2 / (s1 + s2);
    Tensor out = attention(q, k, v);
    CHECK(out.at2(0, 0) == Catch::Approx(w1 * 2.0 + w2 * 4.0).epsilon(1e-12));
}

TEST_CASE("attention matches the brute-force oracle on random instances") {
    std::mt19937_64 g(42);
    for (int it = 0; it < 100; ++it) {
        int n = 1 + static_cast<int>(g() % 32);
        int t = 1 + static_cast<int>(g() % 32);
        int c = 1 + static_cast<int>(g() % 16);
        int cv = 1 + static_cast<int>(g() % 16);
        Tensor q = random_tensor({n, c}, g);
        Tensor k = random_tensor({t, c}, g);
        Tensor v = random_tensor({t, cv}, g);
        Tensor got = attention(q, k, v);
        Tensor want = attention_oracle(q, k, v);
        for (size_t i = 0; i < got.size(); ++i)
            CHECK(got[i] == Catch::Approx(want[i]).margin(1e-9));
        Tensor w = attention_weights(q, k);
        for (int i = 0; i < n; ++i) {
            double sum = 0.0;
            for (int j = 0; j < t; ++j) sum += w.at2(i, j);
            CHECK(sum == Catch::Approx(1.0).margin(1e-9));
        }
    }
}

TEST_CASE("attention rejects empty memory and channel mismatch") {
    Tensor q({2, 3});
    CHECK_THROWS_AS(attention(q, Tensor({0, 3}), Tensor({0, 2})),
                    std::invalid_argument);
    CHECK_THROWS_AS(attention(q, Tensor({2, 4}), Tensor({2, 2})),
                    std::invalid_argument);
}

TEST_CASE("attention output stays within the convex hull per channel") {
    std::mt19937_64 g(8);
    Tensor q = random_tensor({5, 4}, g);
    Tensor k = random_tensor({7, 4}, g);
    Tensor v = random_tensor({7, 3}, g);
    Tensor out = attention(q, k, v);
    for (int c = 0; c < 3; ++c) {
        double lo = 1e300, hi = -1e300;
        for (int j = 0; j < 7; ++j) {
            lo = std::min(lo, v.at2(j, c));
            hi = std::max(hi, v.at2(j, c));
        }
        for (int i = 0; i < 5; ++i) {
            CHECK(out.at2(i, c) >= lo - 1e-12);
            CHECK(out.at2(i, c) <= hi + 1e-12);
        }
    }
}

TEST_CASE("gpm gate closed means output is the input") {
    std::mt19937_64 g(4);
    int n = 6, t = 5, cv = 8, ci = 4;
    GpmLayerParams p;
    p.query = random_tensor({cv, cv}, g);
    // large negative gate pre-activations shut both branches
    p.gate_vis = random_tensor({cv, cv}, g, 0.0);
    p.gate_id = random_tensor({ci, cv}, g, 0.0);
    Tensor vis = random_tensor({n, cv}, g);
    for (size_t i = 0; i < p.gate_vis.size(); ++i) p.gate_vis[i] = 0.0;
    for (size_t i = 0; i < p.gate_id.size(); ++i) p.gate_id[i] = 0.0;
    // add a big negative bias through the first input channel
    Tensor vis_biased = vis;
    for (int i = 0; i < n; ++i) vis_biased.at2(i, 0) = 1.0;
    for (int c = 0; c < cv; ++c) p.gate_vis.at2(c, 0) = -40.0;
    for (int c = 0; c < ci; ++c) p.gate_id.at2(c, 0) = -40.0;

    Tensor id = random_tensor({n, ci}, g);
    Tensor keys = random_tensor({t, cv}, g);
    Tensor vvals = random_tensor({t, cv}, g);
    Tensor ivals = random_tensor({t, ci}, g);
    auto [vis_out, id_out] = gpm_layer(vis_biased, id, keys, vvals, ivals, p);
    for (size_t i = 0; i < vis_out.size(); ++i)
        CHECK(std::abs(vis_out[i] - vis_biased[i]) < 1e-6);
    for (size_t i = 0; i < id_out.size(); ++i)
        CHECK(std::abs(id_out[i] - id[i]) < 1e-6);
}

TEST_CASE("gpm layer matches a hand-rolled formula with one memory entry") {
    std::mt19937_64 g(5);
    int n = 4, cv = 6, ci = 3;
    GpmLayerParams p;
    p.query = random_tensor({cv, cv}, g);
    p.gate_vis = random_tensor({cv, cv}, g);
    p.gate_id = random_tensor({ci, cv}, g);
    Tensor vis = random_tensor({n, cv}, g);
    Tensor id = random_tensor({n, ci}, g);
    Tensor keys = random_tensor({1, cv}, g);
    Tensor vvals = random_tensor({1, cv}, g);
    Tensor ivals = random_tensor({1, ci}, g);
    auto [vis_out, id_out] = gpm_layer(vis, id, keys, vvals, ivals, p);
    // single memory row: attention output is that row exactly
    Tensor gate_i = matmul_t(vis, p.gate_id);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < ci; ++c) {
            double want = id.at2(i, c) + sigmoid(gate_i.at2(i, c)) * ivals.at2(0, c);
            CHECK(id_out.at2(i, c) == Catch::Approx(want).epsilon(1e-12));
        }
    Tensor gate_v = matmul_t(vis, p.gate_vis);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < cv; ++c) {
            double want = vis.at2(i, c) + sigmoid(gate_v.at2(i, c)) * vvals.at2(0, c);
            CHECK(vis_out.at2(i, c) == Catch::Approx(want).epsilon(1e-12));
        }
}

TEST_CASE("gpm output is invariant under joint memory permutation") {
    std::mt19937_64 g(6);
    int n = 5, t = 9, cv = 8, ci = 4;
    GpmLayerParams p;
    p.query = random_tensor({cv, cv}, g);
    p.gate_vis = random_tensor({cv, cv}, g);
    p.gate_id = random_tensor({ci, cv}, g);
    Tensor vis = random_tensor({n, cv}, g);
    Tensor id = random_tensor({n, ci}, g);
    Tensor keys = random_tensor({t, cv}, g);
    Tensor vvals = random_tensor({t, cv}, g);
    Tensor ivals = random_tensor({t, ci}, g);

    std::vector<int> perm(t);
    for (int i = 0; i < t; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), g);
    auto permute = [&](const Tensor& m) {
        Tensor out({t, m.cols()});
        for (int i = 0; i < t; ++i)
            for (int c = 0; c < m.cols(); ++c) out.at2(i, c) = m.at2(perm[i], c);
        return out;
    };
    auto [v1, i1] = gpm_layer(vis, id, keys, vvals, ivals, p);
    auto [v2, i2] = gpm_layer(vis, id, permute(keys), permute(vvals), permute(ivals), p);
    for (size_t i = 0; i < v1.size(); ++i)
        CHECK(std::abs(v1[i] - v2[i]) < 1e-12);
    for (size_t i = 0; i < i1.size(); ++i)
        CHECK(std::abs(i1[i] - i2[i]) < 1e-12);
}

TEST_CASE("encoder shapes follow the scale arithmetic") {
    TrackerConfig cfg = small_config();
    GpmParams params = make_params(cfg);
    FeaturePyramid pyr = encode_frame(constant_frame(32, 32, 0.3), params, cfg);
    CHECK(pyr.w16 == 2);
    CHECK(pyr.h16 == 2);
    CHECK(pyr.w8 == 4);
    CHECK(pyr.h8 == 4);
    CHECK(pyr.w4 == 8);
    CHECK(pyr.h4 == 8);

    FeaturePyramid odd = encode_frame(constant_frame(33, 17, 0.3), params, cfg);
    CHECK(odd.w16 == 3);
    CHECK(odd.h16 == 2);
    CHECK(odd.w4 == 9);
    CHECK(odd.h4 == 5);

    CHECK_THROWS_AS(encode_frame(constant_frame(8, 8, 0.0), params, cfg),
                    std::invalid_argument);
}

TEST_CASE("encoder is deterministic and spatially constant on interior patches") {
    TrackerConfig cfg = small_config();
    GpmParams params = make_params(cfg);
    Image zero = constant_frame(32, 32, 0.0);
    FeaturePyramid a = encode_frame(zero, params, cfg);
    FeaturePyramid b = encode_frame(zero, params, cfg);
    CHECK(a.s16 == b.s16);
    CHECK(a.s8 == b.s8);
    CHECK(a.s4 == b.s4);
    // constant-zero input: every location equals tanh(bias)
    for (int loc = 0; loc < 4; ++loc)
        for (int c = 0; c < cfg.c_vis; ++c)
            CHECK(a.s16[static_cast<size_t>(loc) * cfg.c_vis + c] ==
                  Catch::Approx(std::tanh(params.enc16.bias.at2(0, c))));
    CHECK(a.s16.all_finite());
}

TEST_CASE("identity embedding carries the bank vectors per pixel") {
    IdentityBank bank(2, 4, 9);
    LabelMap l(3, 2);
    Tensor bg = embed_identities(l, bank);
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 4; ++c) CHECK(bg.at2(r, c) == bank.vec(0)[c]);

    l.set(1, 0, 2);
    Tensor t = embed_identities(l, bank);
    for (int c = 0; c < 4; ++c) CHECK(t.at2(1, c) == bank.vec(2)[c]);
    for (int c = 0; c < 4; ++c) CHECK(t.at2(0, c) == bank.vec(0)[c]);

    l.set(0, 0, 3);
    CHECK_THROWS_AS(embed_identities(l, bank), std::invalid_argument);
}

TEST_CASE("identity embedding is symmetric under joint id/bank permutation") {
    IdentityBank bank(2, 4, 11);
    IdentityBank swapped = bank;
    std::swap(swapped.vec_mut(1), swapped.vec_mut(2));
    LabelMap l(4, 4);
    l.set(0, 0, 1);
    l.set(3, 3, 2);
    LabelMap lswap(4, 4);
    lswap.set(0, 0, 2);
    lswap.set(3, 3, 1);
    CHECK(embed_identities(l, bank) == embed_identities(lswap, swapped));
}

TEST_CASE("cascade applies exactly the configured number of layers") {
    TrackerConfig cfg = small_config();
    GpmParams params = make_params(cfg);
    Image frame = constant_frame(48, 32, 0.4);
    LabelMap annotation(48, 32);
    annotation.set(10, 10, 1);
    TrackerState state(cfg, params, 1, frame, annotation);
    state.step(frame);
    CHECK(state.stats().calls_16 == 3);
    CHECK(state.stats().calls_8 == 1);
    CHECK(state.stats().calls_4 == 0);
    state.step(frame);
    CHECK(state.stats().calls_16 == 6);
    CHECK(state.stats().calls_8 == 2);
}

TEST_CASE("zero layer counts degenerate to projection and upsampling") {
    TrackerConfig cfg = small_config();
    cfg.gpm_layers_16 = 0;
    cfg.gpm_layers_8 = 0;
    GpmParams params = make_params(cfg);
    FeaturePyramid enc = encode_frame(constant_frame(32, 32, 0.2), params, cfg);

    MemoryView mem;
    mem.frame_indices = {0};
    mem.s16.keys = Tensor({4, cfg.c_vis});
    mem.s16.vis_values = Tensor({4, cfg.c_vis});
    mem.s16.id_values = Tensor({4, cfg.c_id});
    mem.s8 = mem.s16;

    GpmStats stats;
    FeaturePyramid prop = propagate(enc, mem, params, cfg, &stats);
    CHECK(stats.calls_16 == 0);
    CHECK(stats.calls_8 == 0);
    // identity channels stay zero with no propagation layers
    int cc = cfg.c_vis + cfg.c_id;
    for (int loc = 0; loc < prop.w4 * prop.h4; ++loc)
        for (int c = cfg.c_vis; c < cc; ++c)
            CHECK(prop.s4[static_cast<size_t>(loc) * cc + c] == 0.0);
    // scale-4 spatial dims are 4x the scale-16 dims (up to ceiling)
    CHECK(prop.w4 == scale_dim(32, 4));
    CHECK(prop.h4 == scale_dim(32, 4));
}

TEST_CASE("propagate requires a non-empty memory") {
    TrackerConfig cfg = small_config();
    GpmParams params = make_params(cfg);
    FeaturePyramid enc = encode_frame(constant_frame(32, 32, 0.2), params, cfg);
    MemoryView mem;
    CHECK_THROWS_AS(propagate(enc, mem, params, cfg), std::invalid_argument);
}

TEST_CASE("argmax labeling matches an exhaustive oracle with ties to higher index") {
    std::mt19937_64 g(15);
    int w = 4, h = 4, channels = 3;
    Tensor logits({channels, h, w});
    for (size_t i = 0; i < logits.size(); ++i)
        logits[i] = static_cast<double>(g() % 5);  // coarse values force ties
    LabelMap labels = argmax_labels(logits, channels, w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int best = 0;
            double best_v = -1e300;
            for (int c = 0; c < channels; ++c) {
                double v = logits[(static_cast<size_t>(c) * h + y) * w + x];
                if (v > best_v || (v == best_v && c > best)) {
                    best_v = v;
                    best = c;
                }
            }
            CHECK(labels.at(x, y) == best);
        }
}

TEST_CASE("equal logits everywhere label everything with the last channel") {
    Tensor logits({3, 2, 2});
    LabelMap labels = argmax_labels(logits, 3, 2, 2);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x) CHECK(labels.at(x, y) == 2);
}

TEST_CASE("frame zero output equals the annotation") {
    LabelMap annotation(32, 32);
    for (int y = 4; y < 12; ++y)
        for (int x = 4; x < 12; ++x) annotation.set(x, y, 1);
    FrameResult r = TrackerState::initial_result(annotation, 2);
    CHECK(r.labels == annotation);
    CHECK(r.masks[0].count() == 64);
    CHECK(r.masks[1].empty());
}

TEST_CASE("two identical runs with equal seeds are bit-identical") {
    TrackerConfig cfg = small_config(17);
    std::mt19937_64 g(55);
    Image frame(32, 32);
    for (double& p : frame.pixels) p = rng_uniform(g);
    LabelMap annotation(32, 32);
    for (int y = 8; y < 16; ++y)
        for (int x = 8; x < 16; ++x) annotation.set(x, y, 1);

    auto run = [&]() {
        TrackerState state(cfg, make_params(cfg), 1, frame, annotation);
        std::vector<LabelMap> outs;
        for (int t = 0; t < 3; ++t) outs.push_back(state.step(frame).labels);
        return outs;
    };
    auto a = run();
    auto b = run();
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("all outputs are finite") {
    TrackerConfig cfg = small_config(23);
    std::mt19937_64 g(66);
    Image frame(32, 32);
    for (double& p : frame.pixels) p = rng_uniform(g);
    LabelMap annotation(32, 32);
    annotation.set(5, 5, 1);
    TrackerState state(cfg, make_params(cfg), 1, frame, annotation);
    FrameResult r = state.step(frame);
    for (double c : r.confidences) CHECK(std::isfinite(c));
    CHECK(r.labels.max_label() <= 1);
}
