#pragma once

// End-to-end drivers: the track loop (real propagation or scripted oracle
// mode), evaluation of prediction directories against ground truth, and the
// ablation sweeps over the memory gap and the selection threshold.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "trackforge/io.hpp"
#include "trackforge/metrics.hpp"
#include "trackforge/refiner.hpp"
#include "trackforge/tracker.hpp"

namespace trackforge {

struct OracleNoise {
    int erosion = 0;
    double miss_p = 0.0;
    uint64_t seed = 0;
};

struct TrackOptions {
    TrackerConfig config;
    bool use_refiner = false;
    RefinerKind refiner;
    bool refine_all = false;
    bool oracle = false;  // scripted predictor; reads gt, watermarked in report
    OracleNoise noise;
    std::optional<fs::path> weights_path;
};

inline int thread_cap() {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("TRACKFORGE_THREADS")) {
        int v = std::atoi(env);
        if (v >= 1) return std::min<int>(v, static_cast<int>(hw) * 4);
    }
    return static_cast<int>(hw);
}

template <typename Fn>
void parallel_for(int n, Fn fn) {
    int threads = std::min(thread_cap(), n);
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    for (auto& th : pool) th.join();
}

namespace detail {

// Chebyshev erosion: a pixel survives iff every pixel within radius r is set.
inline Bitmask erode(const Bitmask& m, int radius) {
    if (radius <= 0) return m;
    Bitmask out(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) {
            if (!m.at(x, y)) continue;
            bool keep = true;
            for (int dy = -radius; dy <= radius && keep; ++dy)
                for (int dx = -radius; dx <= radius && keep; ++dx) {
                    int nx = x + dx, ny = y + dy;
                    if (nx < 0 || nx >= m.width() || ny < 0 || ny >= m.height() ||
                        !m.at(nx, ny))
                        keep = false;
                }
            if (keep) out.set(x, y);
        }
    return out;
}

inline void write_masks_atomic(const fs::path& path, const std::vector<Bitmask>& masks) {
    fs::path tmp = path;
    tmp += ".tmp";
    write_masks_rle(tmp, masks);
    fs::rename(tmp, path);
}

}  // namespace detail

// Scripted stand-in for a trained propagation network: ground truth corrupted
// by seeded erosion and misses on every frame.
inline std::vector<Bitmask> oracle_mode_predict(const std::vector<Bitmask>& gt_masks,
                                                int frame_index,
                                                const OracleNoise& noise) {
    std::vector<Bitmask> out;
    for (size_t i = 0; i < gt_masks.size(); ++i) {
        std::mt19937_64 g(derive_seed(noise.seed,
                                      "oracle." + std::to_string(frame_index) + "." +
                                          std::to_string(i)));
        if (rng_uniform(g) < noise.miss_p) {
            out.push_back(Bitmask(gt_masks[i].width(), gt_masks[i].height()));
        } else {
            out.push_back(detail::erode(gt_masks[i], noise.erosion));
        }
    }
    return out;
}

inline nlohmann::json decision_to_json(const SelectionDecision& d) {
    return {{"object", d.object_id},
            {"iou_vmos_refined", d.iou_vmos_refined},
            {"chosen", d.chose_refined ? "refined" : "vmos"}};
}

// Runs the pipeline over a sequence directory and writes per-frame RLE
// predictions plus a JSON run report. Ground truth beyond frame 0 is read
// only in oracle mode or for the oracle_snap refiner, and the report says so.
inline nlohmann::json track_sequence(const fs::path& seq_dir, const fs::path& out_dir,
                                     const TrackOptions& opts) {
    auto t_start = std::chrono::steady_clock::now();
    opts.config.validate();
    SequenceMeta meta = read_meta(seq_dir);
    int m = meta.object_count;
    bool refiner_needs_gt =
        opts.use_refiner && opts.refiner.type == RefinerKind::Type::oracle_snap;
    if (refiner_needs_gt && !opts.oracle)
        throw std::invalid_argument(
            "track: oracle_snap refiner requires --oracle (reads ground truth)");

    fs::create_directories(out_dir);
    std::optional<TrackerState> state;
    if (!opts.oracle) {
        GpmParams params = opts.weights_path
                               ? load_params(*opts.weights_path, opts.config)
                               : make_params(opts.config);
        Image frame0 = read_frame(seq_dir, 0);
        LabelMap annotation = merge(read_gt(seq_dir, 0, m));
        state.emplace(opts.config, std::move(params), m, frame0, annotation);
    }

    nlohmann::json frames_report = nlohmann::json::array();
    long long stores_total = 0;
    for (int t = 0; t < meta.frame_count; ++t) {
        FrameResult fr(meta.width, meta.height);
        if (opts.oracle) {
            std::vector<Bitmask> gt = read_gt(seq_dir, t, m);
            fr.masks = oracle_mode_predict(gt, t, opts.noise);
            fr.labels = merge(fr.masks);
            fr.confidences.assign(m, 0.0);
            if (t >= 1 && should_store(t, opts.config.memory_gap)) ++stores_total;
        } else if (t == 0) {
            LabelMap annotation = merge(read_gt(seq_dir, 0, m));
            fr = TrackerState::initial_result(annotation, m);
        } else {
            fr = state->step(read_frame(seq_dir, t));
        }

        nlohmann::json frame_j;
        frame_j["frame"] = t;
        if (t >= 1 && (opts.use_refiner || opts.refine_all)) {
            Image image = read_frame(seq_dir, t);
            std::optional<LabelMap> gt_labels;
            if (refiner_needs_gt) gt_labels = merge(read_gt(seq_dir, t, m));
            auto [refined, decisions] =
                refine_frame(fr, opts.refiner, opts.config.tau, image, gt_labels,
                             opts.refine_all);
            fr = refined;
            frame_j["decisions"] = nlohmann::json::array();
            for (const auto& d : decisions)
                frame_j["decisions"].push_back(decision_to_json(d));
        }
        detail::write_masks_atomic(out_dir / frame_name(t, ".rle"), fr.masks);
        frames_report.push_back(frame_j);
    }
    write_meta(out_dir, meta);

    nlohmann::json report;
    report["config"] = {{"memory_gap", opts.config.memory_gap},
                        {"memory_capacity", opts.config.memory_capacity},
                        {"tau", opts.config.tau},
                        {"gpm_layers_16", opts.config.gpm_layers_16},
                        {"gpm_layers_8", opts.config.gpm_layers_8},
                        {"c_vis", opts.config.c_vis},
                        {"c_id", opts.config.c_id},
                        {"seed", opts.config.seed}};
    report["oracle"] = opts.oracle;
    if (opts.oracle)
        report["oracle_noise"] = {{"erosion", opts.noise.erosion},
                                  {"miss_p", opts.noise.miss_p},
                                  {"seed", opts.noise.seed}};
    report["refine_all"] = opts.refine_all;
    report["memory_stores"] =
        opts.oracle ? stores_total : (state ? state->stores_total() : 0);
    if (state)
        report["long_term_final"] =
            static_cast<long long>(state->memory().long_term().size());
    else
        report["long_term_final"] =
            std::min<long long>(opts.config.memory_capacity, stores_total);
    report["frames"] = frames_report;
    auto t_end = std::chrono::steady_clock::now();
    report["wall_time_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(t_end - t_start).count();
    return report;
}

// Per-object outcomes from prediction and ground-truth mask directories.
inline std::vector<std::vector<FrameOutcome>> collect_outcomes(
    const fs::path& pred_dir, const fs::path& gt_dir, int frame_count,
    int object_count) {
    std::vector<std::vector<FrameOutcome>> outcomes(object_count);
    for (int t = 0; t < frame_count; ++t) {
        auto pred = read_masks_rle(pred_dir / frame_name(t, ".rle"));
        auto gt = read_masks_rle(gt_dir / frame_name(t, ".rle"));
        if (static_cast<int>(pred.size()) != object_count ||
            static_cast<int>(gt.size()) != object_count)
            throw std::runtime_error("eval: object count mismatch at frame " +
                                     std::to_string(t));
        for (int i = 0; i < object_count; ++i) {
            FrameOutcome o;
            o.gt_visible = !gt[i].empty();
            o.predicted = !pred[i].empty();
            o.overlap = (o.gt_visible && o.predicted) ? iou(pred[i], gt[i]) : 0.0;
            outcomes[i].push_back(o);
        }
    }
    return outcomes;
}

inline nlohmann::json metrics_to_json(const ObjectMetrics& m) {
    return {{"auc", m.auc},         {"accuracy", m.accuracy},
            {"robustness", m.robustness}, {"nre", m.nre},
            {"dre", m.dre},         {"adq", m.adq},
            {"quality", m.quality}};
}

// Evaluates predictions against ground truth. When a run report is supplied,
// its per-frame decisions annotate the score trace with the chosen source.
inline nlohmann::json eval_dirs(const fs::path& pred_dir, const fs::path& gt_dir,
                                const std::optional<nlohmann::json>& run_report =
                                    std::nullopt) {
    SequenceMeta meta = read_meta(pred_dir);
    auto outcomes = collect_outcomes(pred_dir, gt_dir, meta.frame_count,
                                     meta.object_count);
    SequenceMetrics sm = sequence_metrics(outcomes);

    std::vector<std::vector<std::string>> chosen(
        meta.frame_count, std::vector<std::string>(meta.object_count, "vmos"));
    if (run_report && run_report->contains("frames"))
        for (const auto& fj : (*run_report)["frames"])
            if (fj.contains("decisions"))
                for (const auto& dj : fj["decisions"]) {
                    int t = fj["frame"].get<int>();
                    int obj = dj["object"].get<int>();
                    chosen[t][obj - 1] = dj["chosen"].get<std::string>();
                }

    nlohmann::json report;
    report["overall"] = metrics_to_json(sm.overall);
    report["per_object"] = nlohmann::json::array();
    for (const auto& om : sm.per_object)
        report["per_object"].push_back(metrics_to_json(om));
    report["trace"] = nlohmann::json::array();
    for (int t = 0; t < meta.frame_count; ++t)
        for (int i = 0; i < meta.object_count; ++i)
            report["trace"].push_back({{"frame", t},
                                       {"object", i + 1},
                                       {"score", sm.per_object[i].scores[t]},
                                       {"chosen_source", chosen[t][i]}});
    return report;
}

inline std::string trace_to_csv(const nlohmann::json& eval_report) {
    std::ostringstream os;
    os << "frame,object,score,chosen_source\n";
    for (const auto& row : eval_report.at("trace"))
        os << row.at("frame").get<int>() << ',' << row.at("object").get<int>() << ','
           << row.at("score").get<double>() << ','
           << row.at("chosen_source").get<std::string>() << "\n";
    return os.str();
}

// CSV column order pinned for side-by-side reading: AUC, A, R, NRE, DRE, ADQ.
inline std::string metrics_csv_row(const nlohmann::json& overall) {
    std::ostringstream os;
    os << overall.at("auc").get<double>() << ',' << overall.at("accuracy").get<double>()
       << ',' << overall.at("robustness").get<double>() << ','
       << overall.at("nre").get<double>() << ',' << overall.at("dre").get<double>()
       << ',' << overall.at("adq").get<double>();
    return os.str();
}

inline std::string ablate_gap(const fs::path& seq_dir, const TrackOptions& base,
                              const std::vector<int>& gaps,
                              const fs::path& work_dir) {
    std::vector<std::string> rows(gaps.size());
    parallel_for(static_cast<int>(gaps.size()), [&](int i) {
        TrackOptions opts = base;
        opts.config.memory_gap = gaps[i];
        fs::path out = work_dir / ("gap_" + std::to_string(gaps[i]));
        nlohmann::json run = track_sequence(seq_dir, out, opts);
        nlohmann::json ev = eval_dirs(out, seq_dir / "gt", run);
        std::ostringstream os;
        os << gaps[i] << ',' << metrics_csv_row(ev["overall"]) << ','
           << run["memory_stores"].get<long long>();
        rows[i] = os.str();
    });
    std::string csv = "gap,AUC,A,R,NRE,DRE,ADQ,memory_stores\n";
    for (const auto& r : rows) csv += r + "\n";
    return csv;
}

inline std::string ablate_tau(const fs::path& seq_dir, const TrackOptions& base,
                              const std::vector<double>& taus, bool with_refine_all,
                              const fs::path& work_dir) {
    int n = static_cast<int>(taus.size()) + (with_refine_all ? 1 : 0);
    std::vector<std::string> rows(n);
    parallel_for(n, [&](int i) {
        TrackOptions opts = base;
        std::string label;
        fs::path out;
        if (i < static_cast<int>(taus.size())) {
            opts.config.tau = taus[i];
            label = std::to_string(taus[i]);
            out = work_dir / ("tau_" + std::to_string(i));
        } else {
            opts.refine_all = true;
            label = "refine-all";
            out = work_dir / "refine_all";
        }
        nlohmann::json run = track_sequence(seq_dir, out, opts);
        nlohmann::json ev = eval_dirs(out, seq_dir / "gt", run);
        rows[i] = label + "," + metrics_csv_row(ev["overall"]);
    });
    std::string csv = "tau,AUC,A,R,NRE,DRE,ADQ\n";
    for (const auto& r : rows) csv += r + "\n";
    return csv;
}

}  // namespace trackforge
