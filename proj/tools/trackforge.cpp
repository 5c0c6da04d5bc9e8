// trackforge command line: synthetic sequence generation, tracking,
// evaluation, and the ablation sweeps.
//
// Exit codes: 0 ok, 2 input error, 3 invariant violation.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "trackforge/pipeline.hpp"

namespace tf = trackforge;
using nlohmann::json;

namespace {

tf::TrackerConfig load_config(const std::string& path) {
    tf::TrackerConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config " + path);
    json j;
    f >> j;
    cfg.memory_gap = j.value("G", cfg.memory_gap);
    cfg.memory_capacity = j.value("L", cfg.memory_capacity);
    cfg.tau = j.value("tau", cfg.tau);
    cfg.gpm_layers_16 = j.value("gpm_layers_16", cfg.gpm_layers_16);
    cfg.gpm_layers_8 = j.value("gpm_layers_8", cfg.gpm_layers_8);
    cfg.c_vis = j.value("c_vis", cfg.c_vis);
    cfg.c_id = j.value("c_id", cfg.c_id);
    cfg.seed = j.value("seed", cfg.seed);
    return cfg;
}

json load_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    json j;
    f >> j;
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << text;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::istringstream is(s);
    std::string part;
    while (std::getline(is, part, ',')) out.push_back(std::stoi(part));
    if (out.empty()) throw std::runtime_error("empty list");
    return out;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::istringstream is(s);
    std::string part;
    while (std::getline(is, part, ',')) out.push_back(std::stod(part));
    if (out.empty()) throw std::runtime_error("empty list");
    return out;
}

struct TrackCli {
    std::string seq, out_dir, config_path, refiner_flag, weights, dump_weights,
        report_path;
    double tau = -1.0;
    long long seed = -1;
    bool refine_all = false, oracle = false;
    int erosion = 0;
    double miss = 0.0;
    long long noise_seed = 0;

    tf::TrackOptions options() const {
        tf::TrackOptions opts;
        opts.config = load_config(config_path);
        if (tau >= 0.0) opts.config.tau = tau;
        if (seed >= 0) opts.config.seed = static_cast<uint64_t>(seed);
        if (!refiner_flag.empty()) {
            opts.use_refiner = true;
            opts.refiner = tf::RefinerKind::parse(refiner_flag);
        }
        opts.refine_all = refine_all;
        if (refine_all && !opts.use_refiner) {
            opts.use_refiner = true;
            opts.refiner = tf::RefinerKind::parse("identity");
        }
        opts.oracle = oracle;
        opts.noise = {erosion, miss, static_cast<uint64_t>(noise_seed)};
        if (!weights.empty()) opts.weights_path = weights;
        return opts;
    }
};

void add_track_options(CLI::App* cmd, TrackCli& t) {
    cmd->add_option("--config", t.config_path, "tracker config JSON");
    cmd->add_option("--refiner", t.refiner_flag,
                    "identity|dilate:r|noise:p:seed|oracle:hi:lo:seed");
    cmd->add_option("--tau", t.tau, "selection threshold override");
    cmd->add_option("--seed", t.seed, "seed override");
    cmd->add_flag("--refine-all", t.refine_all, "bypass the tau gate");
    cmd->add_flag("--oracle", t.oracle,
                  "scripted predictor from ground truth (watermarked in report)");
    cmd->add_option("--erosion", t.erosion, "oracle-mode boundary erosion radius");
    cmd->add_option("--miss", t.miss, "oracle-mode per-object miss probability");
    cmd->add_option("--noise-seed", t.noise_seed, "oracle-mode noise seed");
    cmd->add_option("--weights", t.weights, "TFW1 weights file to load");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale multi-object mask tracking pipeline"};
    app.require_subcommand(1);

    // synth
    std::string synth_spec, synth_out;
    auto* synth_cmd = app.add_subcommand("synth", "render a synthetic sequence");
    synth_cmd->add_option("spec", synth_spec, "scene spec JSON")->required();
    synth_cmd->add_option("out_dir", synth_out, "output sequence directory")->required();

    // track
    TrackCli track;
    auto* track_cmd = app.add_subcommand("track", "run the pipeline over a sequence");
    track_cmd->add_option("seq", track.seq, "sequence directory")->required();
    track_cmd->add_option("--out", track.out_dir, "prediction output directory");
    track_cmd->add_option("--report", track.report_path, "run report JSON path");
    track_cmd->add_option("--dump-weights", track.dump_weights,
                          "write the seeded weights to a TFW1 file");
    add_track_options(track_cmd, track);

    // eval
    std::string eval_pred, eval_gt, eval_run, eval_out, eval_csv;
    auto* eval_cmd = app.add_subcommand("eval", "score predictions against gt");
    eval_cmd->add_option("pred", eval_pred, "prediction directory")->required();
    eval_cmd->add_option("gt", eval_gt, "ground-truth mask directory")->required();
    eval_cmd->add_option("--run", eval_run, "run report JSON (adds chosen_source)");
    eval_cmd->add_option("--out", eval_out, "write report JSON here");
    eval_cmd->add_option("--csv", eval_csv, "write the score trace CSV here");

    // ablate-gap
    TrackCli gap_track;
    std::string gap_list = "10,20,30,40,50,60,70", gap_out, gap_work;
    auto* gap_cmd = app.add_subcommand("ablate-gap", "sweep the long-term memory gap");
    gap_cmd->add_option("seq", gap_track.seq, "sequence directory")->required();
    gap_cmd->add_option("--gaps", gap_list, "comma-separated gap values");
    gap_cmd->add_option("--out", gap_out, "CSV output path");
    gap_cmd->add_option("--work", gap_work, "work directory for per-gap runs");
    add_track_options(gap_cmd, gap_track);

    // ablate-tau
    TrackCli tau_track;
    std::string tau_list = "0,0.1,0.2,0.3,0.4,0.5", tau_out, tau_work;
    bool tau_with_refine_all = false;
    auto* tau_cmd = app.add_subcommand("ablate-tau", "sweep the selection threshold");
    tau_cmd->add_option("seq", tau_track.seq, "sequence directory")->required();
    tau_cmd->add_option("--taus", tau_list, "comma-separated tau values");
    tau_cmd->add_flag("--with-refine-all", tau_with_refine_all,
                      "append an ungated refine-all row");
    tau_cmd->add_option("--out", tau_out, "CSV output path");
    tau_cmd->add_option("--work", tau_work, "work directory for per-tau runs");
    add_track_options(tau_cmd, tau_track);

    // plot-data
    std::string plot_report, plot_out;
    auto* plot_cmd = app.add_subcommand("plot-data", "export a score trace CSV");
    plot_cmd->add_option("report", plot_report, "eval report JSON")->required();
    plot_cmd->add_option("out_csv", plot_out, "CSV output path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*synth_cmd) {
            tf::SceneSpec spec = tf::SceneSpec::from_json(load_json(synth_spec));
            tf::write_sequence(synth_out, spec);
            std::cout << "wrote " << spec.length << " frames to " << synth_out << "\n";
        } else if (*track_cmd) {
            tf::TrackOptions opts = track.options();
            if (!track.dump_weights.empty())
                tf::save_weights(track.dump_weights, tf::named_from_seed(opts.config));
            std::string out = track.out_dir.empty()
                                  ? (tf::fs::path(track.seq) / "pred").string()
                                  : track.out_dir;
            json report = tf::track_sequence(track.seq, out, opts);
            if (!track.report_path.empty())
                write_text(track.report_path, report.dump(2) + "\n");
            else
                std::cout << report.dump(2) << "\n";
        } else if (*eval_cmd) {
            std::optional<json> run;
            if (!eval_run.empty()) run = load_json(eval_run);
            json report = tf::eval_dirs(eval_pred, eval_gt, run);
            if (!eval_csv.empty()) write_text(eval_csv, tf::trace_to_csv(report));
            if (!eval_out.empty())
                write_text(eval_out, report.dump(2) + "\n");
            else
                std::cout << report.dump(2) << "\n";
        } else if (*gap_cmd) {
            tf::fs::path work = gap_work.empty()
                                    ? tf::fs::path(gap_track.seq) / "ablate_gap"
                                    : tf::fs::path(gap_work);
            std::string csv = tf::ablate_gap(gap_track.seq, gap_track.options(),
                                             parse_int_list(gap_list), work);
            if (!gap_out.empty())
                write_text(gap_out, csv);
            else
                std::cout << csv;
        } else if (*tau_cmd) {
            tf::fs::path work = tau_work.empty()
                                    ? tf::fs::path(tau_track.seq) / "ablate_tau"
                                    : tf::fs::path(tau_work);
            std::string csv =
                tf::ablate_tau(tau_track.seq, tau_track.options(),
                               parse_double_list(tau_list), tau_with_refine_all, work);
            if (!tau_out.empty())
                write_text(tau_out, csv);
            else
                std::cout << csv;
        } else if (*plot_cmd) {
            write_text(plot_out, tf::trace_to_csv(load_json(plot_report)));
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::logic_error& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
