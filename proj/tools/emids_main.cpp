#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "emids/config.hpp"
#include "emids/distinguishers.hpp"
#include "emids/emtr_io.hpp"
#include "emids/evaluation.hpp"
#include "emids/ids.hpp"
#include "emids/model_io.hpp"
#include "emids/pipeline.hpp"
#include "emids/preprocess.hpp"
#include "emids/simulator.hpp"
#include "emids/svg_plot.hpp"
#include "emids/templates.hpp"
#include "emids/trace.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace emids;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitAlarm = 3;
constexpr int kExitIo = 4;

void write_text_file(const std::string& path, const std::string& text) {
    auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<ProgramSpec> specs_from(const std::vector<std::string>& names) {
    if (names.empty()) throw std::invalid_argument("at least one program is required");
    std::vector<ProgramSpec> specs;
    specs.reserve(names.size());
    for (const auto& n : names) specs.push_back(make_program(program_from_string(n)));
    return specs;
}

json label_json(const TraceLabel& l) {
    json j;
    j["program"] = to_string(l.program);
    if (l.input != kUnknownInput) j["input"] = static_cast<int>(l.input);
    if (l.path != PathId::Unknown) j["path"] = to_string(l.path);
    if (l.discarded) j["discarded"] = true;
    return j;
}

struct CliState {
    int rc = kExitOk;
};

// ---- simulate ----

struct SimulateArgs {
    std::string config;
    std::optional<uint64_t> seed;
    std::vector<std::string> programs;
    std::optional<int> traces_per_input;
    std::optional<double> interrupt_probability;
    std::string out;
    std::string manifest;
};

void run_simulate(const SimulateArgs& a) {
    PipelineConfig cfg = a.config.empty() ? PipelineConfig{} : load_pipeline_config(a.config);
    if (a.seed) cfg.sim.seed = *a.seed;
    if (!a.programs.empty()) cfg.programs = a.programs;
    if (a.traces_per_input) cfg.sim.traces_per_input = *a.traces_per_input;
    if (a.interrupt_probability) cfg.sim.interrupt_probability = *a.interrupt_probability;
    std::string out_path = a.out.empty() ? cfg.paths.corpus : a.out;

    TraceSet corpus = generate_corpus(specs_from(cfg.programs), cfg.sim);
    auto parent = std::filesystem::path(out_path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    write_traceset_file(corpus, out_path);
    if (!a.manifest.empty()) write_text_file(a.manifest, manifest_json(corpus));
    std::fprintf(stderr, "simulate: wrote %zu traces to %s\n", corpus.traces.size(),
                 out_path.c_str());
}

// ---- preprocess ----

struct PreprocessArgs {
    std::string config;
    std::string in;
    std::string out;
    std::string report;
    bool keep_discarded = false;
};

void run_preprocess(const PreprocessArgs& a) {
    PipelineConfig cfg = a.config.empty() ? PipelineConfig{} : load_pipeline_config(a.config);
    std::string in_path = a.in.empty() ? cfg.paths.corpus : a.in;
    std::string out_path = a.out.empty() ? cfg.paths.aligned : a.out;

    TraceSet raw = read_traceset_file(in_path);
    AlignResult ar = align_set(raw, cfg.align);
    FilterResult fr = filter_interrupted(ar.aligned, cfg.filter, a.keep_discarded);
    auto parent = std::filesystem::path(out_path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    write_traceset_file(fr.kept, out_path);

    json rep;
    rep["input"] = raw.traces.size();
    rep["aligned"] = ar.aligned.traces.size();
    rep["no_anchor"] = ar.no_anchor;
    rep["discarded"] = fr.discarded;
    rep["output"] = fr.kept.traces.size();
    if (!a.report.empty()) write_text_file(a.report, rep.dump(2) + "\n");
    std::fprintf(stderr, "preprocess: %zu in, %zu aligned, %zu no-anchor, %zu discarded\n",
                 raw.traces.size(), ar.aligned.traces.size(), ar.no_anchor, fr.discarded);
}

// ---- train ----

struct TrainArgs {
    std::string config;
    std::string in;
    std::string model;
    std::string report;
    std::optional<std::string> grouping;
    std::optional<int> poi;
    std::optional<uint64_t> seed;
    std::optional<std::string> claimed;
    std::optional<std::string> threshold_policy;
    std::optional<double> fixed_far;
};

void run_train(const TrainArgs& a) {
    PipelineConfig cfg = a.config.empty() ? PipelineConfig{} : load_pipeline_config(a.config);
    if (a.grouping) cfg.train.grouping = grouping_from_string(*a.grouping);
    if (a.poi) cfg.train.poi_count = *a.poi;
    if (a.seed) cfg.train.seed = *a.seed;
    if (a.claimed)
        cfg.train.claimed_program =
            ClassKey{program_from_string(*a.claimed), kUnknownInput, PathId::Unknown};
    if (a.threshold_policy) {
        if (*a.threshold_policy == "eer")
            cfg.train.threshold_policy = TrainOptions::ThresholdPolicy::Eer;
        else if (*a.threshold_policy == "fixed_far")
            cfg.train.threshold_policy = TrainOptions::ThresholdPolicy::FixedFar;
        else
            throw std::invalid_argument("--threshold-policy must be eer or fixed_far");
    }
    if (a.fixed_far) cfg.train.fixed_far = *a.fixed_far;
    std::string in_path = a.in.empty() ? cfg.paths.corpus : a.in;
    std::string model_path = a.model.empty() ? cfg.paths.model : a.model;

    TraceSet corpus = read_traceset_file(in_path);
    TrainResult tr = train_pipeline(corpus, cfg.align, cfg.filter, cfg.train);
    auto parent = std::filesystem::path(model_path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    write_model_file(tr.model, model_path);

    json rep;
    rep["input"] = tr.report.input_traces;
    rep["no_anchor"] = tr.report.no_anchor;
    rep["discarded"] = tr.report.discarded;
    rep["discard_fraction"] = tr.report.discard_fraction;
    rep["fit_traces"] = tr.report.fit_traces;
    rep["validation_traces"] = tr.report.validation_traces;
    rep["validation_eer"] = tr.report.validation_eer;
    rep["threshold"] = tr.report.threshold;
    rep["threshold_from_impostors"] = tr.report.threshold_from_impostors;
    rep["baseline_runtime"] = tr.report.baseline_runtime;
    rep["runtime_tolerance"] = tr.report.runtime_tolerance;
    if (!a.report.empty()) write_text_file(a.report, rep.dump(2) + "\n");
    std::fprintf(stderr, "train: model written to %s (threshold %.6g, validation EER %.4f)\n",
                 model_path.c_str(), tr.report.threshold, tr.report.validation_eer);
}

// ---- score ----

struct ScoreArgs {
    std::string config;
    std::string model;
    std::string in;
    std::string out;
    std::optional<std::string> claimed;
    std::string metric = "sad";
    bool aligned = false;
};

void run_score(const ScoreArgs& a) {
    PipelineConfig cfg = a.config.empty() ? PipelineConfig{} : load_pipeline_config(a.config);
    std::string model_path = a.model.empty() ? cfg.paths.model : a.model;
    std::string in_path = a.in.empty() ? cfg.paths.aligned : a.in;
    std::string out_path = a.out.empty() ? cfg.paths.scores : a.out;

    ModelFile mf = read_model_file(model_path);
    TraceSet input = read_traceset_file(in_path);

    std::optional<ClassKey> claimed;
    if (a.claimed)
        claimed = ClassKey{program_from_string(*a.claimed), kUnknownInput, PathId::Unknown};
    else if (mf.profile)
        claimed = mf.profile->claimed_program;

    // raw captures run through the profile's alignment chain first
    TraceSet working = input;
    size_t align_failed = 0;
    if (!a.aligned) {
        AlignmentConfig ac = mf.profile ? mf.profile->align : cfg.align;
        AlignResult ar = align_set(input, ac);
        align_failed = ar.no_anchor;
        working = std::move(ar.aligned);
    }

    json rows = json::array();
    ScoreSet set;
    if (mf.payload_kind == 2) {
        if (!claimed)
            throw std::invalid_argument(
                "model carries no IDS profile; pass --claimed to pick the genuine class");
        const TemplateModel& model = mf.multivariate;
        for (size_t i = 0; i < working.traces.size(); ++i) {
            const Trace& t = working.traces[i];
            double s = genuine_score(t, model, *claimed);
            Classification c = classify_ml(t, model);
            json row;
            row["index"] = i;
            row["label"] = label_json(t.label);
            row["score"] = s;
            row["predicted"] = to_string(c.key);
            rows.push_back(row);
            if (t.label.program == ProgramId::Unknown) continue;
            (t.label.program == claimed->program ? set.genuine : set.impostor).push_back(s);
        }
    } else {
        SimpleMetric metric;
        if (a.metric == "sad")
            metric = SimpleMetric::SAD;
        else if (a.metric == "xcorr")
            metric = SimpleMetric::XCORR;
        else
            throw std::invalid_argument("--metric must be sad or xcorr");
        if (!claimed)
            throw std::invalid_argument("pass --claimed to pick the genuine class");
        const SimpleTemplate* tpl = nullptr;
        for (const auto& t : mf.simple)
            if (t.class_key.program == claimed->program) tpl = &t;
        if (!tpl)
            throw std::invalid_argument("claimed class " + to_string(*claimed) +
                                        " has no template in the model");
        for (size_t i = 0; i < working.traces.size(); ++i) {
            const Trace& t = working.traces[i];
            double s = metric == SimpleMetric::SAD ? -sad_score(t, *tpl) : xcorr_score(t, *tpl);
            ClassKey pred = classify_simple(t, mf.simple, metric);
            json row;
            row["index"] = i;
            row["label"] = label_json(t.label);
            row["score"] = s;
            row["predicted"] = to_string(pred);
            rows.push_back(row);
            if (t.label.program == ProgramId::Unknown) continue;
            (t.label.program == claimed->program ? set.genuine : set.impostor).push_back(s);
        }
    }

    json out;
    out["claimed"] = claimed ? to_string(*claimed) : "unknown";
    out["higher_is_genuine"] = true;
    out["align_failed"] = align_failed;
    out["genuine"] = set.genuine;
    out["impostor"] = set.impostor;
    out["traces"] = rows;
    write_text_file(out_path, out.dump(2) + "\n");
    std::fprintf(stderr, "score: %zu traces scored (%zu genuine, %zu impostor) -> %s\n",
                 working.traces.size(), set.genuine.size(), set.impostor.size(),
                 out_path.c_str());
}

// ---- evaluate ----

struct EvaluateArgs {
    std::string config;
    std::string scores;
    std::string out;
    std::string plot_dir;
};

std::vector<std::pair<double, double>> to_xy(const std::vector<RocPoint>& pts) {
    std::vector<std::pair<double, double>> out;
    for (const auto& p : pts) out.emplace_back(p.far, p.gar);
    return out;
}

void run_evaluate(const EvaluateArgs& a) {
    PipelineConfig cfg = a.config.empty() ? PipelineConfig{} : load_pipeline_config(a.config);
    std::string scores_path = a.scores.empty() ? cfg.paths.scores : a.scores;
    std::string out_path = a.out.empty() ? cfg.paths.report : a.out;

    json j;
    try {
        j = json::parse(read_text_file(scores_path));
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("scores file is not valid JSON: ") + e.what());
    }
    ScoreSet s;
    try {
        j.at("genuine").get_to(s.genuine);
        j.at("impostor").get_to(s.impostor);
        s.higher_is_genuine = j.value("higher_is_genuine", true);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("scores file is missing fields: ") + e.what());
    }

    EvalReport report = evaluate_scores(s);
    write_text_file(out_path, to_json(report));
    if (!a.plot_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(a.plot_dir);
        LinePlot roc;
        roc.title = "ROC";
        roc.x_label = "false accept rate";
        roc.y_label = "genuine accept rate";
        roc.series.push_back({"scores", to_xy(report.roc), "#1f77b4", false});
        write_svg_file(roc, (fs::path(a.plot_dir) / "roc.svg").string());

        LinePlot ff;
        ff.title = "FAR / FRR vs threshold";
        ff.x_label = "threshold";
        ff.y_label = "rate";
        std::vector<std::pair<double, double>> far_pts, frr_pts;
        for (const auto& p : report.far_frr) {
            far_pts.emplace_back(p.threshold, p.far);
            frr_pts.emplace_back(p.threshold, p.frr);
        }
        ff.series.push_back({"FAR", far_pts, "#d62728", false});
        ff.series.push_back({"FRR", frr_pts, "#1f77b4", true});
        write_svg_file(ff, (fs::path(a.plot_dir) / "far_frr.svg").string());

        LinePlot dens;
        dens.title = "Score densities";
        dens.x_label = "score";
        dens.y_label = "density";
        std::vector<std::pair<double, double>> gp, ip;
        for (const auto& p : report.kde_genuine.points) gp.emplace_back(p.x, p.density);
        for (const auto& p : report.kde_impostor.points) ip.emplace_back(p.x, p.density);
        dens.series.push_back({"genuine", gp, "#1f77b4", false});
        dens.series.push_back({"impostor", ip, "#d62728", false});
        write_svg_file(dens, (fs::path(a.plot_dir) / "densities.svg").string());
    }
    std::fprintf(stderr, "evaluate: EER %.4f, AUC %.4f -> %s\n", report.eer, report.auc,
                 out_path.c_str());
}

// ---- monitor ----

struct MonitorArgs {
    std::string config;
    std::string profile;
    std::string in;
    std::string verdicts;
    std::optional<size_t> k;
    bool fail_on_alarm = false;
};

void run_monitor(const MonitorArgs& a, CliState& state) {
    PipelineConfig cfg = a.config.empty() ? PipelineConfig{} : load_pipeline_config(a.config);
    std::string model_path = a.profile.empty() ? cfg.paths.model : a.profile;
    std::string in_path = a.in.empty() ? cfg.paths.corpus : a.in;
    size_t k = a.k ? *a.k : cfg.monitor.k;
    bool fail_on_alarm = a.fail_on_alarm || cfg.monitor.fail_on_alarm;

    ModelFile mf = read_model_file(model_path);
    IdsProfile profile = ids_profile_of(mf);
    PreprocessConfigs pc = preprocess_configs_of(mf);
    TraceSet capture = read_traceset_file(in_path);
    if (capture.sample_rate_hz != mf.trained_on.sample_rate_hz) {
        throw std::invalid_argument(
            "capture sample rate does not match the profile's training rate; refusing to score");
    }

    SpotCheckSummary summary = spot_check(capture, profile, pc, k);

    json out;
    out["n"] = summary.n;
    out["k"] = summary.k;
    out["alarm"] = summary.alarm;
    json counts;
    for (const auto& [outcome, count] : summary.counts) counts[to_string(outcome)] = count;
    out["counts"] = counts;
    json rows = json::array();
    for (size_t i = 0; i < capture.traces.size(); ++i) {
        Verdict v = check_trace(capture.traces[i], profile, pc);
        json row;
        row["index"] = i;
        row["outcome"] = to_string(v.outcome);
        row["layer1_runtime"] = v.layer1_runtime;
        if (v.layer2_score) row["layer2_score"] = *v.layer2_score;
        if (v.threshold_used) row["threshold"] = *v.threshold_used;
        rows.push_back(row);
    }
    out["verdicts"] = rows;
    std::string verdicts_path = a.verdicts.empty() ? cfg.paths.verdicts : a.verdicts;
    if (!verdicts_path.empty()) write_text_file(verdicts_path, out.dump(2) + "\n");

    std::fprintf(stderr, "monitor: n=%zu k=%zu alarm=%s\n", summary.n, summary.k,
                 summary.alarm ? "yes" : "no");
    for (const auto& [outcome, count] : summary.counts)
        std::fprintf(stderr, "  %-16s %zu\n", to_string(outcome).c_str(), count);
    if (summary.alarm && fail_on_alarm) state.rc = kExitAlarm;
}

// ---- reproduce ----

struct ReproduceArgs {
    std::string config;
    std::optional<uint64_t> seed;
    std::optional<int> traces_per_input;
    std::string out_dir;
};

void run_reproduce_cmd(const ReproduceArgs& a, CliState& state) {
    PipelineConfig cfg = a.config.empty() ? PipelineConfig{} : load_pipeline_config(a.config);
    if (a.seed) {
        cfg.sim.seed = *a.seed;
        cfg.train.seed = *a.seed;
    }
    if (a.traces_per_input) cfg.sim.traces_per_input = *a.traces_per_input;

    ReproduceOptions opts;
    opts.sim = cfg.sim;
    opts.align = cfg.align;
    opts.filter = cfg.filter;
    opts.train = cfg.train;
    opts.out_dir = a.out_dir.empty() ? cfg.paths.out_dir : a.out_dir;

    ReproduceResult res = run_reproduce(opts);
    std::fputs(res.summary_json.c_str(), stdout);
    if (!res.failures.empty()) {
        for (const auto& f : res.failures) std::fprintf(stderr, "FAILED: %s\n", f.c_str());
        state.rc = kExitAlarm;
    } else {
        std::fprintf(stderr, "reproduce: all orderings hold; artifacts in %s\n",
                     opts.out_dir.c_str());
    }
}

// ---- config ----

struct ConfigArgs {
    std::string out;
};

void run_config(const ConfigArgs& a) {
    PipelineConfig cfg;
    std::string text = dump_pipeline_config(cfg);
    if (a.out.empty())
        std::fputs(text.c_str(), stdout);
    else
        write_text_file(a.out, text);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"EM side-channel intrusion detection toolkit for PLC user programs"};
    app.require_subcommand(1);
    CliState state;

    SimulateArgs sim_args;
    auto* sim = app.add_subcommand("simulate", "Generate a synthetic trace corpus");
    sim->add_option("--config", sim_args.config, "pipeline config JSON");
    sim->add_option("--seed", sim_args.seed, "override RNG seed");
    sim->add_option("--programs", sim_args.programs, "programs to simulate (PrA,PrB,PrC)")
        ->delimiter(',');
    sim->add_option("--traces-per-input", sim_args.traces_per_input, "traces per input value");
    sim->add_option("--interrupt-probability", sim_args.interrupt_probability,
                    "per-trace interrupt probability");
    sim->add_option("--out", sim_args.out, "output EMTR path");
    sim->add_option("--manifest", sim_args.manifest, "write corpus manifest JSON here");
    sim->callback([&] { run_simulate(sim_args); });

    PreprocessArgs pre_args;
    auto* pre = app.add_subcommand("preprocess", "Align traces and drop interrupted captures");
    pre->add_option("--config", pre_args.config, "pipeline config JSON");
    pre->add_option("--in", pre_args.in, "input EMTR path");
    pre->add_option("--out", pre_args.out, "output EMTR path");
    pre->add_option("--report", pre_args.report, "write counts JSON here");
    pre->add_flag("--keep-discarded", pre_args.keep_discarded,
                  "keep filtered traces, flagged, instead of dropping them");
    pre->callback([&] { run_preprocess(pre_args); });

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Fit LDA + Gaussian templates and pick a threshold");
    train->add_option("--config", train_args.config, "pipeline config JSON");
    train->add_option("--in", train_args.in, "corpus EMTR path");
    train->add_option("--model", train_args.model, "output model path");
    train->add_option("--report", train_args.report, "write training report JSON here");
    train->add_option("--grouping", train_args.grouping,
                      "class grouping: per_program, per_input, per_path");
    train->add_option("--poi", train_args.poi, "LDA dimensions to keep");
    train->add_option("--seed", train_args.seed, "split seed");
    train->add_option("--claimed", train_args.claimed, "claimed genuine program");
    train->add_option("--threshold-policy", train_args.threshold_policy, "eer or fixed_far");
    train->add_option("--fixed-far", train_args.fixed_far, "FAR budget for fixed_far policy");
    train->callback([&] { run_train(train_args); });

    ScoreArgs score_args;
    auto* score = app.add_subcommand("score", "Score traces against a trained model");
    score->add_option("--config", score_args.config, "pipeline config JSON");
    score->add_option("--model", score_args.model, "model path");
    score->add_option("--in", score_args.in, "EMTR path to score");
    score->add_option("--out", score_args.out, "output scores JSON");
    score->add_option("--claimed", score_args.claimed, "claimed genuine program");
    score->add_option("--metric", score_args.metric, "sad or xcorr (simple models)");
    score->add_flag("--aligned", score_args.aligned, "input is already aligned");
    score->callback([&] { run_score(score_args); });

    EvaluateArgs eval_args;
    auto* eval = app.add_subcommand("evaluate", "Compute ROC/EER/AUC/KDE from a scores file");
    eval->add_option("--config", eval_args.config, "pipeline config JSON");
    eval->add_option("--scores", eval_args.scores, "scores JSON path");
    eval->add_option("--out", eval_args.out, "output report JSON");
    eval->add_option("--plot", eval_args.plot_dir, "directory for SVG plots");
    eval->callback([&] { run_evaluate(eval_args); });

    MonitorArgs mon_args;
    auto* mon = app.add_subcommand("monitor", "Spot-check a capture batch against a profile");
    mon->add_option("--config", mon_args.config, "pipeline config JSON");
    mon->add_option("--profile", mon_args.profile, "model file with IDS profile");
    mon->add_option("--in", mon_args.in, "capture EMTR path");
    mon->add_option("--json", mon_args.verdicts, "write verdicts JSON here");
    mon->add_option("--k", mon_args.k, "alarm when at least k anomalies (0 = default rule)");
    mon->add_flag("--fail-on-alarm", mon_args.fail_on_alarm, "exit nonzero when the batch alarms");
    mon->callback([&] { run_monitor(mon_args, state); });

    ReproduceArgs rep_args;
    auto* rep = app.add_subcommand("reproduce", "Run the full desk-scale experiment");
    rep->add_option("--config", rep_args.config, "pipeline config JSON");
    rep->add_option("--seed", rep_args.seed, "override RNG seed");
    rep->add_option("--traces-per-input", rep_args.traces_per_input, "traces per input value");
    rep->add_option("--out-dir", rep_args.out_dir, "directory for summary and plots");
    rep->callback([&] { run_reproduce_cmd(rep_args, state); });

    ConfigArgs cfg_args;
    auto* cfgcmd = app.add_subcommand("config", "Print the default pipeline config");
    cfgcmd->add_option("--out", cfg_args.out, "write the config here instead of stdout");
    cfgcmd->callback([&] { run_config(cfg_args); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const emtr_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const emmd_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    }
    return state.rc;
}
