#include "emids/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "emids/distinguishers.hpp"
#include "emids/rng.hpp"
#include "emids/svg_plot.hpp"

namespace emids {

namespace {

double median_of(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of empty vector");
    size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + mid - 1, v.end());
    return 0.5 * (v[mid - 1] + hi);
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double mu = mean_of(v);
    double acc = 0;
    for (double x : v) acc += (x - mu) * (x - mu);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

void check_fractions(double fit, double val) {
    if (!(fit > 0) || val < 0 || !(fit + val < 1.0 + 1e-12))
        throw std::invalid_argument("split fractions must satisfy fit > 0, validation >= 0, fit + validation <= 1");
}

} // namespace

SplitPart assign_split(uint64_t seed, size_t index, double fit_fraction,
                       double validation_fraction) {
    check_fractions(fit_fraction, validation_fraction);
    uint64_t s = mix_keys(seed, static_cast<uint64_t>(index));
    double u = static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53;
    if (u < fit_fraction) return SplitPart::Fit;
    if (u < fit_fraction + validation_fraction) return SplitPart::Validation;
    return SplitPart::Test;
}

TraceSet split_subset(const TraceSet& ts, uint64_t seed, double fit_fraction,
                      double validation_fraction, SplitPart part) {
    TraceSet out;
    out.sample_rate_hz = ts.sample_rate_hz;
    out.aligned = ts.aligned;
    for (size_t i = 0; i < ts.traces.size(); ++i) {
        if (assign_split(seed, i, fit_fraction, validation_fraction) == part)
            out.traces.push_back(ts.traces[i]);
    }
    return out;
}

TrainResult train_pipeline(const TraceSet& raw, const AlignmentConfig& align_cfg,
                           const FilterConfig& filter_cfg, const TrainOptions& opts) {
    validate(align_cfg);
    validate(filter_cfg);
    check_fractions(opts.fit_fraction, opts.validation_fraction);
    if (opts.poi_count < 1) throw std::invalid_argument("poi_count must be at least 1");
    if (raw.traces.empty()) throw std::invalid_argument("training set is empty");

    TrainReport rep;
    rep.input_traces = raw.traces.size();

    AlignResult ar = align_set(raw, align_cfg);
    rep.no_anchor = ar.no_anchor;
    FilterResult fr = filter_interrupted(ar.aligned, filter_cfg);
    rep.discarded = fr.discarded;
    rep.discard_fraction = ar.aligned.traces.empty()
                               ? 0.0
                               : static_cast<double>(fr.discarded) /
                                     static_cast<double>(ar.aligned.traces.size());

    TraceSet fit = split_subset(fr.kept, opts.seed, opts.fit_fraction,
                                opts.validation_fraction, SplitPart::Fit);
    TraceSet val = split_subset(fr.kept, opts.seed, opts.fit_fraction,
                                opts.validation_fraction, SplitPart::Validation);
    rep.fit_traces = fit.traces.size();
    rep.validation_traces = val.traces.size();

    LdaProjection proj = fit_lda(fit, opts.grouping, opts.poi_count);
    TemplateModel model = fit_templates(fit, opts.grouping, proj);
    model.trained_on.corpus_seed = opts.seed;
    model.trained_on.trace_count = static_cast<uint32_t>(fit.traces.size());
    model.trained_on.sample_rate_hz = raw.sample_rate_hz;

    const ClassKey claimed = opts.claimed_program;
    bool claimed_present = std::any_of(model.classes.begin(), model.classes.end(),
                                       [&](const TemplateClass& c) { return c.key == claimed; });
    if (!claimed_present)
        throw std::invalid_argument("claimed class " + to_string(claimed) +
                                    " is not one of the fitted classes");

    ScoreSet vs;
    for (const Trace& t : val.traces) {
        double s = genuine_score(t, model, claimed);
        if (group_key(t.label, opts.grouping) == claimed)
            vs.genuine.push_back(s);
        else
            vs.impostor.push_back(s);
    }
    if (vs.genuine.empty())
        throw std::invalid_argument("validation split holds no traces of the claimed class");

    double thr = 0;
    if (!vs.impostor.empty()) {
        rep.threshold_from_impostors = true;
        EerResult e = eer(vs);
        rep.validation_eer = e.eer;
        if (opts.threshold_policy == TrainOptions::ThresholdPolicy::Eer) {
            thr = e.threshold;
        } else {
            // descending thresholds: FAR grows along the sweep; take the last
            // point still meeting the FAR budget (max GAR subject to it)
            auto curve = far_frr_curve(vs);
            thr = curve.front().threshold;
            for (const auto& p : curve) {
                if (p.far <= opts.fixed_far)
                    thr = p.threshold;
                else
                    break;
            }
        }
    } else {
        // single-class corpus: fall back to a genuine-only spread bound
        thr = mean_of(vs.genuine) - 3.0 * sd_of(vs.genuine);
        rep.threshold_from_impostors = false;
    }
    model.threshold = thr;
    model.threshold_set = true;
    rep.threshold = thr;

    // layer-1 baseline from raw captures of the claimed program
    const int tpl_len = opts.os_template_len;
    Eigen::VectorXf pre_tpl = os_preamble_template(tpl_len);
    Eigen::VectorXf epi_tpl = os_epilogue_template(tpl_len);
    std::vector<double> runtimes;
    for (const Trace& t : raw.traces) {
        if (t.label.program != claimed.program) continue;
        if (auto r = extract_runtime(t, epi_tpl, pre_tpl, opts.min_corr, kOsGapLen))
            runtimes.push_back(static_cast<double>(*r));
    }
    if (runtimes.empty())
        throw std::invalid_argument("no runtime measurement succeeded for the claimed program");
    rep.baseline_runtime = static_cast<int>(std::llround(median_of(runtimes)));
    rep.runtime_tolerance = std::max(1, static_cast<int>(std::ceil(3.0 * sd_of(runtimes))));

    // capture-plausibility energy bounds from the fitted split
    std::vector<double> energies;
    for (const Trace& t : fit.traces)
        if (t.label.program == claimed.program) energies.push_back(trace_energy(t));
    if (energies.empty())
        throw std::invalid_argument("fit split holds no traces of the claimed program");
    double e_med = median_of(energies);
    std::vector<double> devs;
    devs.reserve(energies.size());
    for (double e : energies) devs.push_back(std::abs(e - e_med));
    double e_mad = median_of(devs);

    ModelFile mf = make_multivariate_model(std::move(model));
    ModelFile::ProfileBlock pb;
    pb.baseline_runtime = rep.baseline_runtime;
    pb.runtime_tolerance = rep.runtime_tolerance;
    pb.claimed_program = claimed;
    pb.energy_median = e_med;
    pb.energy_mad = e_mad;
    pb.energy_factor = filter_cfg.energy_deviation_factor;
    pb.align = align_cfg;
    pb.filter = filter_cfg;
    pb.min_corr = opts.min_corr;
    pb.os_gap = kOsGapLen;
    pb.os_preamble_template = pre_tpl;
    pb.os_epilogue_template = epi_tpl;
    mf.profile = pb;

    return {std::move(mf), rep};
}

ScoreSet collect_genuine_scores(const TraceSet& aligned_test, const TemplateModel& model,
                                const ClassKey& claimed) {
    ScoreSet out;
    for (const Trace& t : aligned_test.traces) {
        double s = genuine_score(t, model, claimed);
        bool is_genuine = t.label.program == claimed.program &&
                          (claimed.input == kUnknownInput || t.label.input == claimed.input) &&
                          (claimed.path == PathId::Unknown || t.label.path == claimed.path);
        (is_genuine ? out.genuine : out.impostor).push_back(s);
    }
    return out;
}

namespace {

std::vector<std::pair<double, double>> roc_points(const ScoreSet& s) {
    std::vector<std::pair<double, double>> pts;
    for (const RocPoint& p : roc_curve(s)) pts.emplace_back(p.far, p.gar);
    return pts;
}

std::vector<std::pair<double, double>> kde_points(const KdeResult& k) {
    std::vector<std::pair<double, double>> pts;
    for (const KdePoint& p : k.points) pts.emplace_back(p.x, p.density);
    return pts;
}

} // namespace

ReproduceResult run_reproduce(const ReproduceOptions& opts) {
    ReproduceResult out;
    ReproduceMetrics& m = out.metrics;

    std::vector<ProgramSpec> specs = {make_program(ProgramId::PrA), make_program(ProgramId::PrB),
                                      make_program(ProgramId::PrC)};
    TraceSet corpus = generate_corpus(specs, opts.sim);
    m.corpus_traces = corpus.traces.size();

    TrainOptions topts = opts.train;
    topts.grouping = Grouping::PerProgram;
    topts.claimed_program = ClassKey{ProgramId::PrA, kUnknownInput, PathId::Unknown};
    TrainResult tr = train_pipeline(corpus, opts.align, opts.filter, topts);
    m.validation_eer = tr.report.validation_eer;
    m.threshold = tr.report.threshold;
    m.discard_fraction = tr.report.discard_fraction;
    m.no_anchor = tr.report.no_anchor;

    AlignResult ar = align_set(corpus, opts.align);
    FilterResult fr = filter_interrupted(ar.aligned, opts.filter);
    TraceSet fit = split_subset(fr.kept, topts.seed, topts.fit_fraction,
                                topts.validation_fraction, SplitPart::Fit);
    TraceSet test = split_subset(fr.kept, topts.seed, topts.fit_fraction,
                                 topts.validation_fraction, SplitPart::Test);
    if (test.traces.empty()) throw std::invalid_argument("test split is empty");

    const TemplateModel& mv = tr.model.multivariate;
    const ClassKey key_a = topts.claimed_program;

    auto simple = build_simple(fit, TemplateKind::Mean, Grouping::PerProgram);
    const SimpleTemplate* tpl_a = nullptr;
    for (const auto& t : simple)
        if (t.class_key.program == ProgramId::PrA) tpl_a = &t;
    if (!tpl_a) throw std::logic_error("PrA template missing");

    std::vector<double> mv_a, mv_b, mv_c, sad_a, sad_b, sad_c, xc_a, xc_b, xc_c;
    size_t ab_total = 0, ab_correct = 0, ac_total = 0, ac_correct = 0;
    for (const Trace& t : test.traces) {
        double s_mv = genuine_score(t, mv, key_a);
        double s_sad = -sad_score(t, *tpl_a);
        double s_xc = xcorr_score(t, *tpl_a);
        Classification c = classify_ml(t, mv);
        bool correct = c.key.program == t.label.program;
        switch (t.label.program) {
            case ProgramId::PrA:
                mv_a.push_back(s_mv), sad_a.push_back(s_sad), xc_a.push_back(s_xc);
                ++ab_total, ++ac_total;
                ab_correct += correct, ac_correct += correct;
                break;
            case ProgramId::PrB:
                mv_b.push_back(s_mv), sad_b.push_back(s_sad), xc_b.push_back(s_xc);
                ++ab_total;
                ab_correct += correct;
                break;
            case ProgramId::PrC:
                mv_c.push_back(s_mv), sad_c.push_back(s_sad), xc_c.push_back(s_xc);
                ++ac_total;
                ac_correct += correct;
                break;
            default: break;
        }
    }
    m.acc_prb = ab_total ? static_cast<double>(ab_correct) / static_cast<double>(ab_total) : 0;
    m.acc_prc = ac_total ? static_cast<double>(ac_correct) / static_cast<double>(ac_total) : 0;

    ScoreSet mv_vs_b{mv_a, mv_b, true}, mv_vs_c{mv_a, mv_c, true};
    ScoreSet sad_vs_b{sad_a, sad_b, true}, sad_vs_c{sad_a, sad_c, true};
    ScoreSet xc_vs_b{xc_a, xc_b, true}, xc_vs_c{xc_a, xc_c, true};
    m.eer_mv_prb = eer(mv_vs_b).eer;
    m.eer_mv_prc = eer(mv_vs_c).eer;
    m.eer_sad_prb = eer(sad_vs_b).eer;
    m.eer_sad_prc = eer(sad_vs_c).eer;
    m.eer_xcorr_prb = eer(xc_vs_b).eer;
    m.eer_xcorr_prc = eer(xc_vs_c).eer;

    // per-input study on PrA alone: one prediction set, two granularities
    TraceSet fit_a, test_a;
    fit_a.sample_rate_hz = fit.sample_rate_hz;
    fit_a.aligned = fit.aligned;
    test_a.sample_rate_hz = test.sample_rate_hz;
    test_a.aligned = test.aligned;
    for (const Trace& t : fit.traces)
        if (t.label.program == ProgramId::PrA) fit_a.traces.push_back(t);
    for (const Trace& t : test.traces)
        if (t.label.program == ProgramId::PrA) test_a.traces.push_back(t);

    auto per_input = build_simple(fit_a, TemplateKind::Mean, Grouping::PerInput);
    auto scorer = [&](const Trace& t) {
        return classify_simple(t, per_input, SimpleMetric::SAD);
    };
    const ProgramSpec& spec_a = specs[0];
    auto path_resolver = [&](const ClassKey& k) {
        return k.path != PathId::Unknown ? k.path : path_of_input(spec_a, k.input);
    };
    RecognitionReport exact = recognition_matrix(scorer, test_a, Grouping::PerInput);
    RecognitionReport coarse = recognition_matrix(scorer, test_a, Grouping::PerPath, path_resolver);
    m.perinput_acc = exact.overall();
    m.perpath_acc = coarse.overall();

    // classification restricted to inputs sharing the truth's path
    size_t sp_total = 0, sp_correct = 0;
    double chance_weighted = 0;
    for (PathId p : {PathId::Low, PathId::Ok, PathId::High}) {
        std::vector<SimpleTemplate> tpls;
        for (const auto& tpl : per_input)
            if (path_of_input(spec_a, tpl.class_key.input) == p) tpls.push_back(tpl);
        if (tpls.empty()) continue;
        size_t total = 0, correct = 0;
        for (const Trace& t : test_a.traces) {
            if (t.label.path != p) continue;
            ClassKey pred = classify_simple(t, tpls, SimpleMetric::SAD);
            ++total;
            correct += pred.input == t.label.input;
        }
        if (total == 0) continue;
        double acc = static_cast<double>(correct) / static_cast<double>(total);
        double chance = 1.0 / static_cast<double>(tpls.size());
        m.samepath_acc_by_path[to_string(p)] = acc;
        m.samepath_chance_by_path[to_string(p)] = chance;
        sp_total += total;
        sp_correct += correct;
        chance_weighted += chance * static_cast<double>(total);
    }
    if (sp_total) {
        m.samepath_acc = static_cast<double>(sp_correct) / static_cast<double>(sp_total);
        m.samepath_chance = chance_weighted / static_cast<double>(sp_total);
    }

    auto fail = [&](const std::string& what) { out.failures.push_back(what); };
    auto num = [](double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6g", v);
        return std::string(buf);
    };
    if (!(m.acc_prb >= 0.99))
        fail("PrA-vs-PrB accuracy " + num(m.acc_prb) + " below 0.99");
    if (!(m.acc_prc >= 0.99))
        fail("PrA-vs-PrC accuracy " + num(m.acc_prc) + " below 0.99");
    if (!(m.perpath_acc > m.perinput_acc))
        fail("per-path accuracy " + num(m.perpath_acc) + " does not exceed per-input " +
             num(m.perinput_acc));
    if (!(std::abs(m.samepath_acc - m.samepath_chance) <= 0.05))
        fail("same-path accuracy " + num(m.samepath_acc) + " not within 5pp of chance " +
             num(m.samepath_chance));
    if (!(m.eer_mv_prc < m.eer_xcorr_prc))
        fail("multivariate EER vs PrC " + num(m.eer_mv_prc) + " not below cross-correlation " +
             num(m.eer_xcorr_prc));
    if (!(m.eer_mv_prc >= 0.0 && m.eer_mv_prc <= 0.25))
        fail("multivariate EER vs PrC " + num(m.eer_mv_prc) + " outside [0, 0.25]");
    if (!(m.eer_mv_prb <= m.eer_mv_prc + 1e-12))
        fail("multivariate EER vs PrB " + num(m.eer_mv_prb) + " exceeds vs PrC " +
             num(m.eer_mv_prc));
    if (!(m.eer_sad_prc >= 0.35))
        fail("SAD EER vs PrC " + num(m.eer_sad_prc) + " below 0.35");

    nlohmann::ordered_json j;
    j["corpus"] = {{"traces", m.corpus_traces},
                   {"seed", opts.sim.seed},
                   {"traces_per_input", opts.sim.traces_per_input}};
    j["preprocess"] = {{"no_anchor", m.no_anchor}, {"discard_fraction", m.discard_fraction}};
    j["training"] = {{"validation_eer", m.validation_eer},
                     {"threshold", m.threshold},
                     {"fit_traces", tr.report.fit_traces},
                     {"baseline_runtime", tr.report.baseline_runtime},
                     {"runtime_tolerance", tr.report.runtime_tolerance}};
    j["verification_eer"] = {
        {"sad", {{"prb", m.eer_sad_prb}, {"prc", m.eer_sad_prc}}},
        {"xcorr", {{"prb", m.eer_xcorr_prb}, {"prc", m.eer_xcorr_prc}}},
        {"multivariate", {{"prb", m.eer_mv_prb}, {"prc", m.eer_mv_prc}}}};
    j["classification"] = {{"acc_pra_vs_prb", m.acc_prb}, {"acc_pra_vs_prc", m.acc_prc}};
    j["per_input_study"] = {{"perinput_acc", m.perinput_acc},
                            {"perpath_acc", m.perpath_acc},
                            {"samepath_acc", m.samepath_acc},
                            {"samepath_chance", m.samepath_chance},
                            {"samepath_acc_by_path", m.samepath_acc_by_path},
                            {"samepath_chance_by_path", m.samepath_chance_by_path}};
    j["failures"] = out.failures;
    j["pass"] = out.failures.empty();
    out.summary_json = j.dump(2) + "\n";

    if (!opts.out_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(opts.out_dir);
        {
            std::ofstream f(fs::path(opts.out_dir) / "summary.json", std::ios::binary);
            if (!f) throw std::runtime_error("cannot write summary.json in " + opts.out_dir);
            f << out.summary_json;
        }
        LinePlot roc;
        roc.title = "Verification ROC, PrA genuine vs PrC";
        roc.x_label = "false accept rate";
        roc.y_label = "genuine accept rate";
        roc.series.push_back({"SAD", roc_points(sad_vs_c), "#d62728", false});
        roc.series.push_back({"XCORR", roc_points(xc_vs_c), "#ff7f0e", false});
        roc.series.push_back({"multivariate", roc_points(mv_vs_c), "#1f77b4", false});
        write_svg_file(roc, (fs::path(opts.out_dir) / "roc_prc.svg").string());

        LinePlot ff;
        ff.title = "FAR / FRR vs threshold, multivariate, PrC";
        ff.x_label = "threshold (log-likelihood)";
        ff.y_label = "rate";
        std::vector<std::pair<double, double>> far_pts, frr_pts;
        for (const auto& p : far_frr_curve(mv_vs_c)) {
            far_pts.emplace_back(p.threshold, p.far);
            frr_pts.emplace_back(p.threshold, p.frr);
        }
        ff.series.push_back({"FAR", far_pts, "#d62728", false});
        ff.series.push_back({"FRR", frr_pts, "#1f77b4", true});
        write_svg_file(ff, (fs::path(opts.out_dir) / "far_frr_mv_prc.svg").string());

        LinePlot dens;
        dens.title = "Score densities, multivariate";
        dens.x_label = "genuine score";
        dens.y_label = "density";
        dens.series.push_back({"PrA genuine", kde_points(kde(mv_a)), "#1f77b4", false});
        dens.series.push_back({"PrC impostor", kde_points(kde(mv_c)), "#d62728", false});
        write_svg_file(dens, (fs::path(opts.out_dir) / "score_density_mv.svg").string());
    }

    return out;
}

} // namespace emids
