// End-to-end acceptance gate. Each criterion prints one PASS/FAIL line;
// the exit code is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <sstream>
#include <string>
#include <vector>

#include "emids/distinguishers.hpp"
#include "emids/emtr_io.hpp"
#include "emids/evaluation.hpp"
#include "emids/ids.hpp"
#include "emids/model_io.hpp"
#include "emids/pipeline.hpp"
#include "emids/preprocess.hpp"
#include "emids/rng.hpp"
#include "emids/simulator.hpp"
#include "emids/templates.hpp"
#include "gaussian_oracle.hpp"

using namespace emids;

namespace {

struct Outcome1 {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* format, ...) {
    va_list args;
    va_start(args, format);
    char buf[512];
    std::vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return buf;
}

LdaProjection identity_projection(int d) {
    LdaProjection proj;
    proj.mean_global = Eigen::VectorXd::Zero(d);
    proj.components = Eigen::MatrixXd::Identity(d, d);
    return proj;
}

oracle::Mat to_oracle(const Eigen::MatrixXd& m) {
    oracle::Mat out(m.rows(), oracle::Vec(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
    return out;
}

oracle::Vec to_oracle(const Eigen::VectorXd& v) {
    return oracle::Vec(v.data(), v.data() + v.size());
}

double pearson(const Eigen::VectorXf& a, const Eigen::VectorXf& b) {
    const Eigen::Index n = std::min(a.size(), b.size());
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        sa += a[i];
        sb += b[i];
        saa += double(a[i]) * a[i];
        sbb += double(b[i]) * b[i];
        sab += double(a[i]) * b[i];
    }
    const double va = saa - sa * sa / double(n);
    const double vb = sbb - sb * sb / double(n);
    if (va <= 0 || vb <= 0) return 0;
    return (sab - sa * sb / double(n)) / std::sqrt(va * vb);
}

// 1. Gaussian templates against a brute-force oracle.
Outcome1 criterion_oracle_equivalence() {
    Rng rng(101);
    int instances = 0, traces_checked = 0;
    for (int rep = 0; rep < 220; ++rep) {
        const int d = 1 + static_cast<int>(rng.next_below(5));
        const int k = 2 + static_cast<int>(rng.next_below(1));
        const int per_class = 4 + static_cast<int>(rng.next_below(9));

        TraceSet ts;
        for (int c = 0; c < k; ++c) {
            Eigen::VectorXf center(d);
            for (int j = 0; j < d; ++j) center[j] = static_cast<float>(rng.next_gaussian() * 6.0);
            for (int i = 0; i < per_class; ++i) {
                Trace t;
                t.samples.resize(d);
                for (int j = 0; j < d; ++j)
                    t.samples[j] = center[j] + static_cast<float>(rng.next_gaussian());
                t.label.program = static_cast<ProgramId>(c);
                ts.traces.push_back(t);
            }
        }
        const TemplateModel model = fit_templates(ts, Grouping::PerProgram, identity_projection(d));
        const oracle::Mat cov = to_oracle(model.pooled_covariance);
        std::vector<oracle::Vec> means;
        for (const auto& cls : model.classes) means.push_back(to_oracle(cls.mean));

        for (const Trace& t : ts.traces) {
            const oracle::Vec x = to_oracle(project(model.projection, t.samples));
            const Classification got = classify_ml(t, model);
            const size_t want = oracle::classify(x, means, cov);
            if (!(got.key == model.classes[want].key)) {
                return {false, fmt("instance %d: class disagreement at d=%d k=%d", rep, d, k)};
            }
            for (size_t cls = 0; cls < model.classes.size(); ++cls) {
                const double lib = log_likelihood(t, model, model.classes[cls].key);
                const double ref = oracle::log_likelihood(x, means[cls], cov);
                if (std::abs(lib - ref) > 1e-8 * std::max(1.0, std::abs(ref))) {
                    return {false, fmt("instance %d: loglik %.12f vs oracle %.12f", rep, lib, ref)};
                }
            }
            ++traces_checked;
        }
        ++instances;
    }
    return {true, fmt("%d instances, %d traces, loglik within 1e-8", instances, traces_checked)};
}

// 2. SAD metric axioms and XCORR affine invariance.
Outcome1 criterion_metric_properties() {
    Rng rng(202);
    const auto random_trace = [&](int n) {
        Trace t;
        t.samples.resize(n);
        for (int i = 0; i < n; ++i) t.samples[i] = static_cast<float>(rng.next_gaussian());
        return t;
    };
    for (int rep = 0; rep < 1000; ++rep) {
        const int n = 8 + static_cast<int>(rng.next_below(56));
        const Trace x = random_trace(n), y = random_trace(n), z = random_trace(n);
        SimpleTemplate ty, tz;
        ty.reference = y.samples;
        tz.reference = z.samples;
        SimpleTemplate tx;
        tx.reference = x.samples;

        const double dxy = sad_score(x, ty);
        const double dyx = sad_score(y, tx);
        if (dxy < 0) return {false, fmt("rep %d: negative SAD", rep)};
        if (std::abs(dxy - dyx) > 1e-12) return {false, fmt("rep %d: SAD asymmetric", rep)};
        if (sad_score(x, tx) != 0) return {false, fmt("rep %d: SAD self-distance nonzero", rep)};
        if (sad_score(x, tz) > dxy + sad_score(y, tz) + 1e-9) {
            return {false, fmt("rep %d: SAD triangle inequality violated", rep)};
        }
    }
    for (int rep = 0; rep < 1000; ++rep) {
        const int n = 10 + static_cast<int>(rng.next_below(54));
        const Trace x = random_trace(n);
        SimpleTemplate tpl;
        tpl.reference = random_trace(n).samples;
        const double a = 0.25 + 2.0 * rng.next_double();
        const double b = -3.0 + 6.0 * rng.next_double();
        Trace ax = x;
        for (int i = 0; i < n; ++i) ax.samples[i] = static_cast<float>(a * x.samples[i] + b);
        const double s0 = xcorr_score(x, tpl);
        const double s1 = xcorr_score(ax, tpl);
        if (std::abs(s0 - s1) > 1e-5) {
            return {false, fmt("rep %d: affine map moved XCORR by %.3g", rep, std::abs(s0 - s1))};
        }
    }
    return {true, "SAD axioms and XCORR affine invariance on 1000 random pairs each"};
}

// 3. ROC/EER correctness.
Outcome1 criterion_evaluation() {
    Rng rng(303);
    for (int rep = 0; rep < 500; ++rep) {
        ScoreSet s;
        const int ng = 2 + static_cast<int>(rng.next_below(58));
        const int ni = 2 + static_cast<int>(rng.next_below(58));
        const auto draw = [&] {
            return rng.next_double() < 0.5 ? 0.5 * rng.next_below(8) : rng.next_gaussian();
        };
        for (int i = 0; i < ng; ++i) s.genuine.push_back(draw());
        for (int i = 0; i < ni; ++i) s.impostor.push_back(draw());
        const double a1 = auc_trapezoid(roc_curve(s));
        const double a2 = auc_mann_whitney(s);
        if (std::abs(a1 - a2) > 1e-9) {
            return {false, fmt("set %d: trapezoid %.12f vs Mann-Whitney %.12f", rep, a1, a2)};
        }
    }
    for (int rep = 0; rep < 50; ++rep) {
        ScoreSet s;
        for (int i = 0; i < 5 + static_cast<int>(rng.next_below(20)); ++i)
            s.genuine.push_back(1.0 + std::abs(rng.next_gaussian()));
        for (int i = 0; i < 5 + static_cast<int>(rng.next_below(20)); ++i)
            s.impostor.push_back(-1.0 - std::abs(rng.next_gaussian()));
        if (std::abs(eer(s).eer) > 1e-12) {
            return {false, fmt("perfectly separated set %d has EER %.6f", rep, eer(s).eer)};
        }
    }
    ScoreSet same;
    for (int i = 0; i < 10000; ++i) same.genuine.push_back(rng.next_gaussian());
    for (int i = 0; i < 10000; ++i) same.impostor.push_back(rng.next_gaussian());
    const double e = eer(same).eer;
    if (std::abs(e - 0.5) > 0.02) {
        return {false, fmt("identical distributions gave EER %.4f, expected 0.5 +- 0.02", e)};
    }
    return {true, fmt("500 AUC identities, 50 separated sets, null EER %.4f", e)};
}

// 7. Filter discard rate and alignment benefit.
Outcome1 criterion_preprocessing() {
    SimConfig cfg;
    cfg.traces_per_input = 125; // 2000 PrA traces
    cfg.interrupt_probability = 0.10;
    const ProgramSpec pra = make_program(ProgramId::PrA);
    const TraceSet corpus = generate_corpus({pra}, cfg);
    const AlignResult ar = align_set(corpus, AlignmentConfig{});
    const FilterResult fr = filter_interrupted(ar.aligned, FilterConfig{});
    const double frac =
        static_cast<double>(fr.discarded) / static_cast<double>(ar.aligned.traces.size());
    if (frac < 0.07 || frac > 0.13) {
        return {false, fmt("discard fraction %.4f outside [0.07, 0.13]", frac)};
    }

    // start jitter is what zero-lag alignment corrects, so isolate it
    SimConfig pair_cfg;
    pair_cfg.interrupt_probability = 0.0;
    pair_cfg.timing_jitter_max = 0;
    const AlignmentConfig acfg;
    int pairs = 0;
    for (int i = 0; pairs < 100; ++i) {
        if (i > 2000) return {false, "could not assemble 100 differing-jitter pairs"};
        const Trace a = emit_trace(pra, pair_cfg, i % 16, 40000 + 2 * i);
        const Trace b = emit_trace(pra, pair_cfg, i % 16, 40001 + 2 * i);
        const int shift = std::abs(static_cast<int>(a.marks->start) - static_cast<int>(b.marks->start));
        if (shift < 2) continue; // not misaligned enough to call the pair jittered
        const auto aa = align_trace(a, acfg);
        const auto ab = align_trace(b, acfg);
        if (!aa || !ab) continue;
        const double before = pearson(a.samples, b.samples);
        const double after = pearson(aa->samples, ab->samples);
        if (!(after > before)) {
            return {false, fmt("pair %d: correlation %.4f -> %.4f did not improve", i, before, after)};
        }
        ++pairs;
    }
    return {true, fmt("discard fraction %.4f, alignment improved all 100 pairs", frac)};
}

// 8. Two-layer IDS end to end at the EER threshold.
Outcome1 criterion_ids(const SimConfig& sim) {
    const ProgramSpec pra = make_program(ProgramId::PrA);
    const ProgramSpec prb = make_program(ProgramId::PrB);
    const TraceSet corpus = generate_corpus({pra, prb, make_program(ProgramId::PrC)}, sim);
    const TrainResult r = train_pipeline(corpus, AlignmentConfig{}, FilterConfig{}, TrainOptions{});
    const IdsProfile profile = ids_profile_of(r.model);
    const PreprocessConfigs cfgs = preprocess_configs_of(r.model);

    const auto batch = [&](const ProgramSpec& spec, int base) {
        TraceSet ts;
        ts.traces.reserve(100);
        for (int i = 0; i < 100; ++i)
            ts.traces.push_back(emit_trace(spec, sim, i % 16, base + i / 16));
        return ts;
    };

    int quiet = 0;
    for (int b = 0; b < 100; ++b) {
        if (!spot_check(batch(pra, 50000 + 7 * b), profile, cfgs).alarm) ++quiet;
    }
    int alarms = 0;
    for (int b = 0; b < 100; ++b) {
        if (spot_check(batch(prb, 50000 + 7 * b), profile, cfgs).alarm) ++alarms;
    }

    ProgramSpec slow = pra;
    for (auto& ins : slow.instruction_list) {
        const Eigen::VectorXf in = ins.base_shape;
        const int out_len = ins.base_duration + 6;
        Eigen::VectorXf out(out_len);
        for (int i = 0; i < out_len; ++i)
            out[i] = in[std::min<int>(ins.base_duration - 1, i * ins.base_duration / out_len)];
        ins.base_shape = out;
        ins.base_duration = out_len;
    }
    int timing = 0;
    for (int i = 0; i < 50; ++i) {
        const Verdict v = check_trace(emit_trace(slow, sim, i % 16, 60000 + i), profile, cfgs);
        if (v.outcome == Outcome::TimingAnomaly && !v.layer2_score.has_value()) ++timing;
    }

    const bool pass = quiet >= 95 && alarms == 100 && timing == 50;
    return {pass, fmt("genuine batches quiet %d/100 (need >=95), flipped-logic alarms %d/100, "
                      "runtime-inflated timing-only %d/50",
                      quiet, alarms, timing)};
}

// 9. Deterministic regeneration and bit-exact round-trips.
Outcome1 criterion_determinism() {
    SimConfig cfg;
    cfg.traces_per_input = 50;
    const std::vector<ProgramSpec> specs = {make_program(ProgramId::PrA),
                                            make_program(ProgramId::PrB),
                                            make_program(ProgramId::PrC)};
    std::ostringstream emtr1, emtr2;
    write_traceset(generate_corpus(specs, cfg), emtr1);
    write_traceset(generate_corpus(specs, cfg), emtr2);
    if (emtr1.str() != emtr2.str()) return {false, "same-seed corpus files differ"};

    const TraceSet corpus = generate_corpus(specs, cfg);
    std::ostringstream model1, model2;
    write_model(train_pipeline(corpus, AlignmentConfig{}, FilterConfig{}, TrainOptions{}).model,
                model1);
    write_model(train_pipeline(corpus, AlignmentConfig{}, FilterConfig{}, TrainOptions{}).model,
                model2);
    if (model1.str() != model2.str()) return {false, "same-seed model files differ"};

    Rng rng(909);
    for (int rep = 0; rep < 1000; ++rep) {
        TraceSet ts;
        ts.sample_rate_hz = 1e6 * (1.0 + rng.next_double());
        const int count = 1 + static_cast<int>(rng.next_below(5));
        for (int i = 0; i < count; ++i) {
            Trace t;
            const int n = 1 + static_cast<int>(rng.next_below(39));
            t.samples.resize(n);
            for (int j = 0; j < n; ++j) t.samples[j] = static_cast<float>(rng.next_gaussian());
            t.label.program = static_cast<ProgramId>(rng.next_below(2));
            t.label.input = static_cast<uint8_t>(rng.next_below(15));
            t.label.path = static_cast<PathId>(rng.next_below(2));
            if (rng.next_double() < 0.5) {
                const uint32_t start = rng.next_below(static_cast<uint32_t>(n));
                const uint32_t end =
                    start + rng.next_below(static_cast<uint32_t>(n) - start);
                t.marks = TriggerMarks{start, end};
            }
            ts.traces.push_back(t);
        }
        std::stringstream buf;
        write_traceset(ts, buf);
        const TraceSet back = read_traceset(buf);
        if (back.traces.size() != ts.traces.size()) return {false, fmt("rep %d: size changed", rep)};
        if (std::memcmp(&back.sample_rate_hz, &ts.sample_rate_hz, sizeof(double)) != 0) {
            return {false, fmt("rep %d: sample rate not bit-exact", rep)};
        }
        for (size_t i = 0; i < ts.traces.size(); ++i) {
            const Trace& a = ts.traces[i];
            const Trace& b = back.traces[i];
            if (a.samples.size() != b.samples.size() ||
                std::memcmp(a.samples.data(), b.samples.data(),
                            sizeof(float) * a.samples.size()) != 0) {
                return {false, fmt("rep %d trace %zu: samples not bit-exact", rep, i)};
            }
            if (a.label.program != b.label.program || a.label.input != b.label.input ||
                a.label.path != b.label.path) {
                return {false, fmt("rep %d trace %zu: label changed", rep, i)};
            }
            if (a.marks.has_value() != b.marks.has_value() ||
                (a.marks && (a.marks->start != b.marks->start || a.marks->end != b.marks->end))) {
                return {false, fmt("rep %d trace %zu: marks changed", rep, i)};
            }
        }
    }
    return {true, "corpus and model regeneration byte-identical, 1000 round-trips bit-exact"};
}

struct Line {
    int id;
    const char* label;
    Outcome1 result;
    double seconds;
    double limit; // 0 = no runtime bound
};

} // namespace

int main() {
    std::vector<Line> lines;
    const auto run = [&](int id, const char* label, double limit, auto&& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome1 r = fn();
        const double sec = seconds_since(t0);
        if (r.pass && limit > 0 && sec > limit) {
            r.pass = false;
            r.detail += fmt(" [exceeded %.0fs budget]", limit);
        }
        lines.push_back({id, label, std::move(r), sec, limit});
    };

    run(1, "Gaussian templates match the brute-force oracle", 10, criterion_oracle_equivalence);
    run(2, "SAD axioms and XCORR affine invariance", 5, criterion_metric_properties);
    run(3, "AUC route identity and EER endpoints", 30, criterion_evaluation);

    // criteria 4-6 all read one reproduce run on the default corpus
    const auto t0 = std::chrono::steady_clock::now();
    ReproduceOptions ropts;
    const ReproduceResult rep = run_reproduce(ropts);
    const double rep_sec = seconds_since(t0);
    const ReproduceMetrics& m = rep.metrics;

    {
        const bool pass = m.acc_prb >= 0.99 && m.acc_prc >= 0.99 && rep_sec < 120;
        lines.push_back({4, "multivariate distinguishing accuracy on held-out traces",
                         {pass, fmt("PrA-vs-PrB %.4f, PrA-vs-PrC %.4f (need >= 0.99)", m.acc_prb,
                                    m.acc_prc)},
                         rep_sec, 120});
    }
    {
        const double gap = std::abs(m.samepath_acc - m.samepath_chance);
        const bool pass = m.perpath_acc > m.perinput_acc && gap <= 0.05;
        lines.push_back({5, "path grouping beats per-input grouping; same-path inputs are chance",
                         {pass, fmt("perpath %.4f > perinput %.4f; same-path %.4f vs chance %.4f",
                                    m.perpath_acc, m.perinput_acc, m.samepath_acc,
                                    m.samepath_chance)},
                         rep_sec, 0});
    }
    {
        bool pass = m.eer_mv_prc < m.eer_xcorr_prc && m.eer_mv_prc >= 0 && m.eer_mv_prc <= 0.25 &&
                    m.eer_mv_prb <= m.eer_mv_prc && m.eer_sad_prc >= 0.35 && rep_sec < 600;
        std::string detail =
            fmt("EER mv/prc %.4f < xcorr/prc %.4f; mv/prb %.4f <= mv/prc; sad/prc %.4f >= 0.35",
                m.eer_mv_prc, m.eer_xcorr_prc, m.eer_mv_prb, m.eer_sad_prc);
        if (!rep.failures.empty()) {
            pass = false;
            detail += "; reproduce flagged:";
            for (const auto& f : rep.failures) detail += " " + f;
        }
        lines.push_back({6, "distinguisher EER ordering under attack programs",
                         {pass, std::move(detail)}, rep_sec, 600});
    }

    run(7, "filter discard rate and alignment benefit", 0, criterion_preprocessing);
    run(8, "two-layer IDS verdicts at the EER threshold", 0,
        [&] { return criterion_ids(ropts.sim); });
    run(9, "deterministic regeneration and bit-exact round-trips", 0, criterion_determinism);

    int failures = 0;
    for (const Line& l : lines) {
        if (!l.result.pass) ++failures;
        std::printf("%s criterion %d: %s (%s) [%.1fs]\n", l.result.pass ? "PASS" : "FAIL", l.id,
                    l.label, l.result.detail.c_str(), l.seconds);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(lines.size()) - failures,
                lines.size());
    return failures;
}
