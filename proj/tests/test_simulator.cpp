#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>
#include <vector>

#include "emids/emtr_io.hpp"
#include "emids/simulator.hpp"

using namespace emids;

namespace {

SimConfig clean_config() {
    SimConfig cfg;
    cfg.amplitude_noise_sigma = 0.0;
    cfg.timing_jitter_max = 0;
    cfg.start_jitter_max = 0;
    cfg.interrupt_probability = 0.0;
    cfg.drift_sigma = 0.0;
    return cfg;
}

bool same_samples(const Trace& a, const Trace& b) {
    if (a.samples.size() != b.samples.size()) return false;
    for (Eigen::Index i = 0; i < a.samples.size(); ++i) {
        if (a.samples[i] != b.samples[i]) return false;
    }
    return true;
}

std::string serialize(const TraceSet& ts) {
    std::ostringstream os;
    write_traceset(ts, os);
    return os.str();
}

} // namespace

TEST_CASE("the three programs share the 18-instruction layout") {
    const ProgramSpec a = make_program(ProgramId::PrA);
    const ProgramSpec b = make_program(ProgramId::PrB);
    const ProgramSpec c = make_program(ProgramId::PrC);

    REQUIRE(a.instruction_list.size() == 18);
    REQUIRE(b.instruction_list.size() == 18);
    REQUIRE(c.instruction_list.size() == 18);

    validate(a);
    validate(b);
    validate(c);

    SUBCASE("PrB differs from PrA in exactly one opcode") {
        int diffs = 0;
        int diff_slot = -1;
        for (size_t i = 0; i < 18; ++i) {
            if (a.instruction_list[i].opcode != b.instruction_list[i].opcode) {
                ++diffs;
                diff_slot = static_cast<int>(i);
            }
        }
        CHECK(diffs == 1);
        CHECK(a.instruction_list[diff_slot].opcode == Opcode::Nop);
        CHECK(b.instruction_list[diff_slot].opcode == Opcode::Not);
        CHECK(b.low_flipped);
        CHECK_FALSE(a.low_flipped);
    }

    SUBCASE("PrC has PrA's opcode list and a different high threshold") {
        for (size_t i = 0; i < 18; ++i) {
            CHECK(a.instruction_list[i].opcode == c.instruction_list[i].opcode);
        }
        CHECK(c.high_threshold == 12);
        CHECK(a.high_threshold == 10);
        CHECK(c.low_threshold == a.low_threshold);
        CHECK_FALSE(c.low_flipped);
    }

    SUBCASE("instruction shapes match the declared duration") {
        for (const auto& ins : a.instruction_list) {
            CHECK(ins.base_duration == ins.base_shape.size());
            CHECK(ins.base_duration >= 4);
        }
    }
}

TEST_CASE("control-flow paths by input value") {
    const ProgramSpec a = make_program(ProgramId::PrA);
    const ProgramSpec b = make_program(ProgramId::PrB);
    const ProgramSpec c = make_program(ProgramId::PrC);

    for (int in = 0; in <= 3; ++in) CHECK(path_of_input(a, in) == PathId::Low);
    for (int in = 4; in <= 9; ++in) CHECK(path_of_input(a, in) == PathId::Ok);
    for (int in = 10; in <= 15; ++in) CHECK(path_of_input(a, in) == PathId::High);

    SUBCASE("PrB keeps PrA's paths, PrC shifts exactly inputs 10 and 11") {
        std::set<int> moved;
        for (int in = 0; in <= 15; ++in) {
            CHECK(path_of_input(b, in) == path_of_input(a, in));
            if (path_of_input(c, in) != path_of_input(a, in)) moved.insert(in);
        }
        CHECK(moved == std::set<int>{10, 11});
        CHECK(path_of_input(c, 10) == PathId::Ok);
        CHECK(path_of_input(c, 11) == PathId::Ok);
    }

    SUBCASE("out-of-range inputs are rejected") {
        CHECK_THROWS_AS(path_of_input(a, -1), std::invalid_argument);
        CHECK_THROWS_AS(path_of_input(a, 16), std::invalid_argument);
    }
}

TEST_CASE("executed operands and immediates") {
    const ProgramSpec a = make_program(ProgramId::PrA);
    const ProgramSpec b = make_program(ProgramId::PrB);
    const ProgramSpec c = make_program(ProgramId::PrC);

    for (int in = 0; in <= 15; ++in) {
        const auto ops_a = execute_program(a, in);
        const auto ops_b = execute_program(b, in);
        const auto ops_c = execute_program(c, in);
        REQUIRE(ops_a.size() == 18);

        const bool wl = in <= 3;
        const bool wh_a = in >= 10;
        const bool wh_c = in >= 12;

        CHECK(ops_a[0].operand == in);
        CHECK(ops_a[1].operand == ((in ^ 3) & 0x0F));
        CHECK(ops_a[1].immediate == 3);
        CHECK(ops_a[5].operand == ((in ^ 10) & 0x0F));
        CHECK(ops_a[5].immediate == 10);
        CHECK(ops_c[5].operand == ((in ^ 12) & 0x0F));
        CHECK(ops_c[5].immediate == 12);

        // Only the two comparisons fetch immediates.
        for (size_t i = 0; i < 18; ++i) {
            if (i != 1 && i != 5) {
                CHECK(ops_a[i].immediate == 0);
                CHECK(ops_b[i].immediate == 0);
                CHECK(ops_c[i].immediate == 0);
            }
        }

        // Booleans materialize as 0x0 / 0xF nibbles.
        const auto nib = [](bool v) { return v ? uint8_t{0xF} : uint8_t{0}; };
        CHECK(ops_a[2].operand == 0);
        CHECK(ops_b[2].operand == nib(!wl));
        CHECK(ops_a[3].operand == nib(wl));
        CHECK(ops_b[3].operand == nib(!wl));
        CHECK(ops_a[7].operand == nib(wh_a));
        CHECK(ops_c[7].operand == nib(wh_c));
        CHECK(ops_a[9].operand == nib(wl ^ wh_a));
        CHECK(ops_a[10].operand == nib(!(wl ^ wh_a)));
    }
}

TEST_CASE("emit_trace is a pure function of its arguments") {
    const ProgramSpec a = make_program(ProgramId::PrA);
    SimConfig cfg;
    cfg.traces_per_input = 4;

    const Trace t1 = emit_trace(a, cfg, 7, 3);
    const Trace t2 = emit_trace(a, cfg, 7, 3);
    CHECK(same_samples(t1, t2));
    CHECK(t1.marks.has_value());
    CHECK(t2.marks.has_value());
    CHECK(t1.marks->start == t2.marks->start);
    CHECK(t1.marks->end == t2.marks->end);

    SUBCASE("different trace index changes the samples") {
        const Trace t3 = emit_trace(a, cfg, 7, 4);
        CHECK_FALSE(same_samples(t1, t3));
    }
    SUBCASE("different seed changes the samples") {
        SimConfig other = cfg;
        other.seed = cfg.seed + 1;
        CHECK_FALSE(same_samples(t1, emit_trace(a, other, 7, 3)));
    }
    SUBCASE("labels record program, input, and resolved path") {
        CHECK(t1.label.program == ProgramId::PrA);
        CHECK(t1.label.input == 7);
        CHECK(t1.label.path == PathId::Ok);
        CHECK_FALSE(t1.label.discarded);
    }
}

TEST_CASE("noise-free traces collapse to one waveform per input") {
    const ProgramSpec a = make_program(ProgramId::PrA);
    const SimConfig cfg = clean_config();

    const Trace t0 = emit_trace(a, cfg, 5, 0);
    for (int idx = 1; idx < 5; ++idx) {
        CHECK(same_samples(t0, emit_trace(a, cfg, 5, idx)));
    }

    SUBCASE("user region is exactly 18 * 24 samples with no jitter") {
        REQUIRE(t0.marks.has_value());
        CHECK(t0.marks->start == static_cast<uint32_t>(cfg.os_preamble_len));
        CHECK(t0.marks->end - t0.marks->start == 18 * (kFetchLen + 16));
        CHECK(t0.samples.size() ==
              cfg.os_preamble_len + 18 * (kFetchLen + 16) + cfg.os_epilogue_len);
    }

    SUBCASE("the gap next to the user region is silent") {
        const int start = static_cast<int>(t0.marks->start);
        const int end = static_cast<int>(t0.marks->end);
        for (int j = 1; j <= kOsGapLen; ++j) {
            CHECK(t0.samples[start - j] == 0.0f);
        }
        for (int j = 0; j < kOsGapLen; ++j) {
            CHECK(t0.samples[end + j] == 0.0f);
        }
    }

    SUBCASE("OS activity beyond the gap matches the published templates") {
        const int n = 40;
        const auto pre = os_preamble_template(n);
        const auto epi = os_epilogue_template(n);
        const int start = static_cast<int>(t0.marks->start);
        const int end = static_cast<int>(t0.marks->end);
        for (int t = 0; t < n; ++t) {
            CHECK(t0.samples[start - kOsGapLen - n + t] == pre[t]);
            CHECK(t0.samples[end + kOsGapLen + t] == epi[t]);
            CHECK(pre[t] == os_preamble_value(-(kOsGapLen + n) + t));
            CHECK(epi[t] == os_epilogue_value(kOsGapLen + t));
        }
        CHECK(pre.minCoeff() > 0.0f);
        CHECK(epi.minCoeff() > 0.0f);
    }
}

TEST_CASE("leakage terms are the only data dependence") {
    SimConfig cfg = clean_config();
    cfg.data_dependent_amplitude = 0.0;
    cfg.immediate_leak_amplitude = 0.0;

    const ProgramSpec a = make_program(ProgramId::PrA);
    const ProgramSpec b = make_program(ProgramId::PrB);
    const ProgramSpec c = make_program(ProgramId::PrC);

    SUBCASE("with leakage off, PrA and PrC are indistinguishable") {
        for (int in = 0; in <= 15; ++in) {
            CHECK(same_samples(emit_trace(a, cfg, in, 0), emit_trace(c, cfg, in, 0)));
        }
    }
    SUBCASE("with leakage off, all inputs of one program coincide") {
        const Trace t0 = emit_trace(a, cfg, 0, 0);
        for (int in = 1; in <= 15; ++in) {
            CHECK(same_samples(t0, emit_trace(a, cfg, in, 0)));
        }
    }
    SUBCASE("PrB still differs: the replaced opcode changes the shape") {
        CHECK_FALSE(same_samples(emit_trace(a, cfg, 0, 0), emit_trace(b, cfg, 0, 0)));
    }
    SUBCASE("immediate leak alone separates PrA from PrC") {
        SimConfig leak = cfg;
        leak.immediate_leak_amplitude = 2.0;
        const Trace ta = emit_trace(a, leak, 7, 0);
        const Trace tc = emit_trace(c, leak, 7, 0);
        REQUIRE(ta.samples.size() == tc.samples.size());
        int first_diff = -1;
        int diff_count = 0;
        for (Eigen::Index i = 0; i < ta.samples.size(); ++i) {
            if (ta.samples[i] != tc.samples[i]) {
                if (first_diff < 0) first_diff = static_cast<int>(i);
                ++diff_count;
            }
        }
        // Only the 8 fetch samples of the high comparison differ.
        CHECK(diff_count == kFetchLen);
        const int op5_fetch = static_cast<int>(ta.marks->start) + 5 * (kFetchLen + 16);
        CHECK(first_diff == op5_fetch);
        const double expect_a = kFetchBaseAmplitude + 2.0 * 10.0 / 15.0;
        const double expect_c = kFetchBaseAmplitude + 2.0 * 12.0 / 15.0;
        CHECK(ta.samples[first_diff] == doctest::Approx(expect_a).epsilon(1e-6));
        CHECK(tc.samples[first_diff] == doctest::Approx(expect_c).epsilon(1e-6));
    }
    SUBCASE("operand leak scales bodies by Hamming weight") {
        SimConfig dda = cfg;
        dda.data_dependent_amplitude = 0.4;
        // Input 0: every operand nibble of PrA is 0 except the wl/ok booleans.
        // Compare op 0 (LOAD input) bodies for inputs 0 and 15.
        const Trace t0 = emit_trace(a, dda, 0, 0);
        const Trace t15 = emit_trace(a, dda, 15, 0);
        const int body0 = static_cast<int>(t0.marks->start) + kFetchLen;
        const float peak0 = t0.samples.segment(body0, 16).maxCoeff();
        const float peak15 = t15.samples.segment(body0, 16).maxCoeff();
        // HW(0) = 0, HW(15) = 4: ratio (1 + 0.4) / 1.
        CHECK(peak15 / peak0 == doctest::Approx(1.4).epsilon(1e-5));
    }
}

TEST_CASE("timing jitter stretches instructions without reordering") {
    SimConfig cfg = clean_config();
    cfg.timing_jitter_max = 2;
    cfg.start_jitter_max = 12;
    const ProgramSpec a = make_program(ProgramId::PrA);

    uint32_t min_rt = UINT32_MAX, max_rt = 0;
    uint32_t min_start = UINT32_MAX, max_start = 0;
    for (int idx = 0; idx < 40; ++idx) {
        const Trace t = emit_trace(a, cfg, 3, idx);
        REQUIRE(t.marks.has_value());
        const uint32_t rt = t.marks->end - t.marks->start;
        min_rt = std::min(min_rt, rt);
        max_rt = std::max(max_rt, rt);
        min_start = std::min(min_start, t.marks->start);
        max_start = std::max(max_start, t.marks->start);
        CHECK(rt >= 432);
        CHECK(rt <= 432 + 18u * 2u);
        CHECK(t.marks->start >= static_cast<uint32_t>(cfg.os_preamble_len));
        CHECK(t.marks->start <= static_cast<uint32_t>(cfg.os_preamble_len + 12));
    }
    CHECK(max_rt > min_rt);
    CHECK(max_start > min_start);
}

TEST_CASE("runtime distributions of PrA and PrB coincide") {
    SimConfig cfg = clean_config();
    cfg.timing_jitter_max = 2;
    const ProgramSpec a = make_program(ProgramId::PrA);
    const ProgramSpec b = make_program(ProgramId::PrB);

    auto mean_runtime = [&](const ProgramSpec& spec) {
        double sum = 0;
        int n = 0;
        for (int in = 0; in <= 15; ++in) {
            for (int idx = 0; idx < 25; ++idx) {
                const Trace t = emit_trace(spec, cfg, in, idx);
                sum += t.marks->end - t.marks->start;
                ++n;
            }
        }
        return sum / n;
    };
    const double ma = mean_runtime(a);
    const double mb = mean_runtime(b);
    // Uniform stretch on {0, 1, 2} per instruction: mean 432 + 18, se ~ 0.18.
    CHECK(ma == doctest::Approx(450.0).epsilon(0.005));
    CHECK(std::abs(ma - mb) < 3.0);
}

TEST_CASE("interrupts hit the configured fraction of traces") {
    SimConfig with = clean_config();
    with.interrupt_probability = 0.10;
    SimConfig without = with;
    without.interrupt_probability = 0.0;
    const ProgramSpec a = make_program(ProgramId::PrA);

    int hit = 0;
    const int kTotal = 800;
    for (int i = 0; i < kTotal; ++i) {
        const Trace tw = emit_trace(a, with, i % 16, i / 16);
        const Trace to = emit_trace(a, without, i % 16, i / 16);
        REQUIRE(tw.samples.size() == to.samples.size());
        bool differs = false;
        for (Eigen::Index s = 0; s < tw.samples.size(); ++s) {
            if (tw.samples[s] != to.samples[s]) {
                differs = true;
                // Bursts land inside the user region only.
                CHECK(s >= static_cast<Eigen::Index>(tw.marks->start));
                CHECK(s < static_cast<Eigen::Index>(tw.marks->end));
            }
        }
        if (differs) ++hit;
    }
    // Binomial(800, 0.1): mean 80, sd ~ 8.5. Allow 4 sigma.
    CHECK(hit > 80 - 34);
    CHECK(hit < 80 + 34);
}

TEST_CASE("generate_corpus layout and determinism") {
    SimConfig cfg;
    cfg.traces_per_input = 3;
    const std::vector<ProgramSpec> specs = {make_program(ProgramId::PrA),
                                            make_program(ProgramId::PrB)};

    const TraceSet ts = generate_corpus(specs, cfg);
    REQUIRE(ts.traces.size() == 2 * 16 * 3);
    CHECK(ts.sample_rate_hz == cfg.sample_rate_hz);
    CHECK_FALSE(ts.aligned);

    SUBCASE("program-major, then input, then repetition") {
        size_t i = 0;
        for (int p = 0; p < 2; ++p) {
            const ProgramId pid = (p == 0) ? ProgramId::PrA : ProgramId::PrB;
            for (int in = 0; in <= 15; ++in) {
                for (int idx = 0; idx < 3; ++idx, ++i) {
                    CHECK(ts.traces[i].label.program == pid);
                    CHECK(ts.traces[i].label.input == in);
                }
            }
        }
    }

    SUBCASE("repeated generation serializes byte-identically") {
        const TraceSet again = generate_corpus(specs, cfg);
        CHECK(serialize(ts) == serialize(again));
    }

    SUBCASE("corpus traces equal direct emission") {
        CHECK(same_samples(ts.traces[0], emit_trace(specs[0], cfg, 0, 0)));
        CHECK(same_samples(ts.traces[16 * 3 + 5 * 3 + 2], emit_trace(specs[1], cfg, 5, 2)));
    }
}

TEST_CASE("configuration validation") {
    SimConfig cfg;
    SUBCASE("defaults validate") { CHECK_NOTHROW(validate(cfg)); }
    SUBCASE("negative noise") {
        cfg.amplitude_noise_sigma = -0.1;
        CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
    }
    SUBCASE("probability range") {
        cfg.interrupt_probability = 1.5;
        CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
    }
    SUBCASE("burst range ordering") {
        cfg.interrupt_burst_min = 60;
        cfg.interrupt_burst_max = 50;
        CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
    }
    SUBCASE("OS segments must cover the gap") {
        cfg.os_preamble_len = kOsGapLen - 1;
        CHECK_THROWS_WITH_AS(validate(cfg), doctest::Contains("gap"), std::invalid_argument);
    }
    SUBCASE("trace count") {
        cfg.traces_per_input = 0;
        CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
    }
    SUBCASE("empty corpus") {
        CHECK_THROWS_AS(generate_corpus({}, cfg), std::invalid_argument);
    }
    SUBCASE("bad thresholds") {
        ProgramSpec spec = make_program(ProgramId::PrA);
        spec.low_threshold = 12;
        CHECK_THROWS_AS(validate(spec), std::invalid_argument);
    }
}
