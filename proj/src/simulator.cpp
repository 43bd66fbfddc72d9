#include "emids/simulator.hpp"

#include <cmath>
#include <stdexcept>

#include "emids/rng.hpp"

namespace emids {
namespace {

constexpr int kBodyLen = 16;

double opcode_amplitude(Opcode op) {
    switch (op) {
        case Opcode::Load: return 1.0;
        case Opcode::Cmp: return 0.8;
        case Opcode::Not: return 0.6;
        case Opcode::Xor: return 0.7;
        case Opcode::Store: return 0.9;
        case Opcode::Nop: return 0.2;
    }
    return 0.0;
}

int hamming_weight4(uint8_t v) {
    v &= 0x0F;
    int w = 0;
    while (v) {
        w += v & 1;
        v >>= 1;
    }
    return w;
}

uint8_t nib(bool b) { return b ? 0x0F : 0x00; }

// Nearest-neighbor stretch of a shape to len + extra samples: duplicates
// `extra` positions, preserving amplitude and order.
Eigen::VectorXf stretch_shape(const Eigen::VectorXf& shape, int extra) {
    if (extra <= 0) return shape;
    const int in_len = static_cast<int>(shape.size());
    const int out_len = in_len + extra;
    Eigen::VectorXf out(out_len);
    for (int t = 0; t < out_len; ++t) {
        out[t] = shape[static_cast<int>((static_cast<int64_t>(t) * in_len) / out_len)];
    }
    return out;
}

uint64_t trace_stream_key(uint64_t seed, ProgramId pid, int input, int trace_index) {
    uint64_t k = mix_keys(seed, static_cast<uint64_t>(pid));
    k = mix_keys(k, static_cast<uint64_t>(input));
    return mix_keys(k, static_cast<uint64_t>(trace_index));
}

} // namespace

std::string to_string(Opcode op) {
    switch (op) {
        case Opcode::Load: return "LOAD";
        case Opcode::Cmp: return "CMP";
        case Opcode::Not: return "NOT";
        case Opcode::Xor: return "XOR";
        case Opcode::Store: return "STORE";
        case Opcode::Nop: return "NOP";
    }
    return "?";
}

AbstractInstruction make_instruction(Opcode op) {
    AbstractInstruction ins;
    ins.opcode = op;
    ins.base_duration = kBodyLen;
    ins.base_shape.resize(kBodyLen);
    const double a = opcode_amplitude(op);
    for (int i = 0; i < kBodyLen; ++i) {
        ins.base_shape[i] = static_cast<float>(a * std::sin(M_PI * (i + 0.5) / kBodyLen));
    }
    return ins;
}

ProgramSpec make_program(ProgramId id) {
    ProgramSpec spec;
    spec.program_id = id;
    spec.low_threshold = 3;
    spec.high_threshold = (id == ProgramId::PrC) ? 12 : 10;
    spec.low_flipped = (id == ProgramId::PrB);

    const Opcode pad = spec.low_flipped ? Opcode::Not : Opcode::Nop;
    const Opcode layout[18] = {
        Opcode::Load, Opcode::Cmp, pad,          Opcode::Store,  // water_low
        Opcode::Load, Opcode::Cmp, Opcode::Nop,  Opcode::Store,  // water_high
        Opcode::Load, Opcode::Xor, Opcode::Not,  Opcode::Store,  // ok = !(wl ^ wh)
        Opcode::Load, Opcode::Store,                             // drive pump (wl)
        Opcode::Load, Opcode::Store,                             // drive ok lamp
        Opcode::Load, Opcode::Store,                             // drive drain (wh)
    };
    spec.instruction_list.reserve(18);
    for (Opcode op : layout) spec.instruction_list.push_back(make_instruction(op));
    return spec;
}

void validate(const SimConfig& cfg) {
    if (cfg.amplitude_noise_sigma < 0) throw std::invalid_argument("amplitude_noise_sigma < 0");
    if (cfg.timing_jitter_max < 0) throw std::invalid_argument("timing_jitter_max < 0");
    if (cfg.start_jitter_max < 0) throw std::invalid_argument("start_jitter_max < 0");
    if (cfg.interrupt_probability < 0 || cfg.interrupt_probability > 1) {
        throw std::invalid_argument("interrupt_probability outside [0, 1]");
    }
    if (cfg.interrupt_burst_min < 1 || cfg.interrupt_burst_max < cfg.interrupt_burst_min) {
        throw std::invalid_argument("bad interrupt burst length range");
    }
    if (cfg.os_preamble_len < kOsGapLen || cfg.os_epilogue_len < kOsGapLen) {
        throw std::invalid_argument("OS segments must be at least the gap length");
    }
    if (cfg.traces_per_input < 1) throw std::invalid_argument("traces_per_input < 1");
    if (cfg.data_dependent_amplitude < 0) throw std::invalid_argument("data_dependent_amplitude < 0");
    if (cfg.immediate_leak_amplitude < 0) throw std::invalid_argument("immediate_leak_amplitude < 0");
    if (cfg.drift_sigma < 0) throw std::invalid_argument("drift_sigma < 0");
    if (!(cfg.sample_rate_hz > 0)) throw std::invalid_argument("sample_rate_hz <= 0");
}

void validate(const ProgramSpec& spec) {
    if (spec.instruction_list.empty()) throw std::invalid_argument("empty instruction list");
    for (const auto& ins : spec.instruction_list) {
        if (ins.base_duration != ins.base_shape.size() || ins.base_duration < 4) {
            throw std::invalid_argument("instruction base_duration must equal shape length, >= 4");
        }
    }
    if (spec.low_threshold < 0 || spec.high_threshold > 15 ||
        spec.low_threshold >= spec.high_threshold) {
        throw std::invalid_argument("thresholds must satisfy 0 <= low < high <= 15");
    }
}

PathId path_of_input(const ProgramSpec& spec, int input) {
    if (input < 0 || input > 15) throw std::invalid_argument("input outside [0, 15]");
    if (input <= spec.low_threshold) return PathId::Low;
    if (input >= spec.high_threshold) return PathId::High;
    return PathId::Ok;
}

std::vector<ExecutedOp> execute_program(const ProgramSpec& spec, int input) {
    if (input < 0 || input > 15) throw std::invalid_argument("input outside [0, 15]");
    if (spec.instruction_list.size() != 18) {
        throw std::invalid_argument("execute_program expects the 18-instruction layout");
    }

    const bool wl = (input <= spec.low_threshold) != spec.low_flipped;
    const bool wh = input >= spec.high_threshold;
    const bool ok = !(wl ^ wh);
    const auto in4 = static_cast<uint8_t>(input);
    const auto lo = static_cast<uint8_t>(spec.low_threshold);
    const auto hi = static_cast<uint8_t>(spec.high_threshold);

    std::vector<ExecutedOp> ops(18);
    for (size_t i = 0; i < 18; ++i) ops[i].opcode = spec.instruction_list[i].opcode;

    ops[0] = {ops[0].opcode, in4, 0};
    ops[1] = {ops[1].opcode, static_cast<uint8_t>((in4 ^ lo) & 0x0F), lo};
    ops[2] = {ops[2].opcode, spec.low_flipped ? nib(wl) : uint8_t{0}, 0};
    ops[3] = {ops[3].opcode, nib(wl), 0};
    ops[4] = {ops[4].opcode, in4, 0};
    ops[5] = {ops[5].opcode, static_cast<uint8_t>((in4 ^ hi) & 0x0F), hi};
    ops[6] = {ops[6].opcode, 0, 0};
    ops[7] = {ops[7].opcode, nib(wh), 0};
    ops[8] = {ops[8].opcode, nib(wl), 0};
    ops[9] = {ops[9].opcode, nib(wl ^ wh), 0};
    ops[10] = {ops[10].opcode, nib(ok), 0};
    ops[11] = {ops[11].opcode, nib(ok), 0};
    ops[12] = {ops[12].opcode, nib(wl), 0};
    ops[13] = {ops[13].opcode, nib(wl), 0};
    ops[14] = {ops[14].opcode, nib(ok), 0};
    ops[15] = {ops[15].opcode, nib(ok), 0};
    ops[16] = {ops[16].opcode, nib(wh), 0};
    ops[17] = {ops[17].opcode, nib(wh), 0};
    return ops;
}

// Pattern periods stay away from the 24-sample instruction pitch and its
// harmonics so user code cannot phase-lock onto the templates, and the
// amplitudes keep the pattern variance above the default capture noise.
float os_preamble_value(int j) {
    if (j >= -kOsGapLen) return 0.0f;
    return static_cast<float>(0.40 + 0.22 * std::sin(2.0 * M_PI * j / 17.0) +
                              0.12 * std::sin(2.0 * M_PI * j / 7.0 + 1.0));
}

float os_epilogue_value(int j) {
    if (j < kOsGapLen) return 0.0f;
    return static_cast<float>(0.38 + 0.22 * std::sin(2.0 * M_PI * j / 19.0 + 0.5) +
                              0.12 * std::sin(2.0 * M_PI * j / 11.0 + 2.0));
}

Eigen::VectorXf os_preamble_template(int n) {
    Eigen::VectorXf tpl(n);
    for (int t = 0; t < n; ++t) tpl[t] = os_preamble_value(-(kOsGapLen + n) + t);
    return tpl;
}

Eigen::VectorXf os_epilogue_template(int n) {
    Eigen::VectorXf tpl(n);
    for (int t = 0; t < n; ++t) tpl[t] = os_epilogue_value(kOsGapLen + t);
    return tpl;
}

Trace emit_trace(const ProgramSpec& spec, const SimConfig& cfg, int input, int trace_index) {
    validate(cfg);
    validate(spec);

    const uint64_t key = trace_stream_key(cfg.seed, spec.program_id, input, trace_index);
    Rng rng_timing(mix_keys(key, 1));
    Rng rng_noise(mix_keys(key, 2));
    Rng rng_interrupt(mix_keys(key, 3));

    const int start_jitter =
        cfg.start_jitter_max > 0 ? static_cast<int>(rng_timing.next_below(cfg.start_jitter_max)) : 0;
    const int pre_len = cfg.os_preamble_len + start_jitter;

    const auto ops = execute_program(spec, input);

    // user-program region: per instruction, a near-silent fetch segment
    // (where the immediate leaks) followed by the jittered execute shape
    // scaled by the operand's Hamming weight.
    std::vector<float> user;
    user.reserve(ops.size() * (kFetchLen + kBodyLen + cfg.timing_jitter_max));
    for (size_t i = 0; i < ops.size(); ++i) {
        const int stretch =
            cfg.timing_jitter_max > 0
                ? static_cast<int>(rng_timing.next_below(cfg.timing_jitter_max))
                : 0;
        const double fetch_level =
            kFetchBaseAmplitude +
            cfg.immediate_leak_amplitude * (static_cast<double>(ops[i].immediate) / 15.0);
        for (int t = 0; t < kFetchLen; ++t) user.push_back(static_cast<float>(fetch_level));

        const double scale =
            1.0 + cfg.data_dependent_amplitude * hamming_weight4(ops[i].operand) / 4.0;
        const Eigen::VectorXf body = stretch_shape(spec.instruction_list[i].base_shape, stretch);
        for (Eigen::Index t = 0; t < body.size(); ++t) {
            user.push_back(static_cast<float>(body[t] * scale));
        }
    }
    const int user_len = static_cast<int>(user.size());
    const int total = pre_len + user_len + cfg.os_epilogue_len;

    Trace out;
    out.samples.resize(total);
    for (int i = 0; i < pre_len; ++i) out.samples[i] = os_preamble_value(i - pre_len);
    for (int i = 0; i < user_len; ++i) out.samples[pre_len + i] = user[i];
    for (int i = 0; i < cfg.os_epilogue_len; ++i) {
        out.samples[pre_len + user_len + i] = os_epilogue_value(i);
    }

    // interrupt stream draws are position-independent of the other streams,
    // so configs differing only in interrupt_probability share everything else
    const double u = rng_interrupt.next_double();
    const double pos_u = rng_interrupt.next_double();
    const double len_u = rng_interrupt.next_double();
    if (u < cfg.interrupt_probability && user_len > 0) {
        int blen = cfg.interrupt_burst_min +
                   static_cast<int>(len_u * (cfg.interrupt_burst_max - cfg.interrupt_burst_min + 1));
        blen = std::min(blen, user_len);
        const int max_pos = user_len - blen;
        const int pos = pre_len + static_cast<int>(pos_u * (max_pos + 1));
        for (int t = 0; t < blen; ++t) {
            out.samples[pos + t] +=
                static_cast<float>(kInterruptAmplitude * rng_interrupt.next_gaussian());
        }
    }

    const double drift = cfg.drift_sigma * rng_noise.next_gaussian();
    for (int i = 0; i < total; ++i) {
        const double g = std::sin(M_PI * i / total);
        out.samples[i] += static_cast<float>(
            drift * g + cfg.amplitude_noise_sigma * rng_noise.next_gaussian());
    }

    out.label.program = spec.program_id;
    out.label.input = static_cast<uint8_t>(input);
    out.label.path = path_of_input(spec, input);
    out.marks = TriggerMarks{static_cast<uint32_t>(pre_len),
                             static_cast<uint32_t>(pre_len + user_len)};
    return out;
}

TraceSet generate_corpus(const std::vector<ProgramSpec>& specs, const SimConfig& cfg) {
    if (specs.empty()) throw std::invalid_argument("generate_corpus: no programs");
    validate(cfg);

    TraceSet ts;
    ts.sample_rate_hz = cfg.sample_rate_hz;
    ts.traces.reserve(specs.size() * 16 * cfg.traces_per_input);
    for (const ProgramSpec& spec : specs) {
        for (int input = 0; input <= 15; ++input) {
            for (int idx = 0; idx < cfg.traces_per_input; ++idx) {
                ts.traces.push_back(emit_trace(spec, cfg, input, idx));
            }
        }
    }
    return ts;
}

} // namespace emids
