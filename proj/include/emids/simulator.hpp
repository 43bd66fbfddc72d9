#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "emids/trace.hpp"

namespace emids {

enum class Opcode : uint8_t { Load = 0, Cmp = 1, Not = 2, Xor = 3, Store = 4, Nop = 5 };

std::string to_string(Opcode op);

struct AbstractInstruction {
    Opcode opcode = Opcode::Nop;
    Eigen::VectorXf base_shape;
    int base_duration = 0;
};

// Half-sine bump of the opcode's characteristic amplitude, 16 samples.
AbstractInstruction make_instruction(Opcode op);

struct ProgramSpec {
    ProgramId program_id = ProgramId::PrA;
    std::vector<AbstractInstruction> instruction_list;
    int low_threshold = 3;
    int high_threshold = 10;
    bool low_flipped = false;
};

// PrA: the water-level control program. PrB: same with the water_low logic
// flipped (one NOP replaced by NOT, instruction count preserved). PrC: same
// as PrA with the water_high comparison constant raised to 12.
ProgramSpec make_program(ProgramId id);

struct SimConfig {
    uint64_t seed = 42;
    double amplitude_noise_sigma = 0.1;
    int timing_jitter_max = 2;
    int start_jitter_max = 12;
    double interrupt_probability = 0.10;
    int interrupt_burst_min = 24;
    int interrupt_burst_max = 48;
    int os_preamble_len = 160;
    int os_epilogue_len = 160;
    int traces_per_input = 200;
    double data_dependent_amplitude = 0.12;
    double immediate_leak_amplitude = 2.4;
    double drift_sigma = 0.04;
    double sample_rate_hz = 1e9;
};

void validate(const SimConfig& cfg);
void validate(const ProgramSpec& spec);

PathId path_of_input(const ProgramSpec& spec, int input);

// One executed instruction: opcode, the 4-bit value it processes, and the
// 4-bit immediate it fetches (comparison constant for CMP, 0 otherwise).
struct ExecutedOp {
    Opcode opcode;
    uint8_t operand;
    uint8_t immediate;
};

// Operand/immediate assignment for each instruction of the program on the
// given input. Booleans are materialized as the nibbles 0x0 / 0xF.
std::vector<ExecutedOp> execute_program(const ProgramSpec& spec, int input);

Trace emit_trace(const ProgramSpec& spec, const SimConfig& cfg, int input, int trace_index);

TraceSet generate_corpus(const std::vector<ProgramSpec>& specs, const SimConfig& cfg);

// Deterministic OS activity surrounding the user program. Preamble values are
// indexed relative to the user-program start (j < 0), epilogue values relative
// to the user-program end (j >= 0); the kOsGapLen samples next to the user
// program are silent on both sides.
inline constexpr int kOsGapLen = 48;
inline constexpr int kFetchLen = 8;
inline constexpr double kFetchBaseAmplitude = 0.02;
inline constexpr double kInterruptAmplitude = 3.0;

float os_preamble_value(int j);
float os_epilogue_value(int j);

// The n pattern samples adjacent to the silent gap, for waveform matching.
Eigen::VectorXf os_preamble_template(int n);
Eigen::VectorXf os_epilogue_template(int n);

} // namespace emids
