#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "emids/class_key.hpp"

namespace emids {

struct TraceLabel {
    ProgramId program = ProgramId::Unknown;
    uint8_t input = kUnknownInput;
    PathId path = PathId::Unknown;
    bool discarded = false;
};

// Sample indices [start, end) of the user-program region, as captured by a
// hardware trigger line. Absent when only the raw waveform is available.
struct TriggerMarks {
    uint32_t start = 0;
    uint32_t end = 0;
};

struct Trace {
    Eigen::VectorXf samples;
    TraceLabel label;
    std::optional<TriggerMarks> marks;
};

struct TraceSet {
    double sample_rate_hz = 1e9;
    bool aligned = false;
    std::vector<Trace> traces;
};

// Throws std::invalid_argument on non-finite samples or marks outside the
// trace. msg names the offending trace by index.
void validate_trace(const Trace& t, size_t index);
void validate_set(const TraceSet& ts);

// Restrict a trace to its trigger-marked region. Throws if no marks.
Trace slice_to_region(const Trace& t);

} // namespace emids
