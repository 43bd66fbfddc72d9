#include "emids/trace.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace emids {

void validate_trace(const Trace& t, size_t index) {
    for (Eigen::Index i = 0; i < t.samples.size(); ++i) {
        if (!std::isfinite(t.samples[i])) {
            throw std::invalid_argument("trace " + std::to_string(index) +
                                        ": non-finite sample at offset " + std::to_string(i));
        }
    }
    if (t.marks) {
        const auto len = static_cast<uint32_t>(t.samples.size());
        if (t.marks->start > t.marks->end || t.marks->end > len) {
            throw std::invalid_argument("trace " + std::to_string(index) +
                                        ": trigger marks [" + std::to_string(t.marks->start) +
                                        ", " + std::to_string(t.marks->end) +
                                        ") outside trace of length " + std::to_string(len));
        }
    }
}

void validate_set(const TraceSet& ts) {
    if (!(ts.sample_rate_hz > 0.0) || !std::isfinite(ts.sample_rate_hz)) {
        throw std::invalid_argument("sample rate must be finite and positive");
    }
    for (size_t i = 0; i < ts.traces.size(); ++i) validate_trace(ts.traces[i], i);
}

Trace slice_to_region(const Trace& t) {
    if (!t.marks) throw std::invalid_argument("slice_to_region: trace has no trigger marks");
    const auto& m = *t.marks;
    Trace out;
    out.samples = t.samples.segment(m.start, m.end - m.start);
    out.label = t.label;
    out.marks = TriggerMarks{0, m.end - m.start};
    return out;
}

} // namespace emids
