#pragma once

#include <Eigen/Dense>
#include <optional>

#include "emids/trace.hpp"

namespace emids {

struct AlignmentConfig {
    int smoothing_window = 8;
    double valley_threshold = 0.15;
    double peak_threshold = 0.40;
    int min_valley_len = 12;
    int reference_index = 48;
    int target_length = 544;
};

struct FilterConfig {
    double energy_deviation_factor = 8.0;
    int length_deviation_max = 64;
};

void validate(const AlignmentConfig& cfg);
void validate(const FilterConfig& cfg);

// Centered moving average; the window shrinks at the edges.
Eigen::VectorXf moving_average(const Eigen::VectorXf& x, int window);

// Index of the first smoothed sample above peak_threshold following the first
// run of at least min_valley_len smoothed samples below valley_threshold.
std::optional<int> find_anchor(const Eigen::VectorXf& smoothed, const AlignmentConfig& cfg);

// Shifts the raw trace so the anchor lands at reference_index, then pads with
// edge values / truncates to target_length. Trigger marks are remapped.
// Returns nothing when no valley-then-peak anchor exists.
std::optional<Trace> align_trace(const Trace& t, const AlignmentConfig& cfg);

struct AlignResult {
    TraceSet aligned;
    size_t no_anchor = 0;
};

AlignResult align_set(const TraceSet& ts, const AlignmentConfig& cfg);

struct FilterResult {
    TraceSet kept;
    size_t discarded = 0;
};

// Discards traces whose energy over the user-program region deviates from the
// set median by more than energy_deviation_factor x MAD. With keep_discarded,
// traces stay in the set with their discarded flag raised instead.
FilterResult filter_interrupted(const TraceSet& ts, const FilterConfig& cfg,
                                bool keep_discarded = false);

double trace_energy(const Trace& t);

// Layer-1 runtime in samples: trigger marks when present, otherwise the gap
// between the best normalized-cross-correlation matches of the OS preamble
// and epilogue templates. Returns nothing when either correlation peak is
// below min_corr.
std::optional<int> extract_runtime(const Trace& t, const Eigen::VectorXf& os_epilogue_template,
                                   const Eigen::VectorXf& os_preamble_template,
                                   double min_corr = 0.5, int os_gap = 48);

} // namespace emids
