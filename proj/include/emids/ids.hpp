#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>

#include "emids/preprocess.hpp"
#include "emids/templates.hpp"
#include "emids/trace.hpp"

namespace emids {

enum class DecisionPolicy : uint8_t { AlertOnFirstFailure = 0 };

struct IdsProfile {
    int baseline_runtime = 0;
    int runtime_tolerance = 0;
    TemplateModel model;
    ClassKey claimed_program;
    DecisionPolicy decision_policy = DecisionPolicy::AlertOnFirstFailure;
    // capture-plausibility bounds learned from the training set; traces whose
    // energy falls outside median +- factor x MAD are reported Indeterminate
    // (interrupt-corrupted capture, not an intrusion)
    double energy_median = 0;
    double energy_mad = 0;
    double energy_factor = 8.0;
};

void validate(const IdsProfile& profile);

// Everything check_trace needs to run the capture chain on a raw trace.
struct PreprocessConfigs {
    AlignmentConfig align;
    Eigen::VectorXf os_preamble_template;
    Eigen::VectorXf os_epilogue_template;
    double min_corr = 0.5;
    int os_gap = 48;
};

enum class Outcome : uint8_t { Genuine = 0, TimingAnomaly = 1, BehaviorAnomaly = 2, Indeterminate = 3 };

std::string to_string(Outcome o);

struct Verdict {
    Outcome outcome = Outcome::Indeterminate;
    int layer1_runtime = -1; // -1 when runtime extraction failed
    std::optional<double> layer2_score;
    std::optional<double> threshold_used;
};

// Layer 1: runtime via trigger marks or OS-waveform matching; outside
// tolerance -> TimingAnomaly, layer 2 never consulted. Layer 2: align, check
// capture plausibility, then genuine_score against the claimed class's
// threshold. Every failure maps to an outcome; never throws on bad captures.
Verdict check_trace(const Trace& t, const IdsProfile& profile, const PreprocessConfigs& cfgs);

struct SpotCheckSummary {
    std::map<Outcome, size_t> counts;
    size_t n = 0;
    size_t k = 0; // alarm threshold actually used
    bool alarm = false;
};

// Runs check_trace per trace; alarm when >= k anomalies (timing or behavior).
// Indeterminate never counts toward k. k = 0 selects ceil(0.05 n) + 1.
SpotCheckSummary spot_check(const TraceSet& ts, const IdsProfile& profile,
                            const PreprocessConfigs& cfgs, size_t k = 0);

} // namespace emids
