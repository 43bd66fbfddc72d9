#include "emids/ids.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace emids {

std::string to_string(Outcome o) {
    switch (o) {
        case Outcome::Genuine: return "genuine";
        case Outcome::TimingAnomaly: return "timing-anomaly";
        case Outcome::BehaviorAnomaly: return "behavior-anomaly";
        default: return "indeterminate";
    }
}

void validate(const IdsProfile& profile) {
    if (profile.runtime_tolerance < 0) throw std::invalid_argument("runtime_tolerance < 0");
    if (profile.baseline_runtime <= 0) throw std::invalid_argument("baseline_runtime <= 0");
    if (!profile.model.threshold_set) {
        throw std::invalid_argument("profile model has no decision threshold");
    }
    const bool claimed_known =
        std::any_of(profile.model.classes.begin(), profile.model.classes.end(),
                    [&](const TemplateClass& c) { return c.key == profile.claimed_program; });
    if (!claimed_known) throw std::invalid_argument("claimed program missing from model");
    if (profile.energy_factor <= 0) throw std::invalid_argument("energy_factor <= 0");
}

Verdict check_trace(const Trace& t, const IdsProfile& profile, const PreprocessConfigs& cfgs) {
    Verdict v;

    const auto runtime = extract_runtime(t, cfgs.os_epilogue_template, cfgs.os_preamble_template,
                                         cfgs.min_corr, cfgs.os_gap);
    if (!runtime) {
        v.outcome = Outcome::Indeterminate;
        return v;
    }
    v.layer1_runtime = *runtime;
    if (std::abs(*runtime - profile.baseline_runtime) > profile.runtime_tolerance) {
        v.outcome = Outcome::TimingAnomaly;
        return v;
    }

    const auto aligned = align_trace(t, cfgs.align);
    if (!aligned) {
        v.outcome = Outcome::Indeterminate;
        return v;
    }
    if (profile.energy_mad > 0) {
        const double energy = trace_energy(*aligned);
        if (std::abs(energy - profile.energy_median) >
            profile.energy_factor * profile.energy_mad) {
            v.outcome = Outcome::Indeterminate; // corrupted capture, not evidence of intrusion
            return v;
        }
    }

    double score;
    try {
        score = genuine_score(*aligned, profile.model, profile.claimed_program);
    } catch (const std::exception&) {
        v.outcome = Outcome::Indeterminate;
        return v;
    }
    v.layer2_score = score;
    v.threshold_used = profile.model.threshold;
    v.outcome = score < profile.model.threshold ? Outcome::BehaviorAnomaly : Outcome::Genuine;
    return v;
}

SpotCheckSummary spot_check(const TraceSet& ts, const IdsProfile& profile,
                            const PreprocessConfigs& cfgs, size_t k) {
    if (ts.traces.empty()) throw std::invalid_argument("spot_check: empty trace set");
    validate(profile);

    SpotCheckSummary sum;
    sum.n = ts.traces.size();
    sum.k = k > 0 ? k : static_cast<size_t>(
                            std::ceil(0.05 * static_cast<double>(sum.n))) + 1;
    size_t anomalies = 0;
    for (const Trace& t : ts.traces) {
        const Verdict v = check_trace(t, profile, cfgs);
        ++sum.counts[v.outcome];
        if (v.outcome == Outcome::TimingAnomaly || v.outcome == Outcome::BehaviorAnomaly) {
            ++anomalies;
        }
    }
    sum.alarm = anomalies >= sum.k;
    return sum;
}

} // namespace emids
