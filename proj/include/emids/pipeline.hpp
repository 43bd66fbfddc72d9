#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "emids/evaluation.hpp"
#include "emids/ids.hpp"
#include "emids/model_io.hpp"
#include "emids/preprocess.hpp"
#include "emids/simulator.hpp"

namespace emids {

enum class SplitPart : uint8_t { Fit = 0, Validation = 1, Test = 2 };

// Deterministic per-trace split from a hash of (seed, index).
SplitPart assign_split(uint64_t seed, size_t index, double fit_fraction,
                       double validation_fraction);

TraceSet split_subset(const TraceSet& ts, uint64_t seed, double fit_fraction,
                      double validation_fraction, SplitPart part);

struct TrainOptions {
    Grouping grouping = Grouping::PerProgram;
    int poi_count = 10;
    double fit_fraction = 0.70;
    double validation_fraction = 0.15;
    uint64_t seed = 42; // split hashing; recorded as corpus seed in trained_on
    ClassKey claimed_program{ProgramId::PrA, kUnknownInput, PathId::Unknown};
    enum class ThresholdPolicy : uint8_t { Eer = 0, FixedFar = 1 } threshold_policy =
        ThresholdPolicy::Eer;
    double fixed_far = 0.01;
    // layer-1 profiling: OS waveform template length and match floor. The
    // template must fit inside the captured OS window minus the silent gap,
    // so the default stays below the shortest supported preamble.
    int os_template_len = 96;
    double min_corr = 0.5;
};

struct TrainReport {
    size_t input_traces = 0;
    size_t no_anchor = 0;
    size_t discarded = 0;
    size_t fit_traces = 0;
    size_t validation_traces = 0;
    double discard_fraction = 0;
    double validation_eer = 0;
    double threshold = 0;
    bool threshold_from_impostors = false;
    int baseline_runtime = 0;
    int runtime_tolerance = 0;
};

struct TrainResult {
    ModelFile model; // multivariate payload with IDS profile block
    TrainReport report;
};

// Full training chain: align, filter, LDA, pooled templates, threshold on the
// validation split, IDS profile derivation. The claimed program's traces
// provide the genuine validation scores; everything else is impostor.
TrainResult train_pipeline(const TraceSet& raw, const AlignmentConfig& align_cfg,
                           const FilterConfig& filter_cfg, const TrainOptions& opts);

struct ReproduceMetrics {
    // verification EERs per method and attack
    double eer_sad_prb = 0, eer_sad_prc = 0;
    double eer_xcorr_prb = 0, eer_xcorr_prc = 0;
    double eer_mv_prb = 0, eer_mv_prc = 0;
    // multivariate classification accuracy, held-out traces
    double acc_prb = 0; // over true {PrA, PrB}
    double acc_prc = 0; // over true {PrA, PrC}
    // per-input simple templates on PrA, one prediction set scored two ways
    double perinput_acc = 0;
    double perpath_acc = 0;
    double samepath_acc = 0;    // within-path restricted classification, pooled
    double samepath_chance = 0; // pooled chance level for the same suites
    std::map<std::string, double> samepath_acc_by_path;
    std::map<std::string, double> samepath_chance_by_path;
    // preprocessing bookkeeping
    double discard_fraction = 0;
    size_t no_anchor = 0;
    size_t corpus_traces = 0;
    double validation_eer = 0;
    double threshold = 0;
};

struct ReproduceOptions {
    SimConfig sim;
    AlignmentConfig align;
    FilterConfig filter;
    TrainOptions train;
    std::string out_dir; // summary JSON + SVG plots land here; empty = no files
};

struct ReproduceResult {
    ReproduceMetrics metrics;
    std::vector<std::string> failures; // violated orderings, empty when all hold
    std::string summary_json;
};

ReproduceResult run_reproduce(const ReproduceOptions& opts);

// Score a trace set against a claimed class: genuine flag from the label.
ScoreSet collect_genuine_scores(const TraceSet& aligned_test, const TemplateModel& model,
                                const ClassKey& claimed);

} // namespace emids
