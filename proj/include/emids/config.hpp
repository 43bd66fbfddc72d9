#pragma once

#include <string>
#include <vector>

#include "emids/pipeline.hpp"

namespace emids {

struct MonitorOptions {
    size_t k = 0; // 0 selects the spot_check default
    bool fail_on_alarm = false;
};

struct PipelinePaths {
    std::string corpus = "out/corpus.emtr";
    std::string aligned = "out/aligned.emtr";
    std::string model = "out/model.emmd";
    std::string report = "out/report.json";
    std::string scores = "out/scores.json";
    std::string verdicts = "out/verdicts.json";
    std::string out_dir = "out";
};

struct PipelineConfig {
    uint64_t seed = 42; // propagates to sim.seed and train.seed unless they override
    std::vector<std::string> programs = {"PrA", "PrB", "PrC"};
    SimConfig sim;
    AlignmentConfig align;
    FilterConfig filter;
    TrainOptions train;
    MonitorOptions monitor;
    PipelinePaths paths;
};

// Parse a JSON config; absent keys keep their defaults, unknown keys are
// rejected by name.
PipelineConfig parse_pipeline_config(const std::string& json_text);
PipelineConfig load_pipeline_config(const std::string& path);

std::string dump_pipeline_config(const PipelineConfig& cfg);
void save_pipeline_config(const PipelineConfig& cfg, const std::string& path);

} // namespace emids
