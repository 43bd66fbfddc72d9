#include "emids/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace emids {

namespace {

using json = nlohmann::ordered_json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw std::invalid_argument(where + " must be a JSON object");
    for (const auto& item : j.items()) {
        if (!allowed.count(item.key()))
            throw std::invalid_argument("unknown key \"" + item.key() + "\" in " + where);
    }
}

template <typename T>
void get_to(const json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) it->get_to(out);
}

void apply_cfg(const json& j, SimConfig& c) {
    check_keys(j,
               {"seed", "amplitude_noise_sigma", "timing_jitter_max", "start_jitter_max",
                "interrupt_probability", "interrupt_burst_min", "interrupt_burst_max",
                "os_preamble_len", "os_epilogue_len", "traces_per_input",
                "data_dependent_amplitude", "immediate_leak_amplitude", "drift_sigma",
                "sample_rate_hz"},
               "sim");
    get_to(j, "seed", c.seed);
    get_to(j, "amplitude_noise_sigma", c.amplitude_noise_sigma);
    get_to(j, "timing_jitter_max", c.timing_jitter_max);
    get_to(j, "start_jitter_max", c.start_jitter_max);
    get_to(j, "interrupt_probability", c.interrupt_probability);
    get_to(j, "interrupt_burst_min", c.interrupt_burst_min);
    get_to(j, "interrupt_burst_max", c.interrupt_burst_max);
    get_to(j, "os_preamble_len", c.os_preamble_len);
    get_to(j, "os_epilogue_len", c.os_epilogue_len);
    get_to(j, "traces_per_input", c.traces_per_input);
    get_to(j, "data_dependent_amplitude", c.data_dependent_amplitude);
    get_to(j, "immediate_leak_amplitude", c.immediate_leak_amplitude);
    get_to(j, "drift_sigma", c.drift_sigma);
    get_to(j, "sample_rate_hz", c.sample_rate_hz);
}

json to_json(const SimConfig& c) {
    return json{{"seed", c.seed},
                {"amplitude_noise_sigma", c.amplitude_noise_sigma},
                {"timing_jitter_max", c.timing_jitter_max},
                {"start_jitter_max", c.start_jitter_max},
                {"interrupt_probability", c.interrupt_probability},
                {"interrupt_burst_min", c.interrupt_burst_min},
                {"interrupt_burst_max", c.interrupt_burst_max},
                {"os_preamble_len", c.os_preamble_len},
                {"os_epilogue_len", c.os_epilogue_len},
                {"traces_per_input", c.traces_per_input},
                {"data_dependent_amplitude", c.data_dependent_amplitude},
                {"immediate_leak_amplitude", c.immediate_leak_amplitude},
                {"drift_sigma", c.drift_sigma},
                {"sample_rate_hz", c.sample_rate_hz}};
}

void apply_cfg(const json& j, AlignmentConfig& c) {
    check_keys(j,
               {"smoothing_window", "valley_threshold", "peak_threshold", "min_valley_len",
                "reference_index", "target_length"},
               "align");
    get_to(j, "smoothing_window", c.smoothing_window);
    get_to(j, "valley_threshold", c.valley_threshold);
    get_to(j, "peak_threshold", c.peak_threshold);
    get_to(j, "min_valley_len", c.min_valley_len);
    get_to(j, "reference_index", c.reference_index);
    get_to(j, "target_length", c.target_length);
}

json to_json(const AlignmentConfig& c) {
    return json{{"smoothing_window", c.smoothing_window},
                {"valley_threshold", c.valley_threshold},
                {"peak_threshold", c.peak_threshold},
                {"min_valley_len", c.min_valley_len},
                {"reference_index", c.reference_index},
                {"target_length", c.target_length}};
}

void apply_cfg(const json& j, FilterConfig& c) {
    check_keys(j, {"energy_deviation_factor", "length_deviation_max"}, "filter");
    get_to(j, "energy_deviation_factor", c.energy_deviation_factor);
    get_to(j, "length_deviation_max", c.length_deviation_max);
}

json to_json(const FilterConfig& c) {
    return json{{"energy_deviation_factor", c.energy_deviation_factor},
                {"length_deviation_max", c.length_deviation_max}};
}

void apply_cfg(const json& j, TrainOptions& c) {
    check_keys(j,
               {"grouping", "poi_count", "fit_fraction", "validation_fraction", "seed",
                "claimed_program", "threshold_policy", "fixed_far", "os_template_len",
                "min_corr"},
               "train");
    if (auto it = j.find("grouping"); it != j.end())
        c.grouping = grouping_from_string(it->get<std::string>());
    get_to(j, "poi_count", c.poi_count);
    get_to(j, "fit_fraction", c.fit_fraction);
    get_to(j, "validation_fraction", c.validation_fraction);
    get_to(j, "seed", c.seed);
    if (auto it = j.find("claimed_program"); it != j.end())
        c.claimed_program = ClassKey{program_from_string(it->get<std::string>()), kUnknownInput,
                                     PathId::Unknown};
    if (auto it = j.find("threshold_policy"); it != j.end()) {
        const std::string s = it->get<std::string>();
        if (s == "eer")
            c.threshold_policy = TrainOptions::ThresholdPolicy::Eer;
        else if (s == "fixed_far")
            c.threshold_policy = TrainOptions::ThresholdPolicy::FixedFar;
        else
            throw std::invalid_argument("threshold_policy must be \"eer\" or \"fixed_far\"");
    }
    get_to(j, "fixed_far", c.fixed_far);
    get_to(j, "os_template_len", c.os_template_len);
    get_to(j, "min_corr", c.min_corr);
}

json to_json(const TrainOptions& c) {
    return json{{"grouping", to_string(c.grouping)},
                {"poi_count", c.poi_count},
                {"fit_fraction", c.fit_fraction},
                {"validation_fraction", c.validation_fraction},
                {"seed", c.seed},
                {"claimed_program", to_string(c.claimed_program.program)},
                {"threshold_policy",
                 c.threshold_policy == TrainOptions::ThresholdPolicy::Eer ? "eer" : "fixed_far"},
                {"fixed_far", c.fixed_far},
                {"os_template_len", c.os_template_len},
                {"min_corr", c.min_corr}};
}

void apply_cfg(const json& j, MonitorOptions& c) {
    check_keys(j, {"k", "fail_on_alarm"}, "monitor");
    get_to(j, "k", c.k);
    get_to(j, "fail_on_alarm", c.fail_on_alarm);
}

json to_json(const MonitorOptions& c) {
    return json{{"k", c.k}, {"fail_on_alarm", c.fail_on_alarm}};
}

void apply_cfg(const json& j, PipelinePaths& c) {
    check_keys(j, {"corpus", "aligned", "model", "report", "scores", "verdicts", "out_dir"},
               "paths");
    get_to(j, "corpus", c.corpus);
    get_to(j, "aligned", c.aligned);
    get_to(j, "model", c.model);
    get_to(j, "report", c.report);
    get_to(j, "scores", c.scores);
    get_to(j, "verdicts", c.verdicts);
    get_to(j, "out_dir", c.out_dir);
}

json to_json(const PipelinePaths& c) {
    return json{{"corpus", c.corpus},   {"aligned", c.aligned}, {"model", c.model},
                {"report", c.report},   {"scores", c.scores},   {"verdicts", c.verdicts},
                {"out_dir", c.out_dir}};
}

} // namespace

PipelineConfig parse_pipeline_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(j, {"seed", "programs", "sim", "align", "filter", "train", "monitor", "paths"},
               "config");
    PipelineConfig cfg;
    if (auto it = j.find("seed"); it != j.end()) {
        it->get_to(cfg.seed);
        cfg.sim.seed = cfg.seed;
        cfg.train.seed = cfg.seed;
    }
    get_to(j, "programs", cfg.programs);
    try {
        if (auto it = j.find("sim"); it != j.end()) apply_cfg(*it, cfg.sim);
        if (auto it = j.find("align"); it != j.end()) apply_cfg(*it, cfg.align);
        if (auto it = j.find("filter"); it != j.end()) apply_cfg(*it, cfg.filter);
        if (auto it = j.find("train"); it != j.end()) apply_cfg(*it, cfg.train);
        if (auto it = j.find("monitor"); it != j.end()) apply_cfg(*it, cfg.monitor);
        if (auto it = j.find("paths"); it != j.end()) apply_cfg(*it, cfg.paths);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config field has the wrong type: ") + e.what());
    }
    for (const auto& p : cfg.programs) program_from_string(p);
    return cfg;
}

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_pipeline_config(ss.str());
}

std::string dump_pipeline_config(const PipelineConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["programs"] = cfg.programs;
    j["sim"] = to_json(cfg.sim);
    j["align"] = to_json(cfg.align);
    j["filter"] = to_json(cfg.filter);
    j["train"] = to_json(cfg.train);
    j["monitor"] = to_json(cfg.monitor);
    j["paths"] = to_json(cfg.paths);
    return j.dump(2) + "\n";
}

void save_pipeline_config(const PipelineConfig& cfg, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << dump_pipeline_config(cfg);
    if (!out) throw std::runtime_error("write failed: " + path);
}

} // namespace emids
