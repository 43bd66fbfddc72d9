#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "emids/distinguishers.hpp"
#include "emids/ids.hpp"
#include "emids/templates.hpp"

namespace emids {

class emmd_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Binary model envelope, little-endian:
//   "EMMD" | version u16 = 1 | payload kind u8 (1 = Simple, 2 = Multivariate)
//   | trained_on {seed u64, trace_count u32, sample_rate f64}
//   | payload | profile flag u8 | optional IDS profile block.
// Matrices are row-major f64.

struct ModelFile {
    uint8_t payload_kind = 0; // 1 or 2
    TrainedOn trained_on;
    std::vector<SimpleTemplate> simple;   // payload kind 1
    TemplateModel multivariate;           // payload kind 2
    // profile block: IDS fields + the preprocessing chain the profile expects
    struct ProfileBlock {
        int32_t baseline_runtime = 0;
        int32_t runtime_tolerance = 0;
        ClassKey claimed_program;
        double energy_median = 0;
        double energy_mad = 0;
        double energy_factor = 8.0;
        AlignmentConfig align;
        FilterConfig filter;
        double min_corr = 0.5;
        int32_t os_gap = 48;
        Eigen::VectorXf os_preamble_template;
        Eigen::VectorXf os_epilogue_template;
    };
    std::optional<ProfileBlock> profile;
};

ModelFile make_simple_model(std::vector<SimpleTemplate> templates, TrainedOn trained_on);
ModelFile make_multivariate_model(TemplateModel model);

// Reconstruct runnable IDS pieces from a loaded file. Throws when the file
// carries no profile block or no multivariate payload.
IdsProfile ids_profile_of(const ModelFile& f);
PreprocessConfigs preprocess_configs_of(const ModelFile& f);

size_t write_model(const ModelFile& f, std::ostream& out);
size_t write_model_file(const ModelFile& f, const std::string& path);
ModelFile read_model(std::istream& in);
ModelFile read_model_file(const std::string& path);

} // namespace emids
