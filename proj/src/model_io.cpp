#include "emids/model_io.hpp"

#include <cstring>
#include <fstream>

#include "binary_io.hpp"

namespace emids {
namespace {

using namespace bio;
using E = emmd_error;

constexpr char kMagic[4] = {'E', 'M', 'M', 'D'};
constexpr uint16_t kVersion = 1;
constexpr uint8_t kKindSimple = 1;
constexpr uint8_t kKindMultivariate = 2;

void put_key(std::ostream& out, const ClassKey& k) {
    put_u8(out, static_cast<uint8_t>(k.program));
    put_u8(out, k.input);
    put_u8(out, static_cast<uint8_t>(k.path));
}

ClassKey get_key(std::istream& in) {
    ClassKey k;
    k.program = static_cast<ProgramId>(get_u8<E>(in, "class program"));
    k.input = get_u8<E>(in, "class input");
    k.path = static_cast<PathId>(get_u8<E>(in, "class path"));
    return k;
}

void put_vec_f64(std::ostream& out, const Eigen::VectorXd& v) {
    put_u32(out, static_cast<uint32_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) put_f64(out, v[i]);
}

Eigen::VectorXd get_vec_f64(std::istream& in, const char* what) {
    const uint32_t n = get_u32<E>(in, what);
    Eigen::VectorXd v(n);
    for (uint32_t i = 0; i < n; ++i) v[i] = get_f64<E>(in, what);
    return v;
}

void put_vec_f32(std::ostream& out, const Eigen::VectorXf& v) {
    put_u32(out, static_cast<uint32_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) put_f32(out, v[i]);
}

Eigen::VectorXf get_vec_f32(std::istream& in, const char* what) {
    const uint32_t n = get_u32<E>(in, what);
    Eigen::VectorXf v(n);
    for (uint32_t i = 0; i < n; ++i) v[i] = get_f32<E>(in, what);
    return v;
}

void put_mat_f64(std::ostream& out, const Eigen::MatrixXd& m) {
    put_u32(out, static_cast<uint32_t>(m.rows()));
    put_u32(out, static_cast<uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(out, m(r, c));
    }
}

Eigen::MatrixXd get_mat_f64(std::istream& in, const char* what) {
    const uint32_t rows = get_u32<E>(in, what);
    const uint32_t cols = get_u32<E>(in, what);
    Eigen::MatrixXd m(rows, cols);
    for (uint32_t r = 0; r < rows; ++r) {
        for (uint32_t c = 0; c < cols; ++c) m(r, c) = get_f64<E>(in, what);
    }
    return m;
}

} // namespace

ModelFile make_simple_model(std::vector<SimpleTemplate> templates, TrainedOn trained_on) {
    ModelFile f;
    f.payload_kind = kKindSimple;
    f.simple = std::move(templates);
    f.trained_on = trained_on;
    return f;
}

ModelFile make_multivariate_model(TemplateModel model) {
    ModelFile f;
    f.payload_kind = kKindMultivariate;
    f.trained_on = model.trained_on;
    f.multivariate = std::move(model);
    return f;
}

IdsProfile ids_profile_of(const ModelFile& f) {
    if (f.payload_kind != kKindMultivariate) {
        throw emmd_error("IDS profile requires a multivariate payload");
    }
    if (!f.profile) throw emmd_error("model file carries no IDS profile block");
    IdsProfile p;
    p.baseline_runtime = f.profile->baseline_runtime;
    p.runtime_tolerance = f.profile->runtime_tolerance;
    p.model = f.multivariate;
    p.claimed_program = f.profile->claimed_program;
    p.energy_median = f.profile->energy_median;
    p.energy_mad = f.profile->energy_mad;
    p.energy_factor = f.profile->energy_factor;
    return p;
}

PreprocessConfigs preprocess_configs_of(const ModelFile& f) {
    if (!f.profile) throw emmd_error("model file carries no IDS profile block");
    PreprocessConfigs c;
    c.align = f.profile->align;
    c.os_preamble_template = f.profile->os_preamble_template;
    c.os_epilogue_template = f.profile->os_epilogue_template;
    c.min_corr = f.profile->min_corr;
    c.os_gap = f.profile->os_gap;
    return c;
}

size_t write_model(const ModelFile& f, std::ostream& out) {
    const auto start = out.tellp();
    put_bytes(out, kMagic, 4);
    put_u16(out, kVersion);
    put_u8(out, f.payload_kind);
    put_u64(out, f.trained_on.corpus_seed);
    put_u32(out, f.trained_on.trace_count);
    put_f64(out, f.trained_on.sample_rate_hz);

    if (f.payload_kind == kKindSimple) {
        put_u32(out, static_cast<uint32_t>(f.simple.size()));
        for (const SimpleTemplate& t : f.simple) {
            put_u8(out, static_cast<uint8_t>(t.kind));
            put_key(out, t.class_key);
            put_u32(out, t.train_count);
            put_vec_f32(out, t.reference);
        }
    } else if (f.payload_kind == kKindMultivariate) {
        const TemplateModel& m = f.multivariate;
        put_vec_f64(out, m.projection.mean_global);
        put_mat_f64(out, m.projection.components);
        put_u32(out, static_cast<uint32_t>(m.classes.size()));
        for (const TemplateClass& c : m.classes) {
            put_key(out, c.key);
            put_vec_f64(out, c.mean);
        }
        put_mat_f64(out, m.pooled_covariance);
        put_mat_f64(out, m.pooled_precision);
        put_f64(out, m.log_det_cov);
        put_u8(out, m.threshold_set ? 1 : 0);
        put_f64(out, m.threshold);
    } else {
        throw emmd_error("unknown payload kind");
    }

    put_u8(out, f.profile ? 1 : 0);
    if (f.profile) {
        const auto& p = *f.profile;
        put_i32(out, p.baseline_runtime);
        put_i32(out, p.runtime_tolerance);
        put_key(out, p.claimed_program);
        put_f64(out, p.energy_median);
        put_f64(out, p.energy_mad);
        put_f64(out, p.energy_factor);
        put_i32(out, p.align.smoothing_window);
        put_f64(out, p.align.valley_threshold);
        put_f64(out, p.align.peak_threshold);
        put_i32(out, p.align.min_valley_len);
        put_i32(out, p.align.reference_index);
        put_i32(out, p.align.target_length);
        put_f64(out, p.filter.energy_deviation_factor);
        put_i32(out, p.filter.length_deviation_max);
        put_f64(out, p.min_corr);
        put_i32(out, p.os_gap);
        put_vec_f32(out, p.os_preamble_template);
        put_vec_f32(out, p.os_epilogue_template);
    }

    if (!out) throw emmd_error("write failed");
    return static_cast<size_t>(out.tellp() - start);
}

size_t write_model_file(const ModelFile& f, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw emmd_error("cannot open for writing: " + path);
    return write_model(f, os);
}

ModelFile read_model(std::istream& in) {
    char magic[4];
    get_bytes<E>(in, magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0) throw emmd_error("bad magic, not an EMMD file");
    const uint16_t version = get_u16<E>(in, "version");
    if (version != kVersion) throw emmd_error("unsupported version " + std::to_string(version));

    ModelFile f;
    f.payload_kind = get_u8<E>(in, "payload kind");
    f.trained_on.corpus_seed = get_u64<E>(in, "corpus seed");
    f.trained_on.trace_count = get_u32<E>(in, "trace count");
    f.trained_on.sample_rate_hz = get_f64<E>(in, "sample rate");

    if (f.payload_kind == kKindSimple) {
        const uint32_t count = get_u32<E>(in, "template count");
        f.simple.reserve(count);
        for (uint32_t i = 0; i < count; ++i) {
            SimpleTemplate t;
            t.kind = static_cast<TemplateKind>(get_u8<E>(in, "template kind"));
            t.class_key = get_key(in);
            t.train_count = get_u32<E>(in, "train count");
            t.reference = get_vec_f32(in, "template reference");
            f.simple.push_back(std::move(t));
        }
    } else if (f.payload_kind == kKindMultivariate) {
        TemplateModel& m = f.multivariate;
        m.projection.mean_global = get_vec_f64(in, "global mean");
        m.projection.components = get_mat_f64(in, "components");
        const uint32_t classes = get_u32<E>(in, "class count");
        m.classes.reserve(classes);
        for (uint32_t i = 0; i < classes; ++i) {
            TemplateClass c;
            c.key = get_key(in);
            c.mean = get_vec_f64(in, "class mean");
            m.classes.push_back(std::move(c));
        }
        m.pooled_covariance = get_mat_f64(in, "pooled covariance");
        m.pooled_precision = get_mat_f64(in, "pooled precision");
        m.log_det_cov = get_f64<E>(in, "log det");
        m.threshold_set = get_u8<E>(in, "threshold flag") != 0;
        m.threshold = get_f64<E>(in, "threshold");
        m.trained_on = f.trained_on;
    } else {
        throw emmd_error("unknown payload kind " + std::to_string(f.payload_kind));
    }

    if (get_u8<E>(in, "profile flag") != 0) {
        ModelFile::ProfileBlock p;
        p.baseline_runtime = get_i32<E>(in, "baseline runtime");
        p.runtime_tolerance = get_i32<E>(in, "runtime tolerance");
        p.claimed_program = get_key(in);
        p.energy_median = get_f64<E>(in, "energy median");
        p.energy_mad = get_f64<E>(in, "energy mad");
        p.energy_factor = get_f64<E>(in, "energy factor");
        p.align.smoothing_window = get_i32<E>(in, "smoothing window");
        p.align.valley_threshold = get_f64<E>(in, "valley threshold");
        p.align.peak_threshold = get_f64<E>(in, "peak threshold");
        p.align.min_valley_len = get_i32<E>(in, "min valley len");
        p.align.reference_index = get_i32<E>(in, "reference index");
        p.align.target_length = get_i32<E>(in, "target length");
        p.filter.energy_deviation_factor = get_f64<E>(in, "filter energy factor");
        p.filter.length_deviation_max = get_i32<E>(in, "filter length max");
        p.min_corr = get_f64<E>(in, "min corr");
        p.os_gap = get_i32<E>(in, "os gap");
        p.os_preamble_template = get_vec_f32(in, "preamble template");
        p.os_epilogue_template = get_vec_f32(in, "epilogue template");
        f.profile = std::move(p);
    }
    return f;
}

ModelFile read_model_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw emmd_error("cannot open for reading: " + path);
    return read_model(is);
}

} // namespace emids
