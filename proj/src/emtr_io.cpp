#include "emids/emtr_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "binary_io.hpp"

namespace emids {
namespace {

constexpr char kMagic[4] = {'E', 'M', 'T', 'R'};
constexpr uint16_t kVersion = 1;

constexpr uint8_t kFlagDiscarded = 0x01;
constexpr uint8_t kFlagMarks = 0x02;

} // namespace

size_t write_traceset(const TraceSet& ts, std::ostream& out) {
    using namespace bio;
    validate_set(ts);
    const auto start = out.tellp();

    put_bytes(out, kMagic, 4);
    put_u16(out, kVersion);
    put_u32(out, static_cast<uint32_t>(ts.traces.size()));
    put_f64(out, ts.sample_rate_hz);

    for (const Trace& t : ts.traces) {
        put_u32(out, static_cast<uint32_t>(t.samples.size()));
        put_u8(out, static_cast<uint8_t>(t.label.program));
        put_u8(out, t.label.input);
        put_u8(out, static_cast<uint8_t>(t.label.path));
        uint8_t flags = 0;
        if (t.label.discarded) flags |= kFlagDiscarded;
        if (t.marks) flags |= kFlagMarks;
        put_u8(out, flags);
        if (t.marks) {
            put_u32(out, t.marks->start);
            put_u32(out, t.marks->end);
        }
        for (Eigen::Index i = 0; i < t.samples.size(); ++i) put_f32(out, t.samples[i]);
    }

    if (!out) throw emtr_error("write failed");
    return static_cast<size_t>(out.tellp() - start);
}

size_t write_traceset_file(const TraceSet& ts, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw emtr_error("cannot open for writing: " + path);
    return write_traceset(ts, f);
}

TraceSet read_traceset(std::istream& in) {
    using namespace bio;
    using E = emtr_error;

    char magic[4];
    get_bytes<E>(in, magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw emtr_error("bad magic, not an EMTR file");
    }
    const uint16_t version = get_u16<E>(in, "version");
    if (version != kVersion) {
        throw emtr_error("unsupported version " + std::to_string(version));
    }

    TraceSet ts;
    const uint32_t count = get_u32<E>(in, "trace count");
    ts.sample_rate_hz = get_f64<E>(in, "sample rate");
    if (!(ts.sample_rate_hz > 0.0) || !std::isfinite(ts.sample_rate_hz)) {
        throw emtr_error("invalid sample rate in header");
    }

    ts.traces.reserve(count);
    for (uint32_t ti = 0; ti < count; ++ti) {
        Trace t;
        const uint32_t len = get_u32<E>(in, "record length");
        t.label.program = static_cast<ProgramId>(get_u8<E>(in, "program id"));
        t.label.input = get_u8<E>(in, "input value");
        t.label.path = static_cast<PathId>(get_u8<E>(in, "path id"));
        const uint8_t flags = get_u8<E>(in, "flags");
        t.label.discarded = (flags & kFlagDiscarded) != 0;
        if (flags & kFlagMarks) {
            TriggerMarks m;
            m.start = get_u32<E>(in, "mark start");
            m.end = get_u32<E>(in, "mark end");
            t.marks = m;
        }
        t.samples.resize(len);
        for (uint32_t i = 0; i < len; ++i) {
            const float v = get_f32<E>(in, "sample");
            if (!std::isfinite(v)) {
                throw emtr_error("trace " + std::to_string(ti) + ": non-finite sample at offset " +
                                 std::to_string(i));
            }
            t.samples[i] = v;
        }
        if (t.marks && (t.marks->start > t.marks->end || t.marks->end > len)) {
            throw emtr_error("trace " + std::to_string(ti) + ": trigger marks out of range");
        }
        ts.traces.push_back(std::move(t));
    }
    return ts;
}

TraceSet read_traceset_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw emtr_error("cannot open for reading: " + path);
    return read_traceset(f);
}

std::string manifest_json(const TraceSet& ts) {
    std::map<std::string, size_t> per_program;
    size_t discarded = 0, with_marks = 0;
    for (const Trace& t : ts.traces) {
        ++per_program[to_string(t.label.program)];
        if (t.label.discarded) ++discarded;
        if (t.marks) ++with_marks;
    }
    std::ostringstream os;
    os << "{\"trace_count\":" << ts.traces.size()
       << ",\"sample_rate_hz\":" << ts.sample_rate_hz
       << ",\"aligned\":" << (ts.aligned ? "true" : "false")
       << ",\"discarded\":" << discarded
       << ",\"with_trigger_marks\":" << with_marks
       << ",\"per_program\":{";
    bool first = true;
    for (const auto& [name, n] : per_program) {
        if (!first) os << ",";
        first = false;
        os << "\"" << name << "\":" << n;
    }
    os << "}}";
    return os.str();
}

} // namespace emids
