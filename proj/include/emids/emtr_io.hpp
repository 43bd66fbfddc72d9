#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "emids/trace.hpp"

namespace emids {

class emtr_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Binary trace container, little-endian:
//   "EMTR" | version u16 = 1 | trace_count u32 | sample_rate_hz f64 | records.
// Record: samples_len u32 | program u8 | input u8 | path u8 | flags u8
//         (bit 0 = discarded, bit 1 = trigger marks present)
//         | [start u32, end u32] | samples f32 x samples_len.
// Unknown program/input/path encode as 255.

inline constexpr size_t kEmtrHeaderSize = 18;

size_t write_traceset(const TraceSet& ts, std::ostream& out);
size_t write_traceset_file(const TraceSet& ts, const std::string& path);

TraceSet read_traceset(std::istream& in);
TraceSet read_traceset_file(const std::string& path);

// Derived human-readable summary (count, rate, label histogram) as JSON text.
std::string manifest_json(const TraceSet& ts);

} // namespace emids
