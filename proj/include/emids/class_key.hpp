#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace emids {

enum class ProgramId : uint8_t { PrA = 0, PrB = 1, PrC = 2, Unknown = 255 };
enum class PathId : uint8_t { Low = 0, Ok = 1, High = 2, Unknown = 255 };

inline constexpr uint8_t kUnknownInput = 255;

inline std::string to_string(ProgramId p) {
    switch (p) {
        case ProgramId::PrA: return "PrA";
        case ProgramId::PrB: return "PrB";
        case ProgramId::PrC: return "PrC";
        default: return "Unknown";
    }
}

inline std::string to_string(PathId p) {
    switch (p) {
        case PathId::Low: return "Low";
        case PathId::Ok: return "Ok";
        case PathId::High: return "High";
        default: return "Unknown";
    }
}

inline ProgramId program_from_string(const std::string& s) {
    if (s == "PrA") return ProgramId::PrA;
    if (s == "PrB") return ProgramId::PrB;
    if (s == "PrC") return ProgramId::PrC;
    if (s == "Unknown") return ProgramId::Unknown;
    throw std::invalid_argument("unknown program name: " + s);
}

// Identifies a template class. Fields left at their Unknown value are
// wildcards, so {PrA, 255, 255} keys a whole-program class while
// {PrA, 7, 255} keys the traces of input 7.
struct ClassKey {
    ProgramId program = ProgramId::Unknown;
    uint8_t input = kUnknownInput;
    PathId path = PathId::Unknown;

    auto operator<=>(const ClassKey&) const = default;
};

inline std::string to_string(const ClassKey& k) {
    std::string s = to_string(k.program);
    if (k.input != kUnknownInput) s += "/in" + std::to_string(static_cast<int>(k.input));
    if (k.path != PathId::Unknown) s += "/" + to_string(k.path);
    return s;
}

// How traces are pooled into template classes.
enum class Grouping : uint8_t { PerProgram = 0, PerInput = 1, PerPath = 2 };

inline std::string to_string(Grouping g) {
    switch (g) {
        case Grouping::PerProgram: return "per-program";
        case Grouping::PerInput: return "per-input";
        default: return "per-path";
    }
}

inline Grouping grouping_from_string(const std::string& s) {
    if (s == "per-program") return Grouping::PerProgram;
    if (s == "per-input") return Grouping::PerInput;
    if (s == "per-path") return Grouping::PerPath;
    throw std::invalid_argument("unknown grouping: " + s);
}

} // namespace emids
