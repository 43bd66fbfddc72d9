#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "emids/trace.hpp"

namespace emids {

class score_undefined : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class TemplateKind : uint8_t { Mean = 0, Median = 1 };
enum class SimpleMetric : uint8_t { SAD = 0, XCORR = 1 };

std::string to_string(TemplateKind k);
std::string to_string(SimpleMetric m);

struct SimpleTemplate {
    TemplateKind kind = TemplateKind::Mean;
    ClassKey class_key;
    Eigen::VectorXf reference;
    uint32_t train_count = 0;
};

// The key a trace contributes to under the grouping: program only, program
// plus input, or program plus path.
ClassKey group_key(const TraceLabel& label, Grouping grouping);

// One template per group key, elementwise mean or median over the group's
// traces. Throws when any group has fewer than two traces.
std::vector<SimpleTemplate> build_simple(const TraceSet& ts, TemplateKind kind, Grouping grouping);

// Sum of absolute differences; lower is closer.
double sad_score(const Trace& t, const SimpleTemplate& tpl);

// Maximum over integer lags in [-max_lag, +max_lag] of the Pearson
// correlation between the shifted trace and the reference, overlap region
// only; higher is closer. Throws score_undefined on zero variance.
double xcorr_score(const Trace& t, const SimpleTemplate& tpl, int max_lag = 4);

// argmin of SAD or argmax of XCORR; first template wins ties.
ClassKey classify_simple(const Trace& t, const std::vector<SimpleTemplate>& templates,
                         SimpleMetric metric, int max_lag = 4);

} // namespace emids
