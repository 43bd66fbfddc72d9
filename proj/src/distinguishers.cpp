#include "emids/distinguishers.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace emids {
namespace {

double lagged_pearson(const Eigen::VectorXf& x, const Eigen::VectorXf& ref, int lag) {
    // overlap of x shifted by `lag` against ref
    const int n = static_cast<int>(x.size());
    const int from = std::max(0, -lag);
    const int to = std::min(n, n - lag); // ref index range [from, to)
    const int m = to - from;
    double sx = 0, sr = 0, sxx = 0, srr = 0, sxr = 0;
    for (int i = from; i < to; ++i) {
        const double xv = x[i + lag];
        const double rv = ref[i];
        sx += xv;
        sr += rv;
        sxx += xv * xv;
        srr += rv * rv;
        sxr += xv * rv;
    }
    const double vx = sxx - sx * sx / m;
    const double vr = srr - sr * sr / m;
    if (vx <= 0 || vr <= 0) {
        throw score_undefined("zero-variance trace or reference in correlation window");
    }
    return (sxr - sx * sr / m) / std::sqrt(vx * vr);
}

} // namespace

std::string to_string(TemplateKind k) { return k == TemplateKind::Mean ? "mean" : "median"; }
std::string to_string(SimpleMetric m) { return m == SimpleMetric::SAD ? "sad" : "xcorr"; }

ClassKey group_key(const TraceLabel& label, Grouping grouping) {
    switch (grouping) {
        case Grouping::PerProgram: return {label.program, kUnknownInput, PathId::Unknown};
        case Grouping::PerInput: return {label.program, label.input, PathId::Unknown};
        default: return {label.program, kUnknownInput, label.path};
    }
}

std::vector<SimpleTemplate> build_simple(const TraceSet& ts, TemplateKind kind, Grouping grouping) {
    if (ts.traces.empty()) throw std::invalid_argument("build_simple: empty trace set");
    const Eigen::Index len = ts.traces.front().samples.size();

    std::map<ClassKey, std::vector<const Trace*>> groups;
    for (const Trace& t : ts.traces) {
        if (t.samples.size() != len) {
            throw std::invalid_argument("build_simple: traces must share one aligned length");
        }
        groups[group_key(t.label, grouping)].push_back(&t);
    }

    std::vector<SimpleTemplate> out;
    out.reserve(groups.size());
    for (const auto& [key, members] : groups) {
        if (members.size() < 2) {
            throw std::invalid_argument("build_simple: group " + to_string(key) +
                                        " has fewer than 2 traces");
        }
        SimpleTemplate tpl;
        tpl.kind = kind;
        tpl.class_key = key;
        tpl.train_count = static_cast<uint32_t>(members.size());
        tpl.reference.resize(len);
        if (kind == TemplateKind::Mean) {
            Eigen::VectorXd acc = Eigen::VectorXd::Zero(len);
            for (const Trace* t : members) acc += t->samples.cast<double>();
            tpl.reference = (acc / static_cast<double>(members.size())).cast<float>();
        } else {
            std::vector<float> column(members.size());
            for (Eigen::Index i = 0; i < len; ++i) {
                for (size_t k = 0; k < members.size(); ++k) column[k] = members[k]->samples[i];
                const size_t mid = column.size() / 2;
                std::nth_element(column.begin(), column.begin() + mid, column.end());
                float med = column[mid];
                if (column.size() % 2 == 0) {
                    std::nth_element(column.begin(), column.begin() + mid - 1, column.end());
                    med = 0.5f * (med + column[mid - 1]);
                }
                tpl.reference[i] = med;
            }
        }
        out.push_back(std::move(tpl));
    }
    return out;
}

double sad_score(const Trace& t, const SimpleTemplate& tpl) {
    if (t.samples.size() != tpl.reference.size()) {
        throw std::invalid_argument("sad_score: length mismatch");
    }
    return (t.samples.cast<double>() - tpl.reference.cast<double>()).cwiseAbs().sum();
}

double xcorr_score(const Trace& t, const SimpleTemplate& tpl, int max_lag) {
    const int n = static_cast<int>(t.samples.size());
    if (n != tpl.reference.size()) throw std::invalid_argument("xcorr_score: length mismatch");
    if (max_lag < 0 || max_lag >= n / 2) {
        throw std::invalid_argument("xcorr_score: max_lag must be in [0, length/2)");
    }
    double best = -2.0;
    for (int lag = -max_lag; lag <= max_lag; ++lag) {
        best = std::max(best, lagged_pearson(t.samples, tpl.reference, lag));
    }
    return best;
}

ClassKey classify_simple(const Trace& t, const std::vector<SimpleTemplate>& templates,
                         SimpleMetric metric, int max_lag) {
    if (templates.empty()) throw std::invalid_argument("classify_simple: no templates");
    size_t best = 0;
    double best_score = 0;
    for (size_t i = 0; i < templates.size(); ++i) {
        const double s = metric == SimpleMetric::SAD ? -sad_score(t, templates[i])
                                                     : xcorr_score(t, templates[i], max_lag);
        if (i == 0 || s > best_score) {
            best = i;
            best_score = s;
        }
    }
    return templates[best].class_key;
}

} // namespace emids
