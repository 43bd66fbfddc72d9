#include "emids/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace emids {
namespace {

double median_of(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of empty set");
    const size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        std::nth_element(v.begin(), v.begin() + mid - 1, v.end());
        m = 0.5 * (m + v[mid - 1]);
    }
    return m;
}

// Pearson correlation of tpl against the window of x starting at pos.
// Template statistics are precomputed by the caller.
double window_corr(const Eigen::VectorXf& x, int pos, const Eigen::VectorXf& tpl,
                   double tpl_mean, double tpl_var_n) {
    const int n = static_cast<int>(tpl.size());
    double sw = 0, sww = 0, swt = 0;
    for (int i = 0; i < n; ++i) {
        const double w = x[pos + i];
        sw += w;
        sww += w * w;
        swt += w * tpl[i];
    }
    const double w_mean = sw / n;
    const double w_var_n = sww - n * w_mean * w_mean;
    if (w_var_n <= 0 || tpl_var_n <= 0) return -2.0;
    const double cov_n = swt - n * w_mean * tpl_mean;
    return cov_n / std::sqrt(w_var_n * tpl_var_n);
}

struct BestMatch {
    int pos = -1;
    double corr = -2.0;
};

BestMatch best_ncc(const Eigen::VectorXf& x, const Eigen::VectorXf& tpl, int from, int to) {
    const double tpl_mean = tpl.cast<double>().mean();
    const double tpl_var_n =
        (tpl.cast<double>().array() - tpl_mean).square().sum();
    BestMatch best;
    for (int p = from; p <= to; ++p) {
        const double c = window_corr(x, p, tpl, tpl_mean, tpl_var_n);
        if (c > best.corr) best = {p, c};
    }
    return best;
}

} // namespace

void validate(const AlignmentConfig& cfg) {
    if (cfg.smoothing_window < 1) throw std::invalid_argument("smoothing_window < 1");
    if (!(cfg.valley_threshold < cfg.peak_threshold)) {
        throw std::invalid_argument("valley_threshold must be below peak_threshold");
    }
    if (cfg.min_valley_len < 1) throw std::invalid_argument("min_valley_len < 1");
    if (cfg.reference_index < 0) throw std::invalid_argument("reference_index < 0");
    if (cfg.target_length < 1) throw std::invalid_argument("target_length < 1");
}

void validate(const FilterConfig& cfg) {
    if (!(cfg.energy_deviation_factor > 0)) {
        throw std::invalid_argument("energy_deviation_factor must be positive");
    }
    if (cfg.length_deviation_max < 1) throw std::invalid_argument("length_deviation_max < 1");
}

Eigen::VectorXf moving_average(const Eigen::VectorXf& x, int window) {
    if (window < 1) throw std::invalid_argument("window < 1");
    const int n = static_cast<int>(x.size());
    Eigen::VectorXf out(n);
    const int left = (window - 1) / 2;
    const int right = window / 2;
    double acc = 0;
    int lo = 0, hi = -1; // current [lo, hi] accumulated window
    for (int i = 0; i < n; ++i) {
        const int want_lo = std::max(0, i - left);
        const int want_hi = std::min(n - 1, i + right);
        while (hi < want_hi) acc += x[++hi];
        while (lo < want_lo) acc -= x[lo++];
        out[i] = static_cast<float>(acc / (want_hi - want_lo + 1));
    }
    return out;
}

std::optional<int> find_anchor(const Eigen::VectorXf& smoothed, const AlignmentConfig& cfg) {
    const int n = static_cast<int>(smoothed.size());
    int run = 0;
    int i = 0;
    // first run of >= min_valley_len samples below the valley threshold
    for (; i < n; ++i) {
        if (smoothed[i] < cfg.valley_threshold) {
            if (++run >= cfg.min_valley_len) break;
        } else {
            run = 0;
        }
    }
    if (i >= n) return std::nullopt;
    // extend to the end of the valley, then look for the peak
    while (i + 1 < n && smoothed[i + 1] < cfg.valley_threshold) ++i;
    for (++i; i < n; ++i) {
        if (smoothed[i] > cfg.peak_threshold) return i;
    }
    return std::nullopt;
}

std::optional<Trace> align_trace(const Trace& t, const AlignmentConfig& cfg) {
    validate(cfg);
    const int n = static_cast<int>(t.samples.size());
    if (n == 0) throw std::invalid_argument("align_trace: empty trace");

    const Eigen::VectorXf smoothed = moving_average(t.samples, cfg.smoothing_window);
    const auto anchor = find_anchor(smoothed, cfg);
    if (!anchor) return std::nullopt;

    const int shift = cfg.reference_index - *anchor;
    Trace out;
    out.samples.resize(cfg.target_length);
    for (int i = 0; i < cfg.target_length; ++i) {
        const int src = std::clamp(i - shift, 0, n - 1);
        out.samples[i] = t.samples[src];
    }
    out.label = t.label;
    if (t.marks) {
        const auto clamp_mark = [&](int64_t v) {
            return static_cast<uint32_t>(std::clamp<int64_t>(v, 0, cfg.target_length));
        };
        TriggerMarks m;
        m.start = clamp_mark(static_cast<int64_t>(t.marks->start) + shift);
        m.end = clamp_mark(static_cast<int64_t>(t.marks->end) + shift);
        if (m.end < m.start) m.end = m.start;
        out.marks = m;
    }
    return out;
}

AlignResult align_set(const TraceSet& ts, const AlignmentConfig& cfg) {
    AlignResult res;
    res.aligned.sample_rate_hz = ts.sample_rate_hz;
    res.aligned.aligned = true;
    res.aligned.traces.reserve(ts.traces.size());
    for (const Trace& t : ts.traces) {
        if (auto a = align_trace(t, cfg)) {
            res.aligned.traces.push_back(std::move(*a));
        } else {
            ++res.no_anchor;
        }
    }
    return res;
}

double trace_energy(const Trace& t) {
    if (t.marks && t.marks->end > t.marks->start) {
        return t.samples.segment(t.marks->start, t.marks->end - t.marks->start)
            .cast<double>()
            .squaredNorm();
    }
    return t.samples.cast<double>().squaredNorm();
}

FilterResult filter_interrupted(const TraceSet& ts, const FilterConfig& cfg, bool keep_discarded) {
    validate(cfg);
    if (ts.traces.empty()) throw std::invalid_argument("filter_interrupted: empty set");

    const size_t n = ts.traces.size();
    std::vector<double> energies(n), lengths(n);
    for (size_t i = 0; i < n; ++i) {
        energies[i] = trace_energy(ts.traces[i]);
        lengths[i] = static_cast<double>(ts.traces[i].samples.size());
    }
    const double e_med = median_of(energies);
    std::vector<double> e_dev(n);
    for (size_t i = 0; i < n; ++i) e_dev[i] = std::abs(energies[i] - e_med);
    double e_mad = median_of(e_dev);
    // a zero MAD (e.g. majority of identical traces) still has to reject
    // gross outliers, so floor it at a relative epsilon
    e_mad = std::max(e_mad, 1e-12 * std::max(1.0, std::abs(e_med)));
    const double len_med = median_of(lengths);

    FilterResult res;
    res.kept.sample_rate_hz = ts.sample_rate_hz;
    res.kept.aligned = ts.aligned;
    res.kept.traces.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        const bool bad_energy = e_dev[i] > cfg.energy_deviation_factor * e_mad;
        const bool bad_length = std::abs(lengths[i] - len_med) > cfg.length_deviation_max;
        if (bad_energy || bad_length) {
            ++res.discarded;
            if (keep_discarded) {
                Trace t = ts.traces[i];
                t.label.discarded = true;
                res.kept.traces.push_back(std::move(t));
            }
        } else {
            res.kept.traces.push_back(ts.traces[i]);
        }
    }
    return res;
}

std::optional<int> extract_runtime(const Trace& t, const Eigen::VectorXf& os_epilogue_template,
                                   const Eigen::VectorXf& os_preamble_template, double min_corr,
                                   int os_gap) {
    if (t.marks) return static_cast<int>(t.marks->end) - static_cast<int>(t.marks->start);

    const int n = static_cast<int>(t.samples.size());
    const int n_pre = static_cast<int>(os_preamble_template.size());
    const int n_epi = static_cast<int>(os_epilogue_template.size());
    if (n_pre < 2 || n_epi < 2 || n_pre + n_epi >= n) {
        throw std::invalid_argument("extract_runtime: templates must be non-trivial, shorter than trace");
    }

    const BestMatch pre = best_ncc(t.samples, os_preamble_template, 0, n - n_pre);
    if (pre.corr < min_corr) return std::nullopt;
    const int user_start = pre.pos + n_pre + os_gap;
    if (user_start >= n - n_epi) return std::nullopt;

    const BestMatch epi = best_ncc(t.samples, os_epilogue_template, user_start, n - n_epi);
    if (epi.corr < min_corr) return std::nullopt;
    const int user_end = epi.pos - os_gap;
    if (user_end <= user_start) return std::nullopt;
    return user_end - user_start;
}

} // namespace emids
