#include "emids/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "emids/distinguishers.hpp"

namespace emids {
namespace {

// Normalize to higher-is-genuine once so every curve shares one convention.
ScoreSet normalized(const ScoreSet& s) {
    validate(s);
    if (s.higher_is_genuine) return s;
    ScoreSet out;
    out.higher_is_genuine = true;
    out.genuine.reserve(s.genuine.size());
    out.impostor.reserve(s.impostor.size());
    for (double v : s.genuine) out.genuine.push_back(-v);
    for (double v : s.impostor) out.impostor.push_back(-v);
    return out;
}

// Descending threshold sweep: first accepts nothing, last accepts everything.
std::vector<double> sweep_thresholds(const ScoreSet& s) {
    std::set<double> values(s.genuine.begin(), s.genuine.end());
    values.insert(s.impostor.begin(), s.impostor.end());
    std::vector<double> thr;
    thr.reserve(values.size() + 2);
    thr.push_back(*values.rbegin() + 1.0);
    for (auto it = values.rbegin(); it != values.rend(); ++it) thr.push_back(*it);
    thr.push_back(*values.begin() - 1.0);
    return thr;
}

// fraction of (pre-sorted) scores >= threshold
double accepted_fraction(const std::vector<double>& sorted_scores, double threshold) {
    const auto it = std::lower_bound(sorted_scores.begin(), sorted_scores.end(), threshold);
    return static_cast<double>(sorted_scores.end() - it) /
           static_cast<double>(sorted_scores.size());
}

double quantile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double idx = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<size_t>(std::floor(idx));
    const auto hi = static_cast<size_t>(std::ceil(idx));
    const double frac = idx - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

} // namespace

void validate(const ScoreSet& s) {
    if (s.genuine.empty() || s.impostor.empty()) {
        throw std::invalid_argument("ScoreSet requires non-empty genuine and impostor lists");
    }
    for (double v : s.genuine) {
        if (std::isnan(v)) throw std::invalid_argument("NaN genuine score");
    }
    for (double v : s.impostor) {
        if (std::isnan(v)) throw std::invalid_argument("NaN impostor score");
    }
}

std::vector<RocPoint> roc_curve(const ScoreSet& s_in) {
    ScoreSet s = normalized(s_in);
    const auto thresholds = sweep_thresholds(s);
    std::sort(s.genuine.begin(), s.genuine.end());
    std::sort(s.impostor.begin(), s.impostor.end());
    std::vector<RocPoint> roc;
    roc.reserve(thresholds.size());
    for (double thr : thresholds) {
        roc.push_back({accepted_fraction(s.impostor, thr), accepted_fraction(s.genuine, thr)});
    }
    return roc;
}

std::vector<FarFrrPoint> far_frr_curve(const ScoreSet& s_in) {
    ScoreSet s = normalized(s_in);
    const auto thresholds = sweep_thresholds(s);
    std::sort(s.genuine.begin(), s.genuine.end());
    std::sort(s.impostor.begin(), s.impostor.end());
    std::vector<FarFrrPoint> out;
    out.reserve(thresholds.size());
    for (double thr : thresholds) {
        out.push_back({thr, accepted_fraction(s.impostor, thr),
                       1.0 - accepted_fraction(s.genuine, thr)});
    }
    return out;
}

EerResult eer(const ScoreSet& s_in) {
    const ScoreSet s = normalized(s_in);
    const auto curve = far_frr_curve(s);

    EerResult res;
    {
        std::set<double> distinct(s.genuine.begin(), s.genuine.end());
        distinct.insert(s.impostor.begin(), s.impostor.end());
        res.degenerate = distinct.size() == 1;
    }

    double prev_d = curve.front().far - curve.front().frr;
    for (size_t i = 1; i < curve.size(); ++i) {
        const double d = curve[i].far - curve[i].frr;
        if (d == 0.0) {
            res.eer = curve[i].far;
            res.threshold = curve[i].threshold;
            return res;
        }
        if ((prev_d < 0) != (d < 0)) {
            const auto& a = curve[i - 1];
            const auto& b = curve[i];
            const double t = prev_d / (prev_d - d);
            res.eer = a.far + t * (b.far - a.far);
            res.threshold = a.threshold + t * (b.threshold - a.threshold);
            return res;
        }
        prev_d = d;
    }
    // no crossing: one error rate dominates everywhere; report the endpoint
    // closest to equality
    const auto& last = curve.back();
    res.eer = 0.5 * (last.far + last.frr);
    res.threshold = last.threshold;
    return res;
}

double auc_trapezoid(const std::vector<RocPoint>& roc) {
    if (roc.size() < 2) throw std::invalid_argument("auc_trapezoid: need >= 2 points");
    double area = 0;
    for (size_t i = 1; i < roc.size(); ++i) {
        area += (roc[i].far - roc[i - 1].far) * 0.5 * (roc[i].gar + roc[i - 1].gar);
    }
    return area;
}

double auc_mann_whitney(const ScoreSet& s_in) {
    const ScoreSet s = normalized(s_in);
    // sort-and-merge rank formulation, O(n log n); ties get weight 0.5
    std::vector<double> g = s.genuine, im = s.impostor;
    std::sort(g.begin(), g.end());
    std::sort(im.begin(), im.end());
    double u = 0;
    size_t j_less = 0, j_leq = 0;
    for (const double v : g) {
        while (j_less < im.size() && im[j_less] < v) ++j_less;
        while (j_leq < im.size() && im[j_leq] <= v) ++j_leq;
        u += static_cast<double>(j_less) + 0.5 * static_cast<double>(j_leq - j_less);
    }
    return u / (static_cast<double>(g.size()) * static_cast<double>(im.size()));
}

KdeResult kde(const std::vector<double>& values, double bandwidth, int grid) {
    if (values.size() < 2) throw std::invalid_argument("kde: need >= 2 values");
    if (grid < 2) throw std::invalid_argument("kde: grid must be >= 2");
    const auto n = static_cast<double>(values.size());

    KdeResult res;
    double h = bandwidth;
    if (h <= 0) {
        double mean = 0;
        for (double v : values) mean += v;
        mean /= n;
        double var = 0;
        for (double v : values) var += (v - mean) * (v - mean);
        var /= (n - 1);
        const double sd = std::sqrt(var);
        const double iqr = quantile(values, 0.75) - quantile(values, 0.25);
        double spread = std::min(sd, iqr / 1.34);
        if (spread <= 0) spread = std::max(sd, iqr / 1.34);
        if (spread > 0) {
            h = 0.9 * spread * std::pow(n, -0.2);
        } else {
            h = 1e-3 * std::abs(mean) + 1e-9;
            res.degenerate_bandwidth = true;
        }
    }
    res.bandwidth = h;

    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    const double lo = *mn - 3 * h;
    const double hi = *mx + 3 * h;
    const double step = (hi - lo) / (grid - 1);
    const double norm = 1.0 / (n * h * std::sqrt(2.0 * M_PI));
    res.points.reserve(grid);
    for (int i = 0; i < grid; ++i) {
        const double x = lo + i * step;
        double dens = 0;
        for (double v : values) {
            const double z = (x - v) / h;
            dens += std::exp(-0.5 * z * z);
        }
        res.points.push_back({x, dens * norm});
    }
    return res;
}

double RecognitionReport::macro_average() const {
    if (rows.empty()) return 0;
    double acc = 0;
    for (const auto& r : rows) {
        acc += r.total ? static_cast<double>(r.correct) / static_cast<double>(r.total) : 0.0;
    }
    return acc / static_cast<double>(rows.size());
}

RecognitionReport recognition_matrix(const std::function<ClassKey(const Trace&)>& scorer,
                                     const TraceSet& test, Grouping grouping,
                                     const std::function<PathId(const ClassKey&)>& path_of) {
    if (test.traces.empty()) throw std::invalid_argument("recognition_matrix: empty test set");

    const auto resolve_path = [&](const ClassKey& k) {
        if (k.path != PathId::Unknown) return k.path;
        if (!path_of) {
            throw std::invalid_argument("recognition_matrix: PerPath grouping needs a path resolver");
        }
        return path_of(k);
    };

    std::map<ClassKey, RecognitionRow> rows;
    RecognitionReport report;
    for (const Trace& t : test.traces) {
        const ClassKey truth{t.label.program, t.label.input, t.label.path};
        const ClassKey predicted = scorer(t);
        bool ok = false;
        switch (grouping) {
            case Grouping::PerProgram:
                ok = predicted.program == truth.program;
                break;
            case Grouping::PerInput:
                ok = predicted.program == truth.program && predicted.input == truth.input;
                break;
            case Grouping::PerPath:
                ok = predicted.program == truth.program &&
                     resolve_path(predicted) == resolve_path(truth);
                break;
        }
        const ClassKey row_key = group_key(t.label, grouping);
        auto& row = rows[row_key];
        row.key = row_key;
        ++row.total;
        ++report.total;
        if (ok) {
            ++row.correct;
            ++report.correct;
        }
    }
    report.rows.reserve(rows.size());
    for (auto& [key, row] : rows) report.rows.push_back(row);
    return report;
}

EvalReport evaluate_scores(const ScoreSet& s) {
    EvalReport rep;
    rep.roc = roc_curve(s);
    rep.far_frr = far_frr_curve(s);
    const EerResult e = eer(s);
    rep.eer = e.eer;
    rep.eer_threshold = e.threshold;
    rep.auc = auc_trapezoid(rep.roc);
    const ScoreSet norm = s.higher_is_genuine ? s : [&] {
        ScoreSet t = s;
        for (double& v : t.genuine) v = -v;
        for (double& v : t.impostor) v = -v;
        t.higher_is_genuine = true;
        return t;
    }();
    if (norm.genuine.size() >= 2) rep.kde_genuine = kde(norm.genuine);
    if (norm.impostor.size() >= 2) rep.kde_impostor = kde(norm.impostor);
    return rep;
}

namespace {

void append_roc(std::ostringstream& os, const std::vector<RocPoint>& roc) {
    os << "[";
    for (size_t i = 0; i < roc.size(); ++i) {
        if (i) os << ",";
        os << "[" << roc[i].far << "," << roc[i].gar << "]";
    }
    os << "]";
}

void append_kde(std::ostringstream& os, const KdeResult& k) {
    os << "{\"bandwidth\":" << k.bandwidth << ",\"degenerate\":"
       << (k.degenerate_bandwidth ? "true" : "false") << ",\"points\":[";
    for (size_t i = 0; i < k.points.size(); ++i) {
        if (i) os << ",";
        os << "[" << k.points[i].x << "," << k.points[i].density << "]";
    }
    os << "]}";
}

} // namespace

std::string to_json(const EvalReport& report) {
    std::ostringstream os;
    os.precision(12);
    os << "{\"eer\":" << report.eer << ",\"eer_threshold\":" << report.eer_threshold
       << ",\"auc\":" << report.auc << ",\"roc\":";
    append_roc(os, report.roc);
    os << ",\"far_frr\":[";
    for (size_t i = 0; i < report.far_frr.size(); ++i) {
        if (i) os << ",";
        os << "[" << report.far_frr[i].threshold << "," << report.far_frr[i].far << ","
           << report.far_frr[i].frr << "]";
    }
    os << "],\"kde_genuine\":";
    append_kde(os, report.kde_genuine);
    os << ",\"kde_impostor\":";
    append_kde(os, report.kde_impostor);
    os << ",\"recognition\":{\"overall\":" << report.recognition.overall()
       << ",\"macro\":" << report.recognition.macro_average() << ",\"classes\":[";
    for (size_t i = 0; i < report.recognition.rows.size(); ++i) {
        const auto& r = report.recognition.rows[i];
        if (i) os << ",";
        os << "{\"key\":\"" << to_string(r.key) << "\",\"total\":" << r.total
           << ",\"correct\":" << r.correct << "}";
    }
    os << "]}}";
    return os.str();
}

} // namespace emids
