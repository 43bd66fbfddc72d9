#pragma once

#include <functional>
#include <string>
#include <vector>

#include "emids/trace.hpp"

namespace emids {

struct ScoreSet {
    std::vector<double> genuine;
    std::vector<double> impostor;
    bool higher_is_genuine = true;
};

void validate(const ScoreSet& s);

struct RocPoint {
    double far;
    double gar;
};

struct FarFrrPoint {
    double threshold;
    double far;
    double frr;
};

// Threshold sweep over the observed scores plus sentinel endpoints;
// FAR = impostor fraction accepted, GAR = genuine fraction accepted.
std::vector<RocPoint> roc_curve(const ScoreSet& s);

std::vector<FarFrrPoint> far_frr_curve(const ScoreSet& s);

struct EerResult {
    double eer = 0;
    double threshold = 0;
    bool degenerate = false; // all scores equal; EER 0.5 by convention
};

// Linear interpolation at the FAR/FRR sign change.
EerResult eer(const ScoreSet& s);

double auc_trapezoid(const std::vector<RocPoint>& roc);

// Mann-Whitney U statistic scaled to [0, 1], ties weighted 0.5 — an
// independent route to the area under the ROC.
double auc_mann_whitney(const ScoreSet& s);

struct KdePoint {
    double x;
    double density;
};

struct KdeResult {
    std::vector<KdePoint> points;
    double bandwidth = 0;
    bool degenerate_bandwidth = false; // zero-variance fallback used
};

// Gaussian-kernel density on a uniform grid over [min-3h, max+3h].
// bandwidth <= 0 selects Silverman's rule 0.9 min(sd, IQR/1.34) n^(-1/5).
KdeResult kde(const std::vector<double>& values, double bandwidth = 0, int grid = 256);

struct RecognitionRow {
    ClassKey key; // true-class group key
    size_t total = 0;
    size_t correct = 0;
};

struct RecognitionReport {
    std::vector<RecognitionRow> rows;
    size_t total = 0;
    size_t correct = 0;
    double overall() const { return total ? static_cast<double>(correct) / total : 0.0; }
    double macro_average() const;
};

// Per-class accuracy of `scorer` on the labeled test set. Under PerPath the
// prediction counts as correct when predicted and true keys map to the same
// path; path_of resolves keys whose path field is unknown.
RecognitionReport recognition_matrix(const std::function<ClassKey(const Trace&)>& scorer,
                                     const TraceSet& test, Grouping grouping,
                                     const std::function<PathId(const ClassKey&)>& path_of = {});

struct EvalReport {
    std::vector<RocPoint> roc;
    std::vector<FarFrrPoint> far_frr;
    double eer = 0;
    double eer_threshold = 0;
    double auc = 0;
    KdeResult kde_genuine;
    KdeResult kde_impostor;
    RecognitionReport recognition;
};

EvalReport evaluate_scores(const ScoreSet& s);

std::string to_json(const EvalReport& report);

} // namespace emids
