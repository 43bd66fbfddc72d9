#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "emids/trace.hpp"

namespace emids {

struct LdaProjection {
    Eigen::VectorXd mean_global; // length D, raw sample space
    Eigen::MatrixXd components;  // D x m, columns are discriminant directions
};

struct TrainedOn {
    uint64_t corpus_seed = 0;
    uint32_t trace_count = 0;
    double sample_rate_hz = 0;
};

struct TemplateClass {
    ClassKey key;
    Eigen::VectorXd mean; // length m, projected space
};

struct TemplateModel {
    LdaProjection projection;
    std::vector<TemplateClass> classes; // sorted by key
    Eigen::MatrixXd pooled_covariance;  // m x m
    Eigen::MatrixXd pooled_precision;
    double log_det_cov = 0;
    double threshold = 0;
    bool threshold_set = false;
    TrainedOn trained_on;
};

// Project a raw trace into the model's discriminant space.
Eigen::VectorXd project(const LdaProjection& proj, const Eigen::VectorXf& samples);

// Solves the generalized eigenproblem S_B v = lambda S_W v on the
// ridge-regularized within-class scatter; returns the top-m eigenvectors,
// unit length, sign fixed so each column's largest-magnitude entry is
// positive. m may exceed classes-1; trailing directions then carry near-zero
// eigenvalues.
LdaProjection fit_lda(const TraceSet& ts,
                      const std::function<ClassKey(const TraceLabel&)>& class_of, int m);
LdaProjection fit_lda(const TraceSet& ts, Grouping grouping, int m);

// Per-class projected means plus one pooled covariance
// (1/(N-K)) sum_k sum_i (x - m_k)(x - m_k)^T, regularized by
// eps = 1e-6 trace(cov)/m on the diagonal.
TemplateModel fit_templates(const TraceSet& ts, Grouping grouping, const LdaProjection& projection);

// -0.5 [ (y - m_k)^T P (y - m_k) + log det cov + m log 2pi ]
double log_likelihood(const Trace& t, const TemplateModel& model, const ClassKey& key);

struct Classification {
    ClassKey key;
    double score;
};

// argmax class by log-likelihood; earlier class wins ties.
Classification classify_ml(const Trace& t, const TemplateModel& model);

// Log-likelihood under the claimed class, to be thresholded by the IDS layer.
double genuine_score(const Trace& t, const TemplateModel& model, const ClassKey& claimed);

} // namespace emids
