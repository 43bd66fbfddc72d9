#include "emids/templates.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "emids/distinguishers.hpp"

namespace emids {
namespace {

struct GroupedData {
    Eigen::MatrixXd x; // N x D, rows are traces
    std::vector<ClassKey> keys;
    std::map<ClassKey, std::vector<int>> members;
};

GroupedData collect(const TraceSet& ts, const std::function<ClassKey(const TraceLabel&)>& class_of) {
    if (ts.traces.empty()) throw std::invalid_argument("empty trace set");
    const Eigen::Index d = ts.traces.front().samples.size();
    GroupedData g;
    g.x.resize(static_cast<Eigen::Index>(ts.traces.size()), d);
    g.keys.resize(ts.traces.size());
    for (size_t i = 0; i < ts.traces.size(); ++i) {
        if (ts.traces[i].samples.size() != d) {
            throw std::invalid_argument("traces must share one aligned length");
        }
        g.x.row(static_cast<Eigen::Index>(i)) = ts.traces[i].samples.cast<double>().transpose();
        g.keys[i] = class_of(ts.traces[i].label);
        g.members[g.keys[i]].push_back(static_cast<int>(i));
    }
    return g;
}

void fix_column_sign(Eigen::Ref<Eigen::VectorXd> v) {
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    if (v[imax] < 0) v = -v;
}

} // namespace

Eigen::VectorXd project(const LdaProjection& proj, const Eigen::VectorXf& samples) {
    if (samples.size() != proj.mean_global.size()) {
        throw std::invalid_argument("project: trace length differs from model raw length");
    }
    return proj.components.transpose() * (samples.cast<double>() - proj.mean_global);
}

LdaProjection fit_lda(const TraceSet& ts,
                      const std::function<ClassKey(const TraceLabel&)>& class_of, int m) {
    const GroupedData g = collect(ts, class_of);
    const Eigen::Index d = g.x.cols();
    const auto n = static_cast<Eigen::Index>(g.keys.size());
    if (m < 1 || m > d) throw std::invalid_argument("fit_lda: m must be in [1, D]");
    if (g.members.size() < 2) throw std::invalid_argument("fit_lda: requires >= 2 classes");
    for (const auto& [key, idx] : g.members) {
        if (idx.size() < 2) {
            throw std::invalid_argument("fit_lda: class " + to_string(key) + " has < 2 traces");
        }
    }

    const Eigen::VectorXd mean_global = g.x.colwise().mean().transpose();
    Eigen::MatrixXd s_w = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd s_b = Eigen::MatrixXd::Zero(d, d);
    for (const auto& [key, idx] : g.members) {
        Eigen::VectorXd mk = Eigen::VectorXd::Zero(d);
        for (int i : idx) mk += g.x.row(i).transpose();
        mk /= static_cast<double>(idx.size());
        for (int i : idx) {
            const Eigen::VectorXd c = g.x.row(i).transpose() - mk;
            s_w.noalias() += c * c.transpose();
        }
        const Eigen::VectorXd b = mk - mean_global;
        s_b.noalias() += static_cast<double>(idx.size()) * b * b.transpose();
    }
    (void)n;

    const double ridge = 1e-6 * s_w.trace() / static_cast<double>(d) + 1e-12;
    s_w.diagonal().array() += ridge;

    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(s_b, s_w);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("fit_lda: generalized eigensolve failed (singular within-class scatter)");
    }

    LdaProjection proj;
    proj.mean_global = mean_global;
    proj.components.resize(d, m);
    // eigenvalues ascend; take the top m
    for (int j = 0; j < m; ++j) {
        Eigen::VectorXd v = solver.eigenvectors().col(d - 1 - j);
        v.normalize();
        fix_column_sign(v);
        proj.components.col(j) = v;
    }
    return proj;
}

LdaProjection fit_lda(const TraceSet& ts, Grouping grouping, int m) {
    return fit_lda(
        ts, [grouping](const TraceLabel& l) { return group_key(l, grouping); }, m);
}

TemplateModel fit_templates(const TraceSet& ts, Grouping grouping, const LdaProjection& projection) {
    const auto class_of = [grouping](const TraceLabel& l) { return group_key(l, grouping); };
    if (ts.traces.empty()) throw std::invalid_argument("fit_templates: empty trace set");
    const Eigen::Index m = projection.components.cols();

    std::map<ClassKey, std::vector<Eigen::VectorXd>> groups;
    for (const Trace& t : ts.traces) {
        groups[class_of(t.label)].push_back(project(projection, t.samples));
    }

    TemplateModel model;
    model.projection = projection;
    model.trained_on.trace_count = static_cast<uint32_t>(ts.traces.size());
    model.trained_on.sample_rate_hz = ts.sample_rate_hz;

    size_t n_total = 0;
    Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(m, m);
    for (const auto& [key, ys] : groups) {
        if (ys.size() < 2) {
            throw std::invalid_argument("fit_templates: group " + to_string(key) +
                                        " has fewer than 2 traces");
        }
        Eigen::VectorXd mk = Eigen::VectorXd::Zero(m);
        for (const auto& y : ys) mk += y;
        mk /= static_cast<double>(ys.size());
        for (const auto& y : ys) {
            const Eigen::VectorXd c = y - mk;
            scatter.noalias() += c * c.transpose();
        }
        model.classes.push_back({key, mk});
        n_total += ys.size();
    }
    const auto dof = static_cast<double>(n_total - groups.size());
    if (dof <= 0) throw std::invalid_argument("fit_templates: no residual degrees of freedom");
    model.pooled_covariance = scatter / dof;

    double eps = 1e-6 * model.pooled_covariance.trace() / static_cast<double>(m);
    if (eps <= 0) eps = 1e-12;
    model.pooled_covariance.diagonal().array() += eps;

    const Eigen::LLT<Eigen::MatrixXd> llt(model.pooled_covariance);
    if (llt.info() != Eigen::Success) {
        throw std::runtime_error("fit_templates: covariance not positive definite after regularization");
    }
    model.pooled_precision = llt.solve(Eigen::MatrixXd::Identity(m, m));
    model.log_det_cov = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return model;
}

double log_likelihood(const Trace& t, const TemplateModel& model, const ClassKey& key) {
    const auto it = std::find_if(model.classes.begin(), model.classes.end(),
                                 [&](const TemplateClass& c) { return c.key == key; });
    if (it == model.classes.end()) {
        throw std::invalid_argument("log_likelihood: unknown class " + to_string(key));
    }
    const Eigen::VectorXd y = project(model.projection, t.samples) - it->mean;
    const double quad = y.dot(model.pooled_precision * y);
    const auto m = static_cast<double>(model.pooled_covariance.rows());
    return -0.5 * (quad + model.log_det_cov + m * std::log(2.0 * M_PI));
}

Classification classify_ml(const Trace& t, const TemplateModel& model) {
    if (model.classes.empty()) throw std::invalid_argument("classify_ml: model has no classes");
    const Eigen::VectorXd y = project(model.projection, t.samples);
    size_t best = 0;
    double best_quad = 0;
    for (size_t i = 0; i < model.classes.size(); ++i) {
        const Eigen::VectorXd c = y - model.classes[i].mean;
        const double quad = c.dot(model.pooled_precision * c);
        if (i == 0 || quad < best_quad) {
            best = i;
            best_quad = quad;
        }
    }
    const auto m = static_cast<double>(model.pooled_covariance.rows());
    const double score = -0.5 * (best_quad + model.log_det_cov + m * std::log(2.0 * M_PI));
    return {model.classes[best].key, score};
}

double genuine_score(const Trace& t, const TemplateModel& model, const ClassKey& claimed) {
    return log_likelihood(t, model, claimed);
}

} // namespace emids
