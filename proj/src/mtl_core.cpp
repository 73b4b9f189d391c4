#include "mtlcvx/mtl_core.hpp"

#include <cmath>

#include "mtlcvx/error.hpp"

namespace mtl {

void FitConfig::validate() const {
    if (!(lambda1 > 0.0) || !std::isfinite(lambda1))
        throw Error(ErrorKind::ConfigInvalid, "lambda1 must be > 0 for the block updates to be well-posed");
    if (!(lambda2 >= 0.0) || !std::isfinite(lambda2)) throw Error(ErrorKind::ConfigInvalid, "lambda2 must be >= 0");
    if (!(rho > 0.0)) throw Error(ErrorKind::ConfigInvalid, "rho must be > 0");
    if (!(intercept_ridge >= 0.0)) throw Error(ErrorKind::ConfigInvalid, "intercept_ridge must be >= 0");
    if (!(outer_tol > 0.0) || max_outer < 1) throw Error(ErrorKind::ConfigInvalid, "outer tolerance/cap invalid");
    if (!(newton.gradient_tol > 0.0) || newton.max_iterations < 1)
        throw Error(ErrorKind::ConfigInvalid, "Newton tolerance/cap invalid");
    if (!(centroid.inner_tol > 0.0) || !(centroid.outer_tol > 0.0) || centroid.max_inner < 1 ||
        centroid.max_outer < 1)
        throw Error(ErrorKind::ConfigInvalid, "centroid tolerance/cap invalid");
}

CentroidOptions FitConfig::centroid_options() const {
    auto o = centroid;
    o.rho = rho;
    return o;
}

Initialization initialization_from_fits(std::span<const SingleTaskFit> fits) {
    if (fits.empty()) throw Error(ErrorKind::InvalidArgument, "no single-task fits");
    const auto p = fits.front().w.size();
    Initialization init;
    init.W.resize(static_cast<Eigen::Index>(fits.size()), p);
    init.intercepts.resize(static_cast<Eigen::Index>(fits.size()));
    for (std::size_t m = 0; m < fits.size(); ++m) {
        if (fits[m].w.size() != p) throw Error(ErrorKind::DimensionMismatch, "single-task fits differ in width");
        init.W.row(static_cast<Eigen::Index>(m)) = fits[m].w.transpose();
        init.intercepts[static_cast<Eigen::Index>(m)] = fits[m].intercept;
    }
    return init;
}

Initialization zero_initialization(std::span<const TaskDataset> tasks) {
    validate_tasks(tasks);
    Initialization init;
    init.W = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(tasks.size()), static_cast<Eigen::Index>(tasks.front().p()));
    init.intercepts = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(tasks.size()));
    for (std::size_t m = 0; m < tasks.size(); ++m)
        if (tasks[m].loss == LossKind::logistic) init.intercepts[static_cast<Eigen::Index>(m)] = class_prior_logit(tasks[m]);
    return init;
}

Initialization ModelState::as_initialization() const {
    return {W, intercepts, centroids};
}

double task_loss(const TaskDataset& task, const Eigen::VectorXd& w, double intercept, double intercept_ridge) {
    const double inv_n = 1.0 / static_cast<double>(task.n());
    if (task.loss == LossKind::linear) return 0.5 * inv_n * (task.y - task.X * w).squaredNorm();
    const Eigen::VectorXd eta = (task.X * w).array() + intercept;
    double s = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) s += softplus(eta[i]) - task.y[i] * eta[i];
    return s * inv_n + 0.5 * intercept_ridge * intercept * intercept;
}

double objective(const Eigen::MatrixXd& W, const Eigen::VectorXd& intercepts, const Eigen::MatrixXd& U,
                 std::span<const TaskDataset> tasks, const WeightGraph& graph, double lambda1, double lambda2,
                 double intercept_ridge) {
    const auto T = static_cast<Eigen::Index>(tasks.size());
    if (W.rows() != T || U.rows() != T || intercepts.size() != T || W.cols() != U.cols() ||
        graph.task_count() != tasks.size())
        throw Error(ErrorKind::DimensionMismatch, "state and task dimensions disagree");
    double total = 0.0;
    for (Eigen::Index m = 0; m < T; ++m) {
        const auto& t = tasks[static_cast<std::size_t>(m)];
        if (static_cast<Eigen::Index>(t.p()) != W.cols())
            throw Error(ErrorKind::DimensionMismatch, "task width differs from W");
        total += task_loss(t, W.row(m).transpose(), intercepts[m], intercept_ridge);
    }
    return total + centroid_objective(W, U, graph, lambda1, lambda2);
}

double objective(const ModelState& state, std::span<const TaskDataset> tasks, const WeightGraph& graph) {
    return objective(state.W, state.intercepts, state.U, tasks, graph, state.config.lambda1, state.config.lambda2,
                     state.config.intercept_ridge);
}

Eigen::VectorXd linear_w_update(const TaskDataset& task, const Eigen::VectorXd& u, double lambda1) {
    if (!(lambda1 > 0.0)) throw Error(ErrorKind::SingularSystem, "lambda1 must be > 0");
    if (u.size() != task.X.cols()) throw Error(ErrorKind::DimensionMismatch, "centroid width != task width");
    const double inv_n = 1.0 / static_cast<double>(task.n());
    Eigen::MatrixXd A = task.X.transpose() * task.X * inv_n;
    A.diagonal().array() += lambda1;
    return A.llt().solve(task.X.transpose() * task.y * inv_n + lambda1 * u);
}

NewtonResult newton_raphson_logistic(const TaskDataset& task, const Eigen::VectorXd& u, double lambda1,
                                     double intercept_ridge, const NewtonOptions& options,
                                     std::optional<std::pair<double, Eigen::VectorXd>> start) {
    if (!(lambda1 > 0.0)) throw Error(ErrorKind::ConfigInvalid, "lambda1 must be > 0");
    if (task.loss != LossKind::logistic) throw Error(ErrorKind::InvalidArgument, "task is not logistic");
    if (u.size() != task.X.cols()) throw Error(ErrorKind::DimensionMismatch, "centroid width != task width");
    PenalizedLogistic problem{&task, u, lambda1, intercept_ridge};
    if (start) return solve_penalized_logistic(problem, start->first, start->second, options);
    return solve_penalized_logistic(problem, 0.0, Eigen::VectorXd::Zero(u.size()), options);
}

namespace {

// Per-task factorization of (X^T X / n + lambda1 I) reused across sweeps.
struct LinearSolver {
    Eigen::LLT<Eigen::MatrixXd> llt;
    Eigen::VectorXd xty;  // X^T y / n
};

double subproblem_value(const TaskDataset& task, const Eigen::VectorXd& w, double intercept, const Eigen::VectorXd& u,
                        double lambda1, double intercept_ridge) {
    return task_loss(task, w, intercept, intercept_ridge) + 0.5 * lambda1 * (w - u).squaredNorm();
}

} // namespace

ModelState fit_mtlcvx(std::span<const TaskDataset> tasks, const WeightGraph& graph, const FitConfig& config,
                      const Initialization& init) {
    config.validate();
    validate_tasks(tasks);
    const auto T = static_cast<Eigen::Index>(tasks.size());
    const auto p = static_cast<Eigen::Index>(tasks.front().p());
    if (graph.task_count() != tasks.size()) throw Error(ErrorKind::DimensionMismatch, "graph task count != tasks");
    if (init.W.rows() != T || init.W.cols() != p || init.intercepts.size() != T)
        throw Error(ErrorKind::DimensionMismatch, "initialization shape disagrees with tasks");
    for (const auto& t : tasks)
        if (t.loss != config.loss) throw Error(ErrorKind::InvalidArgument, "task loss differs from config loss");

    const double l1 = config.lambda1;
    const double l2 = config.lambda2;
    const double ridge = config.loss == LossKind::logistic ? config.intercept_ridge : 0.0;
    const auto copts = config.centroid_options();

    ModelState st;
    st.config = config;
    st.W = init.W;
    st.intercepts = config.loss == LossKind::logistic ? init.intercepts : Eigen::VectorXd::Zero(T);
    if (init.centroids && init.centroids->U.rows() == T && init.centroids->U.cols() == p) {
        st.centroids = *init.centroids;
        st.U = init.centroids->U;
    } else {
        st.U = st.W;
    }

    std::vector<LinearSolver> solvers;
    if (config.loss == LossKind::linear) {
        solvers.resize(tasks.size());
        for (std::size_t m = 0; m < tasks.size(); ++m) {
            const auto& t = tasks[m];
            const double inv_n = 1.0 / static_cast<double>(t.n());
            Eigen::MatrixXd A = t.X.transpose() * t.X * inv_n;
            A.diagonal().array() += l1;
            solvers[m].llt.compute(A);
            solvers[m].xty = t.X.transpose() * t.y * inv_n;
        }
    }

    st.objective_trace.push_back(objective(st.W, st.intercepts, st.U, tasks, graph, l1, l2, ridge));
    for (int t = 1; t <= config.max_outer; ++t) {
        // centroid block; the previous U is kept if the inexact solve does not improve on it
        auto cs = solve_centroids(st.W, graph, l1, l2, &st.centroids, copts);
        if (centroid_objective(st.W, cs.U, graph, l1, l2) <= centroid_objective(st.W, st.U, graph, l1, l2)) {
            st.U = cs.U;
        } else {
            cs.U = st.U;
        }
        st.centroids = std::move(cs);
        st.objective_trace.push_back(objective(st.W, st.intercepts, st.U, tasks, graph, l1, l2, ridge));

        // coefficient block, independent per task
        const Eigen::MatrixXd W_prev = st.W;
        for (Eigen::Index m = 0; m < T; ++m) {
            const auto& task = tasks[static_cast<std::size_t>(m)];
            const Eigen::VectorXd u = st.U.row(m).transpose();
            const Eigen::VectorXd w_old = st.W.row(m).transpose();
            const double b_old = st.intercepts[m];
            Eigen::VectorXd w_new;
            double b_new = 0.0;
            if (config.loss == LossKind::linear) {
                const auto& s = solvers[static_cast<std::size_t>(m)];
                w_new = s.llt.solve(s.xty + l1 * u);
            } else {
                auto r = newton_raphson_logistic(task, u, l1, ridge, config.newton, std::make_pair(b_old, w_old));
                w_new = std::move(r.w);
                b_new = r.intercept;
            }
            if (subproblem_value(task, w_new, b_new, u, l1, ridge) <= subproblem_value(task, w_old, b_old, u, l1, ridge)) {
                st.W.row(m) = w_new.transpose();
                st.intercepts[m] = b_new;
            }
        }
        st.objective_trace.push_back(objective(st.W, st.intercepts, st.U, tasks, graph, l1, l2, ridge));
        st.iterations = t;

        const double scale = W_prev.norm();
        const double change = (st.W - W_prev).norm();
        if (change <= config.outer_tol * (scale > 0.0 ? scale : 1.0)) {
            st.converged = true;
            break;
        }
    }
    return st;
}

AdaptiveFit fit_mtlacvx(std::span<const TaskDataset> tasks, const WeightGraph& graph, const FitConfig& stage1,
                        const FitConfig& stage2, const Initialization& init) {
    AdaptiveFit out;
    out.stage1 = fit_mtlcvx(tasks, graph, stage1, init);
    out.adaptive_graph = adaptive_weights(out.stage1.U, graph);
    out.stage2 = fit_mtlcvx(tasks, out.adaptive_graph, stage2, out.stage1.as_initialization());
    return out;
}

std::vector<int> extract_clusters(const ModelState& state, const WeightGraph& graph, double tolerance) {
    return cluster_labels(state.U, graph, tolerance);
}

std::vector<int> extract_clusters(const ModelState& state, const WeightGraph& graph) {
    return cluster_labels(state.U, graph, default_merge_tolerance(state.W));
}

} // namespace mtl
