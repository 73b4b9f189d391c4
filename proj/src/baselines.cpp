#include "mtlcvx/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "mtlcvx/error.hpp"
#include "mtlcvx/mtl_core.hpp"

namespace mtl {

double network_lasso_objective(std::span<const TaskDataset> tasks, const Eigen::MatrixXd& W,
                               const Eigen::VectorXd& intercepts, const WeightGraph& graph, double lambda,
                               double intercept_ridge) {
    double total = 0.0;
    for (std::size_t m = 0; m < tasks.size(); ++m) {
        const auto mi = static_cast<Eigen::Index>(m);
        total += task_loss(tasks[m], W.row(mi).transpose(), intercepts[mi], intercept_ridge);
    }
    double fusion = 0.0;
    for (const auto& e : graph.edges())
        fusion += e.weight * (W.row(static_cast<Eigen::Index>(e.m)) - W.row(static_cast<Eigen::Index>(e.l))).norm();
    return total + lambda * fusion;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> fuse_edge_pair(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                                           double threshold) {
    const double gap = (a - b).norm();
    const double theta = gap > 0.0 ? std::max(0.5, 1.0 - threshold / gap) : 0.5;
    return {theta * a + (1.0 - theta) * b, (1.0 - theta) * a + theta * b};
}

NetworkLassoState fit_mtlnl(std::span<const TaskDataset> tasks, const WeightGraph& graph, double lambda,
                            const NetworkLassoOptions& options, const NetworkLassoState* warm) {
    validate_tasks(tasks);
    if (!(lambda >= 0.0)) throw Error(ErrorKind::ConfigInvalid, "lambda must be >= 0");
    if (!(options.rho > 0.0)) throw Error(ErrorKind::ConfigInvalid, "rho must be > 0");
    if (graph.task_count() != tasks.size()) throw Error(ErrorKind::DimensionMismatch, "graph task count != tasks");
    const auto loss = tasks.front().loss;
    for (const auto& t : tasks)
        if (t.loss != loss) throw Error(ErrorKind::InvalidArgument, "mixed losses in one fit");

    const auto T = static_cast<Eigen::Index>(tasks.size());
    const auto p = static_cast<Eigen::Index>(tasks.front().p());
    const auto E = static_cast<Eigen::Index>(graph.edge_count());
    const double rho = options.rho;
    const double ridge = loss == LossKind::logistic ? options.intercept_ridge : 0.0;
    const auto degree = graph.degrees();

    // incident copy rows of every task
    std::vector<std::vector<Eigen::Index>> copies(tasks.size());
    for (Eigen::Index e = 0; e < E; ++e) {
        const auto& edge = graph.edge(static_cast<std::size_t>(e));
        copies[edge.m].push_back(2 * e);
        copies[edge.l].push_back(2 * e + 1);
    }

    NetworkLassoState st;
    st.lambda = lambda;
    st.rho = rho;
    const bool warm_ok = warm && warm->W.rows() == T && warm->W.cols() == p && warm->Z.rows() == 2 * E &&
                         warm->rho == rho;
    if (warm_ok) {
        st.W = warm->W;
        st.intercepts = warm->intercepts;
        st.Z = warm->Z;
        st.Dual = warm->Dual;
    } else {
        auto init = zero_initialization(tasks);
        st.W = init.W;
        st.intercepts = init.intercepts;
        st.Z = Eigen::MatrixXd::Zero(2 * E, p);
        st.Dual = Eigen::MatrixXd::Zero(2 * E, p);
    }

    std::vector<Eigen::LLT<Eigen::MatrixXd>> factor(tasks.size());
    std::vector<Eigen::VectorXd> xty(tasks.size());
    std::vector<Eigen::ColPivHouseholderQR<Eigen::MatrixXd>> isolated(tasks.size());
    if (loss == LossKind::linear) {
        for (std::size_t m = 0; m < tasks.size(); ++m) {
            const auto& t = tasks[m];
            const double inv_n = 1.0 / static_cast<double>(t.n());
            xty[m] = t.X.transpose() * t.y * inv_n;
            if (degree[m] == 0) {
                isolated[m].compute(t.X);
                if (isolated[m].rank() < p)
                    throw Error(ErrorKind::SingularSystem, "isolated task " + t.task_id + " has a rank-deficient design");
                continue;
            }
            Eigen::MatrixXd A = t.X.transpose() * t.X * inv_n;
            A.diagonal().array() += rho * static_cast<double>(degree[m]);
            factor[m].compute(A);
        }
    }

    Eigen::MatrixXd Z_prev(2 * E, p);
    Eigen::VectorXd center(p);
    for (int it = 1; it <= options.max_iterations; ++it) {
        // w-updates: loss plus (rho deg / 2)||w - mean(z - u)||^2
        for (Eigen::Index m = 0; m < T; ++m) {
            const auto& t = tasks[static_cast<std::size_t>(m)];
            const auto deg = static_cast<double>(degree[static_cast<std::size_t>(m)]);
            center.setZero();
            for (auto row : copies[static_cast<std::size_t>(m)]) center += (st.Z.row(row) - st.Dual.row(row)).transpose();
            if (deg > 0) center /= deg;
            if (loss == LossKind::linear) {
                if (deg == 0) {
                    st.W.row(m) = isolated[static_cast<std::size_t>(m)].solve(t.y).transpose();
                } else {
                    const auto mi = static_cast<std::size_t>(m);
                    st.W.row(m) = factor[mi].solve(xty[mi] + rho * deg * center).transpose();
                }
            } else {
                PenalizedLogistic problem{&t, center, rho * deg, ridge};
                auto r = solve_penalized_logistic(problem, st.intercepts[m], st.W.row(m).transpose(), options.newton);
                st.W.row(m) = r.w.transpose();
                st.intercepts[m] = r.intercept;
            }
        }

        // edge copies: group soft-threshold on each endpoint pair
        Z_prev = st.Z;
        for (Eigen::Index e = 0; e < E; ++e) {
            const auto& edge = graph.edge(static_cast<std::size_t>(e));
            const Eigen::VectorXd a = st.W.row(static_cast<Eigen::Index>(edge.m)).transpose() + st.Dual.row(2 * e).transpose();
            const Eigen::VectorXd b = st.W.row(static_cast<Eigen::Index>(edge.l)).transpose() + st.Dual.row(2 * e + 1).transpose();
            auto [zm, zl] = fuse_edge_pair(a, b, lambda * edge.weight / rho);
            st.Z.row(2 * e) = zm.transpose();
            st.Z.row(2 * e + 1) = zl.transpose();
        }

        // scaled dual ascent and residuals
        double primal_sq = 0.0;
        double w_copy_sq = 0.0;
        for (Eigen::Index e = 0; e < E; ++e) {
            const auto& edge = graph.edge(static_cast<std::size_t>(e));
            for (int side = 0; side < 2; ++side) {
                const auto row = 2 * e + side;
                const auto task = static_cast<Eigen::Index>(side == 0 ? edge.m : edge.l);
                const Eigen::RowVectorXd r = st.W.row(task) - st.Z.row(row);
                st.Dual.row(row) += r;
                primal_sq += r.squaredNorm();
                w_copy_sq += st.W.row(task).squaredNorm();
            }
        }
        st.primal_residual = std::sqrt(primal_sq);
        st.dual_residual = rho * (st.Z - Z_prev).norm();
        st.iterations = it;
        if (options.record_trace) st.residual_trace.emplace_back(st.primal_residual, st.dual_residual);

        const double pri_tol = options.abs_tol + options.rel_tol * std::max(std::sqrt(w_copy_sq), st.Z.norm());
        const double dual_tol = options.abs_tol + options.rel_tol * rho * st.Dual.norm();
        if (st.primal_residual <= pri_tol && st.dual_residual <= dual_tol) {
            st.converged = true;
            break;
        }
    }
    return st;
}

std::vector<SingleTaskFit> run_stll(std::span<const TaskDataset> train, std::span<const TaskDataset> validation,
                                    int grid_count, double grid_ratio) {
    if (train.size() != validation.size()) throw Error(ErrorKind::DimensionMismatch, "train/validation task counts differ");
    std::vector<SingleTaskFit> fits;
    fits.reserve(train.size());
    for (std::size_t m = 0; m < train.size(); ++m) {
        const auto grid = lasso_lambda_grid(train[m], grid_count, grid_ratio);
        fits.push_back(fit_lasso(train[m], grid, validation[m]));
    }
    return fits;
}

std::vector<SingleTaskFit> run_stlr(std::span<const TaskDataset> train, std::span<const TaskDataset> validation,
                                    std::span<const double> grid) {
    if (train.size() != validation.size()) throw Error(ErrorKind::DimensionMismatch, "train/validation task counts differ");
    std::vector<SingleTaskFit> fits;
    fits.reserve(train.size());
    for (std::size_t m = 0; m < train.size(); ++m) fits.push_back(fit_ridge_selected(train[m], grid, validation[m]));
    return fits;
}

} // namespace mtl
