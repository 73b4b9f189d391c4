#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mtlcvx/graph.hpp"
#include "mtlcvx/logistic_newton.hpp"
#include "mtlcvx/single_task.hpp"
#include "mtlcvx/task_data.hpp"

namespace mtl {

struct NetworkLassoOptions {
    double rho = 1.0;
    /// Stop when both residual norms fall below abs_tol + rel_tol * scale.
    double abs_tol = 1e-6;
    double rel_tol = 0.0;
    int max_iterations = 20000;
    double intercept_ridge = 0.0;
    NewtonOptions newton;
    bool record_trace = false;
};

/// ADMM state with one copy of w per edge endpoint. Row 2e of Z / Dual is
/// the copy held by edge(e).m, row 2e + 1 the copy held by edge(e).l.
/// Dual variables are in scaled form.
struct NetworkLassoState {
    Eigen::MatrixXd W;
    Eigen::VectorXd intercepts;
    Eigen::MatrixXd Z;
    Eigen::MatrixXd Dual;
    double lambda = 0.0;
    double rho = 1.0;
    int iterations = 0;
    bool converged = false;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    std::vector<std::pair<double, double>> residual_trace;
};

/// sum_m L_m(w_m) + lambda sum_E r_ml ||w_m - w_l||.
double network_lasso_objective(std::span<const TaskDataset> tasks, const Eigen::MatrixXd& W,
                               const Eigen::VectorXd& intercepts, const WeightGraph& graph, double lambda,
                               double intercept_ridge);

/// Network-lasso multi-task fit by consensus ADMM. `warm` seeds W, the edge
/// copies and the duals (used along a lambda path with equal rho).
NetworkLassoState fit_mtlnl(std::span<const TaskDataset> tasks, const WeightGraph& graph, double lambda,
                            const NetworkLassoOptions& options = {}, const NetworkLassoState* warm = nullptr);

/// Group soft-threshold of one edge: returns the pair (z_m, z_l).
std::pair<Eigen::VectorXd, Eigen::VectorXd> fuse_edge_pair(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                                           double threshold);

/// Per-task lasso (L1-logistic for binary tasks) with a 50-point grid from
/// each task's lambda_max, selected on that task's validation split.
std::vector<SingleTaskFit> run_stll(std::span<const TaskDataset> train, std::span<const TaskDataset> validation,
                                    int grid_count = 50, double grid_ratio = 1e-4);

/// Per-task ridge (logistic ridge for binary tasks) selected on validation.
std::vector<SingleTaskFit> run_stlr(std::span<const TaskDataset> train, std::span<const TaskDataset> validation,
                                    std::span<const double> grid);

} // namespace mtl
