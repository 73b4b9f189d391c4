#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mtlcvx/cvx_clustering.hpp"
#include "mtlcvx/graph.hpp"
#include "mtlcvx/logistic_newton.hpp"
#include "mtlcvx/single_task.hpp"
#include "mtlcvx/task_data.hpp"

namespace mtl {

struct FitConfig {
    double lambda1 = 1.0;
    double lambda2 = 0.0;
    double rho = 1.0;
    LossKind loss = LossKind::linear;
    /// Ridge on the logistic intercepts; 0 in simulations, 0.1 for real data.
    double intercept_ridge = 0.0;
    double outer_tol = 1e-6;  ///< relative Frobenius change of W between sweeps
    int max_outer = 500;
    NewtonOptions newton;
    CentroidOptions centroid;

    /// Rejects lambda1 <= 0, negative lambda2, non-positive rho or tolerances.
    void validate() const;
    CentroidOptions centroid_options() const;
};

/// Starting point of a fit. Centroids, when absent, start at W.
struct Initialization {
    Eigen::MatrixXd W;
    Eigen::VectorXd intercepts;
    std::optional<CentroidState> centroids;
};

/// W(0) from single-task fits, one per task in task order.
Initialization initialization_from_fits(std::span<const SingleTaskFit> fits);
/// Zero coefficients; logistic intercepts at the class-prior logit.
Initialization zero_initialization(std::span<const TaskDataset> tasks);

struct ModelState {
    Eigen::MatrixXd W;           ///< T x p coefficients
    Eigen::VectorXd intercepts;  ///< zero for linear tasks
    Eigen::MatrixXd U;           ///< T x p centroids
    CentroidState centroids;     ///< solver state incl. edge duals, for warm starts
    FitConfig config;
    /// Objective after initialization and after every half-step of the sweep.
    std::vector<double> objective_trace;
    int iterations = 0;
    bool converged = false;

    Initialization as_initialization() const;
};

/// Loss of one task, including the intercept ridge for logistic tasks.
double task_loss(const TaskDataset& task, const Eigen::VectorXd& w, double intercept, double intercept_ridge);

double objective(const Eigen::MatrixXd& W, const Eigen::VectorXd& intercepts, const Eigen::MatrixXd& U,
                 std::span<const TaskDataset> tasks, const WeightGraph& graph, double lambda1, double lambda2,
                 double intercept_ridge);
double objective(const ModelState& state, std::span<const TaskDataset> tasks, const WeightGraph& graph);

/// Exact minimizer of (1/2n)||y - Xw||^2 + (lambda1/2)||w - u||^2.
Eigen::VectorXd linear_w_update(const TaskDataset& task, const Eigen::VectorXd& u, double lambda1);

/// Penalized logistic update toward centroid u. Starts from (intercept0, w0)
/// when given, otherwise from zero.
NewtonResult newton_raphson_logistic(const TaskDataset& task, const Eigen::VectorXd& u, double lambda1,
                                     double intercept_ridge, const NewtonOptions& options = {},
                                     std::optional<std::pair<double, Eigen::VectorXd>> start = std::nullopt);

/// Block coordinate descent alternating the centroid solve and per-task
/// coefficient updates until W settles.
ModelState fit_mtlcvx(std::span<const TaskDataset> tasks, const WeightGraph& graph, const FitConfig& config,
                      const Initialization& init);

struct AdaptiveFit {
    ModelState stage1;
    ModelState stage2;
    WeightGraph adaptive_graph;
};

/// Stage 1 fit, adaptive reweighting from its centroids, stage 2 refit.
AdaptiveFit fit_mtlacvx(std::span<const TaskDataset> tasks, const WeightGraph& graph, const FitConfig& stage1,
                        const FitConfig& stage2, const Initialization& init);

std::vector<int> extract_clusters(const ModelState& state, const WeightGraph& graph, double tolerance);
/// Uses default_merge_tolerance of the fitted W.
std::vector<int> extract_clusters(const ModelState& state, const WeightGraph& graph);

} // namespace mtl
