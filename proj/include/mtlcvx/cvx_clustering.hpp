#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "mtlcvx/graph.hpp"

namespace mtl {

/// Euclidean projection of `u` onto the ball of the given radius.
/// The origin maps to itself.
Eigen::VectorXd prox_ball(const Eigen::VectorXd& u, double radius);

struct CentroidOptions {
    double rho = 1.0;
    double inner_tol = 1e-8;  ///< relative Frobenius change of Z
    int max_inner = 2000;
    double outer_tol = 1e-8;  ///< relative change of U (and scaled primal residual)
    int max_outer = 500;
    bool record_trace = false;
};

struct CentroidTraceRow {
    int outer = 0;
    int inner_iterations = 0;
    double objective = 0.0;          ///< lowest objective so far (the returned U)
    double iterate_objective = 0.0;  ///< objective at this outer iterate
    double primal_residual = 0.0;    ///< ||S_new - S_old||_F / rho
    double dual_residual = 0.0;      ///< rho ||A (U_new - U_old)||_F
};

/// Centroids U (T x p), per-edge duals S (|E| x p) and the solver settings
/// that produced them.
struct CentroidState {
    Eigen::MatrixXd U;
    Eigen::MatrixXd S;
    double rho = 1.0;
    double eta = 0.0;
    bool converged = false;
    int outer_iterations = 0;
    int inner_iterations = 0;  ///< summed over outer iterations
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    std::vector<CentroidTraceRow> trace;
};

/// (lambda1/2) sum_m ||w_m - u_m||^2 + lambda2 sum_E r_ml ||u_m - u_l||.
double centroid_objective(const Eigen::MatrixXd& W, const Eigen::MatrixXd& U, const WeightGraph& graph,
                          double lambda1, double lambda2);

/// Step size 1 / (lambda1 + 2 max degree), further divided by rho when rho > 1.
double centroid_step_size(const Incidence& incidence, double lambda1, double rho);

/// Augmented-Lagrangian outer loop on the edge differences, each U-minimization
/// done by Nesterov-accelerated proximal gradient. `warm` seeds U and S; S is
/// projected onto the current dual balls first. Returns the lowest-objective
/// iterate (the starting U included), after averaging the rows of each
/// contracted component when that lowers the objective.
CentroidState solve_centroids(const Eigen::MatrixXd& W, const WeightGraph& graph, double lambda1, double lambda2,
                              const CentroidState* warm = nullptr, const CentroidOptions& options = {});

/// Reporting tolerance for "fused" centroids: 1e-6 (1 + ||W||_F / sqrt(T p)).
double default_merge_tolerance(const Eigen::MatrixXd& W);

/// Connected components over edges whose centroid gap is below `tolerance`.
/// Labels are the smallest member index of each component, renumbered 0..C-1
/// in order of first appearance.
std::vector<int> cluster_labels(const Eigen::MatrixXd& U, const WeightGraph& graph, double tolerance);

} // namespace mtl
