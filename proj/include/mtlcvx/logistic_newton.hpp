#pragma once

#include <Eigen/Dense>

#include "mtlcvx/task_data.hpp"

namespace mtl {

/// Penalized logistic problem
///   -(1/n) sum_i [ y_i eta_i - log(1 + exp(eta_i)) ]
///     + (coef_ridge / 2) ||w - center||^2 + (intercept_ridge / 2) w0^2,
/// with eta_i = w0 + x_i^T w.
struct PenalizedLogistic {
    const TaskDataset* task = nullptr;
    Eigen::VectorXd center;
    double coef_ridge = 0.0;
    double intercept_ridge = 0.0;

    double objective(double w0, const Eigen::VectorXd& w) const;
    /// Gradient stacked as (d/dw0, d/dw).
    Eigen::VectorXd gradient(double w0, const Eigen::VectorXd& w) const;
};

struct NewtonOptions {
    double gradient_tol = 1e-6;
    int max_iterations = 200;
    /// Lower clamp on pi (1 - pi) keeping steps finite under near-separation.
    double weight_floor = 1e-10;
};

struct NewtonResult {
    double intercept = 0.0;
    Eigen::VectorXd w;
    double gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Newton-Raphson with separate intercept and coefficient steps computed at
/// the same linear predictor, followed by step halving whenever the full
/// step would increase the objective.
NewtonResult solve_penalized_logistic(const PenalizedLogistic& problem, double intercept0, const Eigen::VectorXd& w0,
                                      const NewtonOptions& options = {});

/// log(1 + exp(x)) without overflow.
double softplus(double x);
double sigmoid(double x);

} // namespace mtl
