#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mtlcvx/task_data.hpp"

namespace mtl {

enum class SingleTaskMethod { lasso, ridge, ols, logistic_ridge, logistic_lasso };

std::string to_string(SingleTaskMethod method);

struct SingleTaskFit {
    Eigen::VectorXd w;
    double intercept = 0.0;  ///< logistic fits only
    double lambda = 0.0;
    SingleTaskMethod method = SingleTaskMethod::lasso;
    bool converged = true;
    int iterations = 0;
};

struct LassoOptions {
    double tol = 1e-8;  ///< relative change in w between sweeps
    int max_sweeps = 10000;
};

/// Smallest lambda at which every lasso coefficient is zero.
double lasso_lambda_max(const TaskDataset& task);

/// `count` log-spaced values from lambda_max down to ratio * lambda_max.
std::vector<double> lasso_lambda_grid(const TaskDataset& task, int count = 50, double ratio = 1e-4);

/// Coordinate descent for (1/2n)||y - Xw||^2 + lambda ||w||_1 (linear tasks)
/// or the logistic loss + lambda ||w||_1 with a free intercept (logistic tasks).
SingleTaskFit lasso_at(const TaskDataset& task, double lambda, const SingleTaskFit* warm = nullptr,
                       const LassoOptions& options = {});

/// Warm-started solutions along `grid` (sorted into descending order).
std::vector<SingleTaskFit> lasso_path(const TaskDataset& task, std::span<const double> grid,
                                      const LassoOptions& options = {});

/// Mean squared error (linear) or mean negative log-likelihood (logistic).
double validation_loss(const SingleTaskFit& fit, const TaskDataset& validation);

/// Lasso with lambda picked from `grid` by validation loss; ties go to the
/// larger lambda.
SingleTaskFit fit_lasso(const TaskDataset& task, std::span<const double> grid, const TaskDataset& validation,
                        const LassoOptions& options = {});

/// Lasso with lambda picked from `grid` by K-fold cross-validation on `task`
/// (fold assignment shuffled by `seed`), then refit on all rows.
SingleTaskFit fit_lasso_cv(const TaskDataset& task, std::span<const double> grid, int folds, std::uint64_t seed,
                           const LassoOptions& options = {});

/// w = (X^T X / n + lambda I)^{-1} X^T y / n. lambda = 0 falls back to OLS.
SingleTaskFit fit_ridge(const TaskDataset& task, double lambda);

/// Least squares via column-pivoted QR; SingularSystem when X is rank deficient.
SingleTaskFit fit_ols(const TaskDataset& task);

/// Logistic loss + (lambda/2)||w||^2 + (intercept_lambda/2) w0^2.
SingleTaskFit fit_logistic_ridge(const TaskDataset& task, double lambda, double intercept_lambda = 0.0);

/// Ridge (linear or logistic by task loss) with lambda picked on validation.
SingleTaskFit fit_ridge_selected(const TaskDataset& task, std::span<const double> grid,
                                 const TaskDataset& validation);

/// Logit of the positive-class rate, clipped away from +-infinity.
double class_prior_logit(const TaskDataset& task);

} // namespace mtl
