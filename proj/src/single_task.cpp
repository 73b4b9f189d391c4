#include "mtlcvx/single_task.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>

#include "mtlcvx/error.hpp"
#include "mtlcvx/logistic_newton.hpp"
#include "mtlcvx/rng.hpp"

namespace mtl {

namespace {

double soft_threshold(double z, double lambda) {
    if (z > lambda) return z - lambda;
    if (z < -lambda) return z + lambda;
    return 0.0;
}

void require_grid(std::span<const double> grid) {
    if (grid.empty()) throw Error(ErrorKind::InvalidArgument, "empty lambda grid");
    for (double v : grid)
        if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "lambda must be >= 0");
}

std::vector<double> descending(std::span<const double> grid) {
    std::vector<double> g(grid.begin(), grid.end());
    std::sort(g.begin(), g.end(), std::greater<>());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
}

// Moments X^T X / n and X^T y / n, shared along a lambda path.
struct Moments {
    Eigen::MatrixXd G;
    Eigen::VectorXd c;

    explicit Moments(const TaskDataset& task) {
        const double inv_n = 1.0 / static_cast<double>(task.n());
        G = task.X.transpose() * task.X * inv_n;
        c = task.X.transpose() * task.y * inv_n;
    }
};

// Covariance-update coordinate descent on (1/2n)||y - Xw||^2 + lambda ||w||_1.
SingleTaskFit linear_lasso(const Moments& moments, double lambda, const SingleTaskFit* warm,
                           const LassoOptions& options) {
    const Eigen::MatrixXd& G = moments.G;
    const Eigen::VectorXd& c = moments.c;
    const auto p = G.cols();

    SingleTaskFit fit;
    fit.method = SingleTaskMethod::lasso;
    fit.lambda = lambda;
    fit.w = warm ? warm->w : Eigen::VectorXd::Zero(p);
    Eigen::VectorXd q = c - G * fit.w;  // x_j^T (y - Xw) / n

    auto update = [&](Eigen::Index j) {
        const double gjj = G(j, j);
        const double old = fit.w[j];
        const double fresh = gjj > 0.0 ? soft_threshold(q[j] + gjj * old, lambda) / gjj : 0.0;
        const double delta = fresh - old;
        if (delta != 0.0) {
            fit.w[j] = fresh;
            q.noalias() -= G.col(j) * delta;
        }
        return std::abs(delta);
    };
    auto converged = [&](double max_delta) {
        return max_delta <= options.tol * std::max(1.0, fit.w.lpNorm<Eigen::Infinity>());
    };

    std::vector<Eigen::Index> active;
    fit.converged = false;
    int sweeps = 0;
    while (sweeps < options.max_sweeps) {
        // full sweep over every coordinate
        double max_delta = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) max_delta = std::max(max_delta, update(j));
        ++sweeps;
        if (converged(max_delta)) {
            fit.converged = true;
            break;
        }
        active.clear();
        for (Eigen::Index j = 0; j < p; ++j)
            if (fit.w[j] != 0.0) active.push_back(j);
        // cycle on the active set until it settles, then re-check everything
        while (sweeps < options.max_sweeps) {
            max_delta = 0.0;
            for (auto j : active) max_delta = std::max(max_delta, update(j));
            ++sweeps;
            if (converged(max_delta)) break;
        }
    }
    fit.iterations = sweeps;
    return fit;
}

double logistic_l1_objective(const TaskDataset& task, double b, const Eigen::VectorXd& w, double lambda) {
    PenalizedLogistic loss{&task, Eigen::VectorXd::Zero(w.size()), 0.0, 0.0};
    return loss.objective(b, w) + lambda * w.lpNorm<1>();
}

// Proximal Newton: weighted-least-squares quadratic model solved by
// coordinate descent, then step halving on the true objective.
SingleTaskFit logistic_lasso(const TaskDataset& task, double lambda, const SingleTaskFit* warm,
                             const LassoOptions& options) {
    const auto n = task.X.rows();
    const auto p = task.X.cols();
    const double inv_n = 1.0 / static_cast<double>(n);

    SingleTaskFit fit;
    fit.method = SingleTaskMethod::logistic_lasso;
    fit.lambda = lambda;
    fit.w = warm ? warm->w : Eigen::VectorXd::Zero(p);
    fit.intercept = warm ? warm->intercept : class_prior_logit(task);
    fit.converged = false;
    double f = logistic_l1_objective(task, fit.intercept, fit.w, lambda);

    Eigen::VectorXd v(n);
    Eigen::VectorXd r(n);
    Eigen::VectorXd h(p);
    constexpr int max_newton = 100;
    constexpr int max_inner = 1000;
    int outer = 0;
    for (; outer < max_newton; ++outer) {
        const Eigen::VectorXd eta = (task.X * fit.w).array() + fit.intercept;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double pi = sigmoid(eta[i]);
            v[i] = std::max(pi * (1.0 - pi), 1e-5);
            r[i] = (task.y[i] - pi) / v[i];  // z - eta
        }
        for (Eigen::Index j = 0; j < p; ++j) h[j] = (v.array() * task.X.col(j).array().square()).sum() * inv_n;
        const double v_sum = v.sum();

        double b = fit.intercept;
        Eigen::VectorXd w = fit.w;
        for (int sweep = 0; sweep < max_inner; ++sweep) {
            double max_delta = 0.0;
            const double db = (v.array() * r.array()).sum() / v_sum;
            b += db;
            r.array() -= db;
            max_delta = std::abs(db);
            for (Eigen::Index j = 0; j < p; ++j) {
                if (h[j] <= 0.0) continue;
                const double g = (v.array() * task.X.col(j).array() * r.array()).sum() * inv_n + h[j] * w[j];
                const double fresh = soft_threshold(g, lambda) / h[j];
                const double delta = fresh - w[j];
                if (delta != 0.0) {
                    r.noalias() -= task.X.col(j) * delta;
                    w[j] = fresh;
                    max_delta = std::max(max_delta, std::abs(delta));
                }
            }
            if (max_delta <= 0.1 * options.tol * std::max(1.0, w.lpNorm<Eigen::Infinity>())) break;
        }

        const double step_b = b - fit.intercept;
        const Eigen::VectorXd step_w = w - fit.w;
        double t = 1.0;
        double trial = logistic_l1_objective(task, fit.intercept + step_b, fit.w + step_w, lambda);
        while (trial > f && t > 1e-10) {
            t *= 0.5;
            trial = logistic_l1_objective(task, fit.intercept + t * step_b, fit.w + t * step_w, lambda);
        }
        if (trial > f) {
            fit.converged = true;  // no further decrease representable
            break;
        }
        fit.intercept += t * step_b;
        fit.w += t * step_w;
        f = trial;
        const double change = t * std::max(std::abs(step_b), step_w.lpNorm<Eigen::Infinity>());
        if (change <= options.tol * std::max(1.0, fit.w.lpNorm<Eigen::Infinity>())) {
            fit.converged = true;
            break;
        }
    }
    fit.iterations = outer + 1;
    return fit;
}

} // namespace

std::string to_string(SingleTaskMethod method) {
    switch (method) {
    case SingleTaskMethod::lasso: return "lasso";
    case SingleTaskMethod::ridge: return "ridge";
    case SingleTaskMethod::ols: return "ols";
    case SingleTaskMethod::logistic_ridge: return "logistic_ridge";
    case SingleTaskMethod::logistic_lasso: return "logistic_lasso";
    }
    return "unknown";
}

double class_prior_logit(const TaskDataset& task) {
    const double n = static_cast<double>(task.n());
    const double rate = std::clamp(task.y.sum() / n, 0.5 / n, 1.0 - 0.5 / n);
    return std::log(rate / (1.0 - rate));
}

double lasso_lambda_max(const TaskDataset& task) {
    validate_task(task);
    const double inv_n = 1.0 / static_cast<double>(task.n());
    if (task.loss == LossKind::linear) return (task.X.transpose() * task.y).lpNorm<Eigen::Infinity>() * inv_n;
    const Eigen::VectorXd centered = task.y.array() - sigmoid(class_prior_logit(task));
    return (task.X.transpose() * centered).lpNorm<Eigen::Infinity>() * inv_n;
}

std::vector<double> lasso_lambda_grid(const TaskDataset& task, int count, double ratio) {
    if (count < 1 || !(ratio > 0.0 && ratio <= 1.0))
        throw Error(ErrorKind::InvalidArgument, "lambda grid needs count >= 1 and ratio in (0,1]");
    const double top = lasso_lambda_max(task);
    std::vector<double> grid(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double frac = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
        grid[static_cast<std::size_t>(i)] = top * std::pow(ratio, frac);
    }
    return grid;
}

SingleTaskFit lasso_at(const TaskDataset& task, double lambda, const SingleTaskFit* warm, const LassoOptions& options) {
    validate_task(task);
    if (!(lambda >= 0.0)) throw Error(ErrorKind::InvalidArgument, "lambda must be >= 0");
    if (warm && warm->w.size() != task.X.cols()) warm = nullptr;
    return task.loss == LossKind::linear ? linear_lasso(Moments(task), lambda, warm, options)
                                         : logistic_lasso(task, lambda, warm, options);
}

std::vector<SingleTaskFit> lasso_path(const TaskDataset& task, std::span<const double> grid,
                                      const LassoOptions& options) {
    require_grid(grid);
    std::vector<SingleTaskFit> path;
    if (task.loss == LossKind::linear) {
        validate_task(task);
        const Moments moments(task);
        for (double lambda : descending(grid))
            path.push_back(linear_lasso(moments, lambda, path.empty() ? nullptr : &path.back(), options));
        return path;
    }
    for (double lambda : descending(grid)) path.push_back(lasso_at(task, lambda, path.empty() ? nullptr : &path.back(), options));
    return path;
}

double validation_loss(const SingleTaskFit& fit, const TaskDataset& validation) {
    const Eigen::VectorXd eta = (validation.X * fit.w).array() + fit.intercept;
    if (validation.loss == LossKind::linear) return (validation.y - eta).squaredNorm() / static_cast<double>(validation.n());
    double s = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) s += softplus(eta[i]) - validation.y[i] * eta[i];
    return s / static_cast<double>(validation.n());
}

SingleTaskFit fit_lasso(const TaskDataset& task, std::span<const double> grid, const TaskDataset& validation,
                        const LassoOptions& options) {
    auto path = lasso_path(task, grid, options);
    std::size_t best = 0;
    double best_loss = validation_loss(path[0], validation);
    for (std::size_t i = 1; i < path.size(); ++i) {
        const double loss = validation_loss(path[i], validation);
        if (loss < best_loss) {
            best_loss = loss;
            best = i;
        }
    }
    return path[best];
}

SingleTaskFit fit_lasso_cv(const TaskDataset& task, std::span<const double> grid, int folds, std::uint64_t seed,
                           const LassoOptions& options) {
    validate_task(task);
    const auto n = static_cast<std::size_t>(task.n());
    if (folds < 2 || static_cast<std::size_t>(folds) > n)
        throw Error(ErrorKind::InvalidArgument, "cross-validation needs 2 <= folds <= n");
    std::vector<double> sorted(grid.begin(), grid.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<double> cv_loss(sorted.size(), 0.0);
    for (int f = 0; f < folds; ++f) {
        std::vector<std::size_t> fit_rows;
        std::vector<std::size_t> held_rows;
        for (std::size_t i = 0; i < n; ++i) (static_cast<int>(i % static_cast<std::size_t>(folds)) == f ? held_rows : fit_rows).push_back(order[i]);
        std::sort(fit_rows.begin(), fit_rows.end());
        std::sort(held_rows.begin(), held_rows.end());
        const auto fit_part = select_rows(task, fit_rows);
        const auto held_part = select_rows(task, held_rows);
        const auto path = lasso_path(fit_part, sorted, options);
        const double share = static_cast<double>(held_rows.size()) / static_cast<double>(n);
        for (std::size_t i = 0; i < path.size(); ++i) cv_loss[i] += share * validation_loss(path[i], held_part);
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < cv_loss.size(); ++i)
        if (cv_loss[i] < cv_loss[best]) best = i;
    const std::span<const double> head(sorted.data(), best + 1);
    auto path = lasso_path(task, head, options);
    return path.back();
}

SingleTaskFit fit_ols(const TaskDataset& task) {
    validate_task(task);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(task.X);
    if (qr.rank() < task.X.cols())
        throw Error(ErrorKind::SingularSystem, "design of task " + task.task_id + " is rank deficient");
    SingleTaskFit fit;
    fit.method = SingleTaskMethod::ols;
    fit.w = qr.solve(task.y);
    return fit;
}

SingleTaskFit fit_ridge(const TaskDataset& task, double lambda) {
    validate_task(task);
    if (!(lambda >= 0.0)) throw Error(ErrorKind::InvalidArgument, "lambda must be >= 0");
    if (lambda == 0.0) {
        auto fit = fit_ols(task);
        fit.method = SingleTaskMethod::ridge;
        return fit;
    }
    const double inv_n = 1.0 / static_cast<double>(task.n());
    Eigen::MatrixXd A = task.X.transpose() * task.X * inv_n;
    A.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) throw Error(ErrorKind::SingularSystem, "ridge system not positive definite");
    SingleTaskFit fit;
    fit.method = SingleTaskMethod::ridge;
    fit.lambda = lambda;
    fit.w = llt.solve(task.X.transpose() * task.y * inv_n);
    return fit;
}

SingleTaskFit fit_logistic_ridge(const TaskDataset& task, double lambda, double intercept_lambda) {
    validate_task(task);
    if (task.loss != LossKind::logistic) throw Error(ErrorKind::InvalidArgument, "logistic ridge needs a logistic task");
    if (task.y.sum() == 0.0 || task.y.sum() == static_cast<double>(task.n()))
        throw Error(ErrorKind::SingleClass, "task " + task.task_id);
    if (!(lambda >= 0.0) || !(intercept_lambda >= 0.0))
        throw Error(ErrorKind::InvalidArgument, "penalties must be >= 0");
    const auto p = task.X.cols();
    PenalizedLogistic problem{&task, Eigen::VectorXd::Zero(p), lambda, intercept_lambda};
    NewtonOptions opts;
    opts.gradient_tol = 1e-9;
    opts.max_iterations = 500;
    const double start = intercept_lambda > 0.0 ? 0.0 : class_prior_logit(task);
    auto r = solve_penalized_logistic(problem, start, Eigen::VectorXd::Zero(p), opts);
    SingleTaskFit fit;
    fit.method = SingleTaskMethod::logistic_ridge;
    fit.lambda = lambda;
    fit.w = std::move(r.w);
    fit.intercept = r.intercept;
    fit.converged = r.converged;
    fit.iterations = r.iterations;
    return fit;
}

SingleTaskFit fit_ridge_selected(const TaskDataset& task, std::span<const double> grid, const TaskDataset& validation) {
    require_grid(grid);
    std::optional<SingleTaskFit> best;
    double best_loss = 0.0;
    for (double lambda : descending(grid)) {
        auto fit = task.loss == LossKind::linear ? fit_ridge(task, lambda) : fit_logistic_ridge(task, lambda);
        const double loss = validation_loss(fit, validation);
        if (!best || loss < best_loss) {
            best_loss = loss;
            best = std::move(fit);
        }
    }
    return *best;
}

} // namespace mtl
