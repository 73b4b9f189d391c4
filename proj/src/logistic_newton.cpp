#include "mtlcvx/logistic_newton.hpp"

#include <algorithm>
#include <cmath>

#include "mtlcvx/error.hpp"

namespace mtl {

double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double PenalizedLogistic::objective(double w0, const Eigen::VectorXd& w) const {
    const auto& t = *task;
    const Eigen::VectorXd eta = (t.X * w).array() + w0;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) loss += softplus(eta[i]) - t.y[i] * eta[i];
    loss /= static_cast<double>(t.n());
    return loss + 0.5 * coef_ridge * (w - center).squaredNorm() + 0.5 * intercept_ridge * w0 * w0;
}

Eigen::VectorXd PenalizedLogistic::gradient(double w0, const Eigen::VectorXd& w) const {
    const auto& t = *task;
    const double inv_n = 1.0 / static_cast<double>(t.n());
    const Eigen::VectorXd eta = (t.X * w).array() + w0;
    Eigen::VectorXd resid(eta.size());  // y - pi
    for (Eigen::Index i = 0; i < eta.size(); ++i) resid[i] = t.y[i] - sigmoid(eta[i]);
    Eigen::VectorXd g(w.size() + 1);
    g[0] = -resid.sum() * inv_n + intercept_ridge * w0;
    g.tail(w.size()) = -(t.X.transpose() * resid) * inv_n + coef_ridge * (w - center);
    return g;
}

NewtonResult solve_penalized_logistic(const PenalizedLogistic& problem, double intercept0, const Eigen::VectorXd& w0,
                                      const NewtonOptions& options) {
    const auto& t = *problem.task;
    const auto n = static_cast<Eigen::Index>(t.n());
    const auto p = t.X.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    const bool unpenalized = problem.coef_ridge == 0.0 && problem.intercept_ridge == 0.0;

    NewtonResult r;
    r.intercept = intercept0;
    r.w = w0;
    double f = problem.objective(r.intercept, r.w);

    Eigen::VectorXd pi(n);
    Eigen::VectorXd weight(n);
    Eigen::MatrixXd H(p, p);
    for (r.iterations = 0; r.iterations <= options.max_iterations; ++r.iterations) {
        const Eigen::VectorXd eta = (t.X * r.w).array() + r.intercept;
        for (Eigen::Index i = 0; i < n; ++i) {
            pi[i] = sigmoid(eta[i]);
            weight[i] = std::max(pi[i] * (1.0 - pi[i]), options.weight_floor);
        }
        const Eigen::VectorXd resid = t.y - pi;
        const double g0 = -resid.sum() * inv_n + problem.intercept_ridge * r.intercept;
        const Eigen::VectorXd g = -(t.X.transpose() * resid) * inv_n + problem.coef_ridge * (r.w - problem.center);
        r.gradient_norm = std::sqrt(g0 * g0 + g.squaredNorm());
        if (r.gradient_norm < options.gradient_tol) {
            r.converged = true;
            break;
        }
        if (r.iterations == options.max_iterations) break;

        const double h0 = weight.sum() * inv_n + problem.intercept_ridge;
        const double step0 = -g0 / h0;
        H.noalias() = t.X.transpose() * weight.asDiagonal() * t.X * inv_n;
        H.diagonal().array() += problem.coef_ridge;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
        Eigen::VectorXd step = ldlt.solve(-g);
        if (ldlt.info() != Eigen::Success || !step.allFinite())
            throw Error(ErrorKind::SingularSystem, "logistic Hessian is singular for task " + t.task_id);

        // Step halving: the block-diagonal Hessian gives a descent direction,
        // so a sufficiently short step always decreases the objective.
        double scale = 1.0;
        double trial_b = r.intercept + step0;
        Eigen::VectorXd trial_w = r.w + step;
        double trial_f = problem.objective(trial_b, trial_w);
        int halvings = 0;
        while (!(trial_f <= f) && halvings < 60) {
            scale *= 0.5;
            trial_b = r.intercept + scale * step0;
            trial_w = r.w + scale * step;
            trial_f = problem.objective(trial_b, trial_w);
            ++halvings;
        }
        if (!(trial_f <= f)) break;  // no representable decrease left
        r.intercept = trial_b;
        r.w = std::move(trial_w);
        f = trial_f;

        if (unpenalized && (std::abs(r.intercept) > 1e6 || r.w.lpNorm<Eigen::Infinity>() > 1e6))
            throw Error(ErrorKind::Separation, "coefficients diverge for task " + t.task_id);
    }
    if (unpenalized) {
        // Without any penalty a perfectly separating direction drives the
        // gradient to zero only as the coefficients run off to infinity.
        const Eigen::VectorXd eta = (t.X * r.w).array() + r.intercept;
        double worst = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) worst = std::max(worst, std::abs(t.y[i] - sigmoid(eta[i])));
        if (worst < 1e-3) throw Error(ErrorKind::Separation, "classes are separable for task " + t.task_id);
    }
    return r;
}

} // namespace mtl
