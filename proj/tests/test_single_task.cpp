#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mtlcvx/error.hpp"
#include "mtlcvx/logistic_newton.hpp"
#include "mtlcvx/single_task.hpp"
#include "oracles.hpp"

using namespace mtl;

namespace {

double soft_threshold(double z, double t) { return z > t ? z - t : (z < -t ? z + t : 0.0); }

// KKT residual of the lasso at w: max violation over coordinates.
double lasso_kkt_violation(const TaskDataset& t, const Eigen::VectorXd& w, double lambda) {
    const Eigen::VectorXd c = t.X.transpose() * (t.y - t.X * w) / static_cast<double>(t.n());
    double worst = 0.0;
    for (Eigen::Index j = 0; j < w.size(); ++j)
        worst = std::max(worst, w(j) != 0.0 ? std::abs(std::abs(c(j)) - lambda) : std::max(0.0, std::abs(c(j)) - lambda));
    return worst;
}

} // namespace

TEST(Lasso, ZeroLambdaOrthonormalDesignIsOls) {
    TaskDataset t;
    const int n = 8;
    Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(Eigen::MatrixXd::Random(n, 3)).householderQ() *
                        Eigen::MatrixXd::Identity(n, 3);
    t.X = Q * std::sqrt(static_cast<double>(n));
    t.y = Eigen::VectorXd::Random(n);
    const auto fit = lasso_at(t, 0.0);
    EXPECT_LE((fit.w - oracle::least_squares(t.X, t.y)).norm(), 1e-8);
}

TEST(Lasso, UnivariateSoftThreshold) {
    std::mt19937_64 rng(2);
    for (double lambda : {0.01, 0.3, 1.0}) {
        TaskDataset t;
        t.X = Eigen::VectorXd::Constant(12, 1.7);
        t.y = Eigen::VectorXd::Random(12).array() + 0.8;
        const double n = 12.0;
        const double expect = soft_threshold(t.X.col(0).dot(t.y) / n, lambda) / (t.X.col(0).squaredNorm() / n);
        EXPECT_NEAR(lasso_at(t, lambda).w(0), expect, 1e-10) << lambda;
    }
}

TEST(Lasso, LargeLambdaZeroes) {
    std::mt19937_64 rng(3);
    const auto t = oracle::random_linear_task(rng, 20, 5);
    EXPECT_EQ(lasso_at(t, lasso_lambda_max(t)).w.squaredNorm(), 0.0);
    EXPECT_EQ(lasso_at(t, 1e6).w.squaredNorm(), 0.0);
    EXPECT_GT(lasso_at(t, 0.99 * lasso_lambda_max(t)).w.squaredNorm(), 0.0);
}

TEST(Lasso, KktHoldsAlongPath) {
    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 5; ++rep) {
        const auto t = oracle::random_linear_task(rng, 30, 12);
        const auto grid = lasso_lambda_grid(t, 20, 1e-3);
        const auto path = lasso_path(t, grid);
        ASSERT_EQ(path.size(), grid.size());
        for (const auto& fit : path) EXPECT_LE(lasso_kkt_violation(t, fit.w, fit.lambda), 1e-6) << fit.lambda;
    }
}

TEST(Lasso, GridIsLogSpacedFromLambdaMax) {
    std::mt19937_64 rng(5);
    const auto t = oracle::random_linear_task(rng, 15, 4);
    const auto g = lasso_lambda_grid(t, 50, 1e-4);
    ASSERT_EQ(g.size(), 50u);
    EXPECT_DOUBLE_EQ(g.front(), lasso_lambda_max(t));
    EXPECT_NEAR(g.back() / g.front(), 1e-4, 1e-12);
}

TEST(Lasso, ValidationSelectionPicksArgmin) {
    std::mt19937_64 rng(6);
    const Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(6, -2, 3);
    const auto train = oracle::random_linear_task(rng, 25, 6, 1.0, &w);
    const auto val = oracle::random_linear_task(rng, 40, 6, 1.0, &w);
    const auto grid = lasso_lambda_grid(train, 15, 1e-3);
    const auto chosen = fit_lasso(train, grid, val);
    double best = 1e300;
    for (double l : grid) best = std::min(best, validation_loss(lasso_at(train, l), val));
    EXPECT_NEAR(validation_loss(chosen, val), best, 1e-8 * best);

    const std::vector<double> one{0.05};
    EXPECT_EQ(fit_lasso(train, one, val).lambda, 0.05);
}

TEST(Lasso, CrossValidatedFitIsDeterministic) {
    std::mt19937_64 rng(7);
    const auto t = oracle::random_linear_task(rng, 40, 6);
    const auto grid = lasso_lambda_grid(t, 10, 1e-3);
    const auto a = fit_lasso_cv(t, grid, 5, 42);
    const auto b = fit_lasso_cv(t, grid, 5, 42);
    EXPECT_EQ(a.lambda, b.lambda);
    EXPECT_EQ(a.w, b.w);
    EXPECT_LE(lasso_kkt_violation(t, a.w, a.lambda), 1e-6);
}

TEST(Ridge, ScalarExample) {
    TaskDataset t;
    t.X = Eigen::MatrixXd::Constant(1, 1, 1.0);
    t.y = Eigen::VectorXd::Constant(1, 2.0);
    EXPECT_DOUBLE_EQ(fit_ridge(t, 1.0).w(0), 1.0);
}

TEST(Ridge, ZeroLambdaMatchesLeastSquares) {
    std::mt19937_64 rng(8);
    const auto t = oracle::random_linear_task(rng, 30, 5);
    const auto fit = fit_ridge(t, 0.0);
    EXPECT_LE((fit.w - oracle::least_squares(t.X, t.y)).norm(), 1e-10);
    EXPECT_LE((fit_ols(t).w - fit.w).norm(), 1e-10);
}

TEST(Ridge, NormalEquationsAndShrinkage) {
    std::mt19937_64 rng(9);
    const auto t = oracle::random_linear_task(rng, 25, 6);
    const double n = 25.0;
    double prev = 1e300;
    for (double lambda : {0.01, 0.1, 1.0, 10.0, 1e8}) {
        const auto fit = fit_ridge(t, lambda);
        const Eigen::VectorXd r = (t.X.transpose() * t.X / n + lambda * Eigen::MatrixXd::Identity(6, 6)) * fit.w -
                                  t.X.transpose() * t.y / n;
        EXPECT_LE(r.norm(), 1e-8);
        EXPECT_LT(fit.w.norm(), prev);
        prev = fit.w.norm();
    }
    EXPECT_LT(prev, 1e-6);
}

TEST(Ridge, SingularDesignAtZeroLambda) {
    TaskDataset t;
    t.X = Eigen::MatrixXd::Ones(5, 2);
    t.y = Eigen::VectorXd::Random(5);
    try {
        fit_ols(t);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::SingularSystem);
    }
}

TEST(LogisticRidge, BalancedZeroDesign) {
    TaskDataset t;
    t.loss = LossKind::logistic;
    t.X = Eigen::MatrixXd::Zero(6, 2);
    t.y.resize(6);
    t.y << 1, 0, 1, 0, 1, 0;
    const auto fit = fit_logistic_ridge(t, 0.5);
    EXPECT_NEAR(fit.intercept, 0.0, 1e-10);
    EXPECT_LE(fit.w.norm(), 1e-12);
}

TEST(LogisticRidge, HeavyPenaltyLeavesPriorLogit) {
    std::mt19937_64 rng(10);
    const auto t = oracle::random_logistic_task(rng, 40, 3);
    const auto fit = fit_logistic_ridge(t, 1e8);
    const double rate = t.y.mean();
    EXPECT_LE(fit.w.norm(), 1e-6);
    EXPECT_NEAR(fit.intercept, std::log(rate / (1.0 - rate)), 1e-5);
}

TEST(LogisticRidge, MatchesFirstOrderOracle) {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 5; ++rep) {
        const auto t = oracle::random_logistic_task(rng, 30, 3);
        const double lambda = 0.05 + 0.1 * rep;
        const auto fit = fit_logistic_ridge(t, lambda, 0.0);
        const auto theta = oracle::logistic_subproblem_gd(t, Eigen::VectorXd::Zero(3), lambda, 0.0, 20000);
        EXPECT_NEAR(fit.intercept, theta(0), 1e-5);
        EXPECT_LE((fit.w - theta.tail(3)).norm(), 1e-5);

        PenalizedLogistic prob{&t, Eigen::VectorXd::Zero(3), lambda, 0.0};
        EXPECT_LE(prob.gradient(fit.intercept, fit.w).norm(), 1e-6);
    }
}

TEST(LogisticRidge, SeparableUnpenalizedDetected) {
    TaskDataset t;
    t.loss = LossKind::logistic;
    t.X.resize(6, 1);
    t.X << -3, -2, -1, 1, 2, 3;
    t.y.resize(6);
    t.y << 0, 0, 0, 1, 1, 1;
    try {
        fit_logistic_ridge(t, 0.0, 0.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Separation);
    }
    EXPECT_NO_THROW(fit_logistic_ridge(t, 0.1, 0.0));
}

TEST(LogisticLasso, ZeroesAboveLambdaMax) {
    std::mt19937_64 rng(12);
    const auto t = oracle::random_logistic_task(rng, 50, 4);
    const auto fit = lasso_at(t, lasso_lambda_max(t) * 1.01);
    EXPECT_EQ(fit.w.squaredNorm(), 0.0);
    const double rate = t.y.mean();
    EXPECT_NEAR(fit.intercept, std::log(rate / (1.0 - rate)), 1e-6);
}

TEST(LogisticLasso, KktAtSolution) {
    std::mt19937_64 rng(13);
    const auto t = oracle::random_logistic_task(rng, 60, 5);
    const double lambda = 0.2 * lasso_lambda_max(t);
    const auto fit = lasso_at(t, lambda);
    const Eigen::VectorXd eta = (t.X * fit.w).array() + fit.intercept;
    Eigen::VectorXd r(t.n());
    for (Eigen::Index i = 0; i < eta.size(); ++i) r(i) = t.y(i) - sigmoid(eta(i));
    EXPECT_NEAR(r.mean(), 0.0, 1e-6);
    const Eigen::VectorXd c = t.X.transpose() * r / static_cast<double>(t.n());
    for (Eigen::Index j = 0; j < 5; ++j) {
        if (fit.w(j) != 0.0)
            EXPECT_NEAR(std::abs(c(j)), lambda, 1e-5);
        else
            EXPECT_LE(std::abs(c(j)), lambda + 1e-5);
    }
}
