#include <random>
#include <set>

#include <gtest/gtest.h>

#include "mtlcvx/cvx_clustering.hpp"
#include "mtlcvx/graph.hpp"
#include "oracles.hpp"

using namespace mtl;

namespace {

Eigen::MatrixXd gaussian(std::mt19937_64& rng, int rows, int cols, double sd = 1.0) {
    std::normal_distribution<double> N(0.0, sd);
    Eigen::MatrixXd M(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) M(i, j) = N(rng);
    return M;
}

WeightGraph complete_graph(std::size_t T) {
    std::vector<Edge> e;
    for (std::size_t m = 0; m < T; ++m)
        for (std::size_t l = m + 1; l < T; ++l) e.push_back({m, l, 1.0});
    return WeightGraph(T, e);
}

std::size_t distinct_rows(const Eigen::MatrixXd& U, double tol) {
    std::size_t count = 0;
    for (Eigen::Index i = 0; i < U.rows(); ++i) {
        bool seen = false;
        for (Eigen::Index j = 0; j < i && !seen; ++j) seen = (U.row(i) - U.row(j)).norm() < tol;
        if (!seen) ++count;
    }
    return count;
}

} // namespace

TEST(ProxBall, Examples) {
    const Eigen::Vector2d u(3, 4);
    EXPECT_EQ(prox_ball(u, 10.0), u);
    EXPECT_LE((prox_ball(u, 1.0) - Eigen::Vector2d(0.6, 0.8)).norm(), 1e-15);
    EXPECT_EQ(prox_ball(Eigen::Vector2d::Zero(), 1.0), Eigen::Vector2d::Zero());
    EXPECT_EQ(prox_ball(u, 0.0), Eigen::Vector2d::Zero());
}

TEST(ProxBall, IdempotentAndNonExpansive) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> R(0.0, 3.0);
    for (int rep = 0; rep < 500; ++rep) {
        const Eigen::VectorXd u = gaussian(rng, 4, 1, 2.0);
        const Eigen::VectorXd v = gaussian(rng, 4, 1, 2.0);
        const double r = R(rng);
        const Eigen::VectorXd pu = prox_ball(u, r);
        EXPECT_LE((prox_ball(pu, r) - pu).norm(), 1e-15);
        EXPECT_LE(pu.norm(), r + 1e-12);
        EXPECT_LE((pu - prox_ball(v, r)).norm(), (u - v).norm() + 1e-12);
    }
}

TEST(SolveCentroids, NoFusionReturnsW) {
    std::mt19937_64 rng(2);
    const auto W = gaussian(rng, 6, 3);
    const auto st = solve_centroids(W, build_knn_weights(W, 2), 1.0, 0.0);
    EXPECT_EQ(st.U, W);
}

TEST(SolveCentroids, StepSizeAsPrinted) {
    const WeightGraph g(3, {{0, 1, 1.0}, {1, 2, 1.0}});
    const auto inc = build_incidence(g);
    EXPECT_DOUBLE_EQ(centroid_step_size(inc, 0.5, 1.0), 1.0 / 4.5);
    EXPECT_DOUBLE_EQ(centroid_step_size(inc, 0.5, 2.0), 1.0 / 9.0);
    std::mt19937_64 rng(3);
    const auto st = solve_centroids(gaussian(rng, 3, 2), g, 0.5, 0.1);
    EXPECT_DOUBLE_EQ(st.eta, 1.0 / 4.5);
}

TEST(SolveCentroids, FullFusionGivesColumnMean) {
    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 5; ++rep) {
        const auto W = gaussian(rng, 8, 3, 2.0);
        const auto g = build_knn_weights(W, 3);
        const auto st = solve_centroids(W, g, 1.0, 1e6);
        const Eigen::RowVectorXd mean = W.colwise().mean();
        for (Eigen::Index m = 0; m < W.rows(); ++m) EXPECT_LE((st.U.row(m) - mean).norm(), 1e-4);
        const auto labels = cluster_labels(st.U, g, default_merge_tolerance(W));
        EXPECT_EQ(std::set<int>(labels.begin(), labels.end()).size(), 1u);
    }
}

TEST(SolveCentroids, MatchesSubgradientOracle) {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 3; ++rep) {
        const auto W = gaussian(rng, 3, 2);
        const auto g = complete_graph(3);
        const double l1 = 1.0, l2 = 0.05 + 0.1 * rep;
        const auto st = solve_centroids(W, g, l1, l2);
        const double ours = centroid_objective(W, st.U, g, l1, l2);
        const double ref = oracle::subgradient_centroids(W, g, l1, l2, 200000);
        EXPECT_LE(ours, ref * (1.0 + 1e-5) + 1e-12);
        EXPECT_GE(ours, ref * (1.0 - 1e-5) - 1e-12);
        EXPECT_NEAR(ours, oracle::centroid_objective(W, st.U, g, l1, l2), 1e-12);
    }
}

TEST(SolveCentroids, DualFeasibleAndMonotoneTrace) {
    std::mt19937_64 rng(6);
    CentroidOptions opt;
    opt.record_trace = true;
    for (int rep = 0; rep < 10; ++rep) {
        const auto W = gaussian(rng, 10, 3, 3.0);
        const auto g = build_knn_weights(W, 3);
        const double l2 = 0.2 + 0.3 * rep;
        const auto st = solve_centroids(W, g, 1.0, l2, nullptr, opt);
        ASSERT_FALSE(st.trace.empty());
        for (std::size_t e = 0; e < g.edge_count(); ++e)
            EXPECT_LE(st.S.row(static_cast<Eigen::Index>(e)).norm(), l2 * g.edge(e).weight + 1e-9);
        for (std::size_t i = 1; i < st.trace.size(); ++i)
            EXPECT_LE(st.trace[i].objective, st.trace[i - 1].objective + 1e-10 * std::max(1.0, std::abs(st.trace[i - 1].objective)))
                << "rep " << rep << " outer " << i;
    }
}

TEST(SolveCentroids, StaysInsideBoundingBox) {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 10; ++rep) {
        const auto W = gaussian(rng, 9, 4, 2.0);
        const auto g = build_knn_weights(W, 3);
        const auto st = solve_centroids(W, g, 1.0, 0.5 * rep);
        const Eigen::RowVectorXd lo = W.colwise().minCoeff(), hi = W.colwise().maxCoeff();
        for (Eigen::Index m = 0; m < W.rows(); ++m)
            for (Eigen::Index j = 0; j < W.cols(); ++j) {
                EXPECT_GE(st.U(m, j), lo(j) - 1e-8);
                EXPECT_LE(st.U(m, j), hi(j) + 1e-8);
            }
    }
}

TEST(SolveCentroids, FusionMonotoneInLambda2) {
    std::mt19937_64 rng(8);
    Eigen::MatrixXd W(12, 2);
    const auto noise = gaussian(rng, 12, 2, 0.3);
    for (int m = 0; m < 12; ++m) W.row(m) = Eigen::RowVector2d(m / 4 * 5.0, -(m / 4) * 3.0) + noise.row(m);
    const auto g = build_knn_weights(W, 4);
    const double tol = 1e-6;
    std::size_t prev = 13;
    CentroidState warm;
    bool have = false;
    for (double l2 : {1e-3, 1e-2, 0.05, 0.1, 0.3, 1.0, 3.0, 10.0, 100.0}) {
        const auto st = solve_centroids(W, g, 1.0, l2, have ? &warm : nullptr);
        const auto count = distinct_rows(st.U, tol);
        EXPECT_LE(count, prev) << l2;
        prev = count;
        warm = st;
        have = true;
    }
    EXPECT_EQ(prev, 1u);
}

TEST(SolveCentroids, WarmStartReachesSameSolution) {
    std::mt19937_64 rng(9);
    const auto W = gaussian(rng, 8, 3);
    const auto g = build_knn_weights(W, 3);
    const auto cold = solve_centroids(W, g, 1.0, 0.4);
    const auto seed = solve_centroids(W, g, 1.0, 0.2);
    const auto warm = solve_centroids(W, g, 1.0, 0.4, &seed);
    EXPECT_NEAR(centroid_objective(W, cold.U, g, 1.0, 0.4), centroid_objective(W, warm.U, g, 1.0, 0.4), 1e-8);
}

TEST(ClusterLabels, ComponentsOfContractedEdges) {
    Eigen::MatrixXd U(5, 1);
    U << 0, 0, 5, 5, 0;
    const WeightGraph g(5, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}, {3, 4, 1.0}});
    // Task 4 sits at 0 but only connects through 3, so it stays apart.
    EXPECT_EQ(cluster_labels(U, g, 1e-6), (std::vector<int>{0, 0, 1, 1, 2}));
}

TEST(ClusterLabels, MergeToleranceScalesWithW) {
    EXPECT_DOUBLE_EQ(default_merge_tolerance(Eigen::MatrixXd::Zero(2, 2)), 1e-6);
    EXPECT_DOUBLE_EQ(default_merge_tolerance(Eigen::MatrixXd::Constant(2, 2, 3.0)), 4e-6);
}
