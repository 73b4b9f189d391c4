#include <map>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "mtlcvx/error.hpp"
#include "mtlcvx/graph.hpp"
#include "oracles.hpp"

using namespace mtl;

namespace {

std::map<std::pair<std::size_t, std::size_t>, double> as_map(const WeightGraph& g) {
    std::map<std::pair<std::size_t, std::size_t>, double> out;
    for (const auto& e : g.edges()) out[{e.m, e.l}] = e.weight;
    return out;
}

Eigen::MatrixXd random_rows(std::mt19937_64& rng, int T, int p) {
    std::normal_distribution<double> N(0.0, 1.0);
    Eigen::MatrixXd M(T, p);
    for (int i = 0; i < T; ++i)
        for (int j = 0; j < p; ++j) M(i, j) = N(rng);
    return M;
}

} // namespace

TEST(KnnWeights, OneDimensionalExample) {
    Eigen::MatrixXd C(3, 1);
    C << 0, 1, 10;
    const auto g = as_map(build_knn_weights(C, 1));
    ASSERT_EQ(g.size(), 2u);
    EXPECT_DOUBLE_EQ((g.at({0, 1})), 1.0);
    EXPECT_DOUBLE_EQ((g.at({1, 2})), 0.5);
}

TEST(KnnWeights, FullNeighbourhoodIsComplete) {
    std::mt19937_64 rng(1);
    const auto g = build_knn_weights(random_rows(rng, 7, 3), 6);
    EXPECT_EQ(g.edge_count(), 21u);
    for (const auto& e : g.edges()) EXPECT_EQ(e.weight, 1.0);
}

TEST(KnnWeights, TwoTasks) {
    Eigen::MatrixXd C(2, 2);
    C << 1, 2, 3, 4;
    const auto g = build_knn_weights(C, 1);
    ASSERT_EQ(g.edge_count(), 1u);
    EXPECT_EQ(g.edge(0).weight, 1.0);
}

TEST(KnnWeights, DegenerateK) {
    Eigen::MatrixXd C = Eigen::MatrixXd::Random(4, 2);
    for (int k : {0, 4, -1}) {
        try {
            build_knn_weights(C, k);
            FAIL() << k;
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::DegenerateK);
        }
    }
}

TEST(KnnWeights, MatchesBruteForceNeighbourLists) {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        const int T = 4 + rep % 9;
        const int k = 1 + rep % std::min(5, T - 1);
        const auto C = random_rows(rng, T, 3);
        const auto g = as_map(build_knn_weights(C, k));
        std::vector<std::vector<std::size_t>> nb(static_cast<std::size_t>(T));
        for (std::size_t m = 0; m < static_cast<std::size_t>(T); ++m) nb[m] = oracle::neighbours(C, m, k);
        auto has = [&](std::size_t a, std::size_t b) {
            return std::find(nb[a].begin(), nb[a].end(), b) != nb[a].end();
        };
        for (std::size_t m = 0; m < static_cast<std::size_t>(T); ++m)
            for (std::size_t l = m + 1; l < static_cast<std::size_t>(T); ++l) {
                const bool ab = has(m, l), ba = has(l, m);
                const auto it = g.find({m, l});
                if (!ab && !ba) {
                    EXPECT_EQ(it, g.end());
                } else {
                    ASSERT_NE(it, g.end());
                    EXPECT_EQ(it->second, (ab && ba) ? 1.0 : 0.5);
                }
            }
    }
}

TEST(KnnWeights, TiesGoToSmallerIndex) {
    Eigen::MatrixXd C(3, 1);
    C << 0, -1, 1;
    const auto g = as_map(build_knn_weights(C, 1));
    // Task 0 is equidistant from 1 and 2 and picks 1; tasks 1 and 2 both pick 0.
    EXPECT_DOUBLE_EQ((g.at({0, 1})), 1.0);
    EXPECT_DOUBLE_EQ((g.at({0, 2})), 0.5);
}

TEST(GraphValidation, RejectsBadEdges) {
    EXPECT_THROW(WeightGraph(3, {{1, 1, 1.0}}), Error);
    EXPECT_THROW(WeightGraph(3, {{2, 1, 1.0}}), Error);
    EXPECT_THROW(WeightGraph(3, {{0, 1, 1.0}, {0, 1, 0.5}}), Error);
    EXPECT_THROW(WeightGraph(3, {{0, 1, 0.0}}), Error);
    EXPECT_THROW(WeightGraph(3, {{0, 3, 1.0}}), Error);
}

TEST(AdaptiveWeights, SingleEdgeKeepsWeight) {
    const WeightGraph g(2, {{0, 1, 0.5}});
    Eigen::MatrixXd U(2, 2);
    U << 0, 0, 3, 4;
    EXPECT_EQ(adaptive_weights(U, g).edge(0).weight, 0.5);
}

TEST(AdaptiveWeights, EqualDistancesKeepUnitWeights) {
    const WeightGraph g(3, {{0, 1, 1.0}, {1, 2, 1.0}});
    Eigen::MatrixXd U(3, 1);
    U << 0, 2, 4;
    const auto a = adaptive_weights(U, g);
    EXPECT_NEAR(a.edge(0).weight, 1.0, 1e-15);
    EXPECT_NEAR(a.edge(1).weight, 1.0, 1e-15);
}

TEST(AdaptiveWeights, DistancesOneAndTwo) {
    const WeightGraph g(3, {{0, 1, 1.0}, {1, 2, 1.0}});
    Eigen::MatrixXd U(3, 1);
    U << 0, 1, 3;
    const auto a = adaptive_weights(U, g);
    EXPECT_NEAR(a.edge(0).weight, 4.0 / 3.0, 1e-14);
    EXPECT_NEAR(a.edge(1).weight, 2.0 / 3.0, 1e-14);
}

TEST(AdaptiveWeights, IdenticalCentroidsStayFinite) {
    const WeightGraph g(3, {{0, 1, 1.0}, {1, 2, 0.5}});
    Eigen::MatrixXd U(3, 2);
    U << 1, 1, 1, 1, 2, 2;
    const auto a = adaptive_weights(U, g);
    EXPECT_TRUE(std::isfinite(a.edge(0).weight));
    EXPECT_GT(a.edge(0).weight, a.edge(1).weight);
    EXPECT_NEAR(a.total_weight(), 1.5, 1e-12);
}

TEST(AdaptiveWeights, EmptyGraph) {
    try {
        adaptive_weights(Eigen::MatrixXd::Zero(2, 1), WeightGraph(2, {}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EmptyGraph);
    }
}

TEST(AdaptiveWeights, PreservesTotalWeight) {
    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 50; ++rep) {
        const auto W = random_rows(rng, 12, 4);
        const auto g = build_knn_weights(W, 3);
        const auto a = adaptive_weights(random_rows(rng, 12, 4) * 5.0, g);
        EXPECT_NEAR(a.total_weight(), g.total_weight(), 1e-9);
    }
}

TEST(Incidence, PathDegrees) {
    const auto inc = build_incidence(WeightGraph(3, {{0, 1, 1.0}, {1, 2, 1.0}}));
    EXPECT_EQ(inc.edge_count(), 2u);
    EXPECT_EQ(inc.gram_diagonal, Eigen::Vector3d(1, 2, 1));
    EXPECT_EQ(inc.max_degree(), 2.0);
}

TEST(Incidence, SingleEdgeRow) {
    const auto inc = build_incidence(WeightGraph(2, {{0, 1, 1.0}}));
    const Eigen::MatrixXd A = inc.dense();
    EXPECT_EQ(A(0, 0), 1.0);
    EXPECT_EQ(A(0, 1), -1.0);
}

TEST(Incidence, DenseGramMatchesDegrees) {
    std::mt19937_64 rng(23);
    const auto g = build_knn_weights(random_rows(rng, 10, 3), 3);
    const auto inc = build_incidence(g);
    const Eigen::MatrixXd A = oracle::dense_incidence(g);
    EXPECT_EQ(inc.dense(), A);
    const Eigen::MatrixXd G = A.transpose() * A;
    EXPECT_LE((G.diagonal() - inc.gram_diagonal).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LE(A.rowwise().sum().cwiseAbs().maxCoeff(), 0.0);
    for (Eigen::Index e = 0; e < A.rows(); ++e) EXPECT_EQ((A.row(e).array() != 0.0).count(), 2);

    const auto U = random_rows(rng, 10, 4);
    EXPECT_LE((inc.apply(U) - A * U).cwiseAbs().maxCoeff(), 1e-12);
    const auto S = random_rows(rng, static_cast<int>(g.edge_count()), 4);
    EXPECT_LE((inc.apply_transpose(S) - A.transpose() * S).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EdgeListCsv, OneBasedIndices) {
    std::ostringstream out;
    write_edge_list_csv(out, WeightGraph(3, {{0, 2, 0.5}}));
    EXPECT_EQ(out.str(), "m,l,weight\n1,3,0.5\n");
}
