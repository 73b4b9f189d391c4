#include <random>
#include <set>

#include <gtest/gtest.h>

#include "mtlcvx/error.hpp"
#include "mtlcvx/sim_gen.hpp"

using namespace mtl;

namespace {

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& X) {
    const Eigen::MatrixXd C = X.rowwise() - X.colwise().mean();
    return C.transpose() * C / static_cast<double>(X.rows() - 1);
}

SimConfig small(std::uint64_t seed) {
    SimConfig c;
    c.tasks = 12;
    c.features = 15;
    c.clusters = 3;
    c.n_train = 10;
    c.n_validation = 5;
    c.n_test = 5;
    c.seed = seed;
    return c;
}

} // namespace

TEST(CholeskyAr1, IdentityAtZeroPhi) {
    EXPECT_EQ(cholesky_ar1(5, 0.0), Eigen::MatrixXd::Identity(5, 5));
}

TEST(CholeskyAr1, TwoByTwo) {
    const auto L = cholesky_ar1(2, 0.5);
    EXPECT_DOUBLE_EQ(L(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(L(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(L(1, 0), 0.5);
    EXPECT_NEAR(L(1, 1), std::sqrt(0.75), 1e-15);
}

TEST(CholeskyAr1, ReconstructsSigma) {
    const int p = 50;
    const double phi = 0.2;
    const auto L = cholesky_ar1(p, phi);
    const Eigen::MatrixXd S = L * L.transpose();
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) EXPECT_NEAR(S(i, j), std::pow(phi, std::abs(i - j)), 1e-10);
    EXPECT_TRUE(L.isLowerTriangular());
}

TEST(Generate, UncorrelatedDesignAtZeroPhi) {
    SimConfig c = small(3);
    c.tasks = 1;
    c.clusters = 1;
    c.features = 5;
    c.n_train = 10000;
    const auto d = generate(c);
    const auto S = sample_covariance(d.tasks[0].X);
    EXPECT_LE((S - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff(), 0.05);
}

TEST(Generate, Ar1MomentsAtHalf) {
    SimConfig c = small(4);
    c.tasks = 1;
    c.clusters = 1;
    c.features = 3;
    c.phi = 0.5;
    c.n_train = 100000;
    const auto d = generate(c);
    Eigen::Matrix3d expect;
    expect << 1, .5, .25, .5, 1, .5, .25, .5, 1;
    EXPECT_LE((sample_covariance(d.tasks[0].X) - expect).cwiseAbs().maxCoeff(), 0.01);
}

TEST(Generate, ZeroTaskVarianceMakesClusterRowsIdentical) {
    SimConfig c = small(5);
    c.task_variance = 0.0;
    const auto d = generate(c);
    for (int m = 0; m < c.tasks; ++m)
        for (int l = 0; l < c.tasks; ++l)
            if (d.truth.cluster_of_task[static_cast<std::size_t>(m)] == d.truth.cluster_of_task[static_cast<std::size_t>(l)])
                EXPECT_EQ(d.truth.W_star.row(m), d.truth.W_star.row(l));
}

TEST(Generate, SupportFollowsVariableAssignment) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto c = small(seed);
        const auto d = generate(c);
        const auto& t = d.truth;
        ASSERT_EQ(t.W_star.rows(), c.tasks);
        EXPECT_LE((t.W_star - (t.V_star + [&] {
                       Eigen::MatrixXd U(c.tasks, c.features);
                       for (int m = 0; m < c.tasks; ++m) U.row(m) = t.U_star.row(t.cluster_of_task[static_cast<std::size_t>(m)]);
                       return U;
                   }())).norm(),
                  0.0);
        std::set<int> used(t.variable_cluster.begin(), t.variable_cluster.end());
        EXPECT_EQ(used.size(), static_cast<std::size_t>(c.clusters));
        for (int m = 0; m < c.tasks; ++m)
            for (int j = 0; j < c.features; ++j)
                if (t.variable_cluster[static_cast<std::size_t>(j)] != t.cluster_of_task[static_cast<std::size_t>(m)])
                    EXPECT_EQ(t.W_star(m, j), 0.0);
        // uniform cluster sizes T / C
        std::vector<int> sizes(static_cast<std::size_t>(c.clusters), 0);
        for (int label : t.cluster_of_task) ++sizes[static_cast<std::size_t>(label)];
        for (int s : sizes) EXPECT_EQ(s, c.tasks / c.clusters);
    }
}

TEST(Generate, ResponsesFollowModel) {
    SimConfig c = small(6);
    c.n_train = 4000;
    c.noise_variance = 2.0;
    const auto d = generate(c);
    const auto ref = noiseless_responses(d.tasks, d.truth);
    const Eigen::VectorXd r = d.tasks[0].y - ref[0];
    EXPECT_NEAR(r.squaredNorm() / static_cast<double>(r.size()), 2.0, 0.15);
}

TEST(Generate, SeededDeterminism) {
    const auto a = generate(small(7));
    const auto b = generate(small(7));
    const auto other = generate(small(8));
    for (std::size_t m = 0; m < a.tasks.size(); ++m) {
        EXPECT_EQ(a.tasks[m].X, b.tasks[m].X);
        EXPECT_EQ(a.tasks[m].y, b.tasks[m].y);
    }
    EXPECT_EQ(a.truth.W_star, b.truth.W_star);
    EXPECT_NE(a.truth.W_star, other.truth.W_star);
}

TEST(SimConfig, Validation) {
    SimConfig c = small(1);
    c.tasks = 10;  // not divisible by 3
    EXPECT_THROW(c.validate(), Error);
    c = small(1);
    c.phi = 1.0;
    EXPECT_THROW(c.validate(), Error);
    c = small(1);
    c.noise_variance = 0.0;
    EXPECT_THROW(c.validate(), Error);
    EXPECT_NO_THROW(small(1).validate());
}

TEST(SimConfig, ReferenceDesign) {
    const auto c = SimConfig::reference_design(10, 0.2, 1.0, 1);
    EXPECT_EQ(c.tasks, 100);
    EXPECT_EQ(c.features, 100);
    EXPECT_EQ(c.rows_per_task(), 230);
    EXPECT_EQ(c.noise_variance, 5.0);
    EXPECT_EQ(c.centroid_variance, 100.0);
    const auto split = split_simulated(generate(c), c);
    EXPECT_EQ(split.train[0].n(), 30u);
    EXPECT_EQ(split.validation[0].n(), 100u);
    EXPECT_EQ(split.test[0].n(), 100u);
}

TEST(BinarizeResponses, BinaryAndDeterministic) {
    const auto d = generate(small(9));
    const auto a = binarize_responses(d.tasks, d.truth, 3);
    const auto b = binarize_responses(d.tasks, d.truth, 3);
    for (std::size_t m = 0; m < a.size(); ++m) {
        EXPECT_EQ(a[m].loss, LossKind::logistic);
        EXPECT_EQ(a[m].X, d.tasks[m].X);
        EXPECT_EQ(a[m].y, b[m].y);
        for (Eigen::Index i = 0; i < a[m].y.size(); ++i) EXPECT_TRUE(a[m].y(i) == 0.0 || a[m].y(i) == 1.0);
    }
}
