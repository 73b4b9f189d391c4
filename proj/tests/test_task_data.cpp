#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "mtlcvx/error.hpp"
#include "mtlcvx/sim_gen.hpp"
#include "mtlcvx/task_data.hpp"
#include "oracles.hpp"

using namespace mtl;

namespace {

template <class F>
ErrorKind kind_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no Error thrown";
    return ErrorKind::Io;
}

TaskDataset logistic_task(int pos, int neg) {
    TaskDataset t;
    t.task_id = "b";
    t.loss = LossKind::logistic;
    const int n = pos + neg;
    t.X.resize(n, 2);
    t.y.resize(n);
    for (int i = 0; i < n; ++i) {
        t.X(i, 0) = i;
        t.X(i, 1) = (i * 7) % 5;
        t.y(i) = i < pos ? 1.0 : 0.0;
    }
    return t;
}

} // namespace

TEST(ReadTasksCsv, GroupsRowsByTask) {
    std::istringstream in("task_id,y,x1,x2\n"
                          "a,1,0.5,2\n"
                          "b,2,1.5,3\n"
                          "a,3,2.5,4\n"
                          "b,4,3.5,5\n"
                          "a,5,4.5,6\n"
                          "b,6,5.5,7\n");
    const auto tasks = read_tasks_csv(in, {});
    ASSERT_EQ(tasks.size(), 2u);
    EXPECT_EQ(tasks[0].task_id, "a");
    EXPECT_EQ(tasks[1].task_id, "b");
    EXPECT_EQ(tasks[0].n(), 3u);
    EXPECT_EQ(tasks[1].n(), 3u);
    EXPECT_EQ(tasks[0].p(), 2u);
    EXPECT_DOUBLE_EQ(tasks[0].y(2), 5.0);
    EXPECT_DOUBLE_EQ(tasks[1].X(1, 1), 5.0);
}

TEST(ReadTasksCsv, RaggedRowIsSchemaMismatch) {
    std::istringstream in("task_id,y,x1,x2\na,1,2,3\na,1,2\n");
    EXPECT_EQ(kind_of([&] { read_tasks_csv(in, {}); }), ErrorKind::SchemaMismatch);
}

TEST(ReadTasksCsv, MissingColumnIsSchemaMismatch) {
    std::istringstream in("task,y,x1\na,1,2\n");
    EXPECT_EQ(kind_of([&] { read_tasks_csv(in, {}); }), ErrorKind::SchemaMismatch);
}

TEST(ReadTasksCsv, NonNumericCellNamesRow) {
    std::istringstream in("task_id,y,x1\na,1,2\na,1,abc\n");
    try {
        read_tasks_csv(in, {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NonNumericCell);
        EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
    }
}

TEST(WriteTasksCsv, RoundTripsGeneratedData) {
    SimConfig c;
    c.tasks = 4;
    c.features = 6;
    c.clusters = 2;
    c.n_train = 5;
    c.n_validation = 3;
    c.n_test = 3;
    c.seed = 11;
    const auto data = generate(c);
    std::stringstream buf;
    write_tasks_csv(buf, data.tasks);
    const auto back = read_tasks_csv(buf, {});
    ASSERT_EQ(back.size(), data.tasks.size());
    for (std::size_t m = 0; m < back.size(); ++m) {
        EXPECT_EQ(back[m].task_id, data.tasks[m].task_id);
        EXPECT_LE((back[m].X - data.tasks[m].X).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LE((back[m].y - data.tasks[m].y).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Standardize, InvertIsIdentityOnX) {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 10; ++rep) {
        auto t = oracle::random_linear_task(rng, 15, 4);
        t.X.col(1) = t.X.col(1) * 40.0 + Eigen::VectorXd::Constant(15, 7.0);
        const auto [s, info] = standardize(t);
        EXPECT_LE(s.X.colwise().mean().cwiseAbs().maxCoeff(), 1e-12);
        for (Eigen::Index j = 0; j < s.X.cols(); ++j)
            EXPECT_NEAR((s.X.col(j).array() - s.X.col(j).mean()).square().sum() / 14.0, 1.0, 1e-12);
        const auto back = info.invert(s);
        EXPECT_LE((back.X - t.X).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LE((back.y - t.y).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Standardize, OriginalScalePredictionsAgree) {
    std::mt19937_64 rng(4);
    const auto t = oracle::random_linear_task(rng, 20, 3);
    const auto [s, info] = standardize(t);
    Eigen::VectorXd w(3);
    w << 0.3, -1.2, 2.0;
    const Eigen::VectorXd pred_std = s.X * w;
    Eigen::VectorXd raw = w;
    const double b = info.to_original_scale(raw, 0.0);
    const Eigen::VectorXd pred_raw = (t.X * raw).array() + b;
    EXPECT_LE((pred_raw - (pred_std.array() + info.y_mean).matrix()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Standardize, ConstantColumnRejected) {
    TaskDataset t;
    t.X = Eigen::MatrixXd::Ones(4, 2);
    t.X.col(0) << 1, 2, 3, 4;
    t.y = Eigen::VectorXd::LinSpaced(4, 0, 1);
    EXPECT_EQ(kind_of([&] { standardize(t); }), ErrorKind::ConstantColumn);
}

TEST(SplitTasks, PaperCounts) {
    TaskDataset t;
    t.X = Eigen::MatrixXd::Random(230, 2);
    t.y = Eigen::VectorXd::Random(230);
    const std::vector<TaskDataset> tasks{t};
    const auto s = split_tasks(tasks, SplitSpec::counts(30, 100, 5));
    EXPECT_EQ(s.train[0].n(), 30u);
    EXPECT_EQ(s.validation[0].n(), 100u);
    EXPECT_EQ(s.test[0].n(), 100u);
}

TEST(SplitTasks, FractionsOfTen) {
    const auto sizes = split_sizes(10, SplitSpec::fractions(0.5, 0.2, 0.3, 0));
    EXPECT_EQ(sizes[0], 5u);
    EXPECT_EQ(sizes[1], 2u);
    EXPECT_EQ(sizes[2], 3u);
}

TEST(SplitTasks, DeterministicDisjointCover) {
    std::mt19937_64 rng(8);
    std::vector<TaskDataset> tasks;
    for (int m = 0; m < 5; ++m) {
        auto t = oracle::random_linear_task(rng, 17 + 3 * m, 2);
        t.X.col(0) = Eigen::VectorXd::LinSpaced(t.X.rows(), 0, t.X.rows() - 1);  // row ids
        tasks.push_back(t);
    }
    const auto spec = SplitSpec::fractions(0.5, 0.2, 0.3, 99);
    const auto a = split_tasks(tasks, spec);
    const auto b = split_tasks(tasks, spec);
    for (std::size_t m = 0; m < tasks.size(); ++m) {
        EXPECT_EQ(a.train[m].X, b.train[m].X);
        EXPECT_EQ(a.test[m].y, b.test[m].y);
        std::multiset<double> ids;
        for (const auto* part : {&a.train[m], &a.validation[m], &a.test[m]})
            for (Eigen::Index i = 0; i < part->X.rows(); ++i) ids.insert(part->X(i, 0));
        EXPECT_EQ(ids.size(), tasks[m].n());
        EXPECT_EQ(std::set<double>(ids.begin(), ids.end()).size(), tasks[m].n());
    }
}

TEST(SplitTasks, TooFewSamples) {
    TaskDataset t;
    t.task_id = "tiny";
    t.X = Eigen::MatrixXd::Random(1, 2);
    t.y = Eigen::VectorXd::Random(1);
    const std::vector<TaskDataset> tasks{t};
    EXPECT_EQ(kind_of([&] { split_tasks(tasks, SplitSpec::fractions(0.5, 0.2, 0.3, 0)); }),
              ErrorKind::TooFewSamples);
}

TEST(DownsampleBalanced, KeepsAllPositives) {
    const auto t = logistic_task(10, 40);
    const auto d = downsample_balanced(t, 1);
    EXPECT_EQ(d.n(), 20u);
    EXPECT_DOUBLE_EQ(d.y.sum(), 10.0);
    std::set<double> pos_rows;
    for (Eigen::Index i = 0; i < d.X.rows(); ++i)
        if (d.y(i) == 1.0) pos_rows.insert(d.X(i, 0));
    EXPECT_EQ(pos_rows.size(), 10u);
    EXPECT_EQ(*pos_rows.rbegin(), 9.0);
}

TEST(DownsampleBalanced, BalancedInputUnchangedUpToOrder) {
    const auto t = logistic_task(6, 6);
    const auto d = downsample_balanced(t, 3);
    std::vector<double> a(t.X.col(0).begin(), t.X.col(0).end());
    std::vector<double> b(d.X.col(0).begin(), d.X.col(0).end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);
}

TEST(DownsampleBalanced, MultiTaskTotalIsTwicePositives) {
    int positives = 0;
    std::size_t total = 0;
    for (int m = 0; m < 6; ++m) {
        const int pos = 3 + m;
        positives += pos;
        total += downsample_balanced(logistic_task(pos, 30 + m), 10 + static_cast<std::uint64_t>(m)).n();
    }
    EXPECT_EQ(total, 2u * static_cast<std::size_t>(positives));
}

TEST(DownsampleBalanced, SingleClassRejected) {
    EXPECT_EQ(kind_of([] { downsample_balanced(logistic_task(0, 5), 1); }), ErrorKind::SingleClass);
}
