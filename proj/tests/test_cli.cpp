#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "mtlcvx/cli.hpp"

namespace fs = std::filesystem;
using namespace mtl;

namespace {

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("mtlcvx_cli_" + std::string(info->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    std::string write_config(const std::string& name, const std::string& body) const {
        std::ofstream(path(name)) << body;
        return path(name);
    }

    int run(std::vector<std::string> args) {
        out_.str("");
        err_.str("");
        return cli::run(args, out_, err_);
    }

    static std::string slurp(const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    }

    // every file under a directory, keyed by name
    static std::map<std::string, std::string> snapshot(const fs::path& d) {
        std::map<std::string, std::string> files;
        for (const auto& e : fs::directory_iterator(d)) files[e.path().filename().string()] = slurp(e.path());
        return files;
    }

    fs::path dir_;
    std::ostringstream out_, err_;
};

const char* kSmallSim = R"({
  "sim": {"tasks": 8, "features": 4, "clusters": 2, "n_train": 20, "n_validation": 20, "n_test": 20,
          "centroid_variance": 4.0, "task_variance": 0.01},
  "grid": {"lambda1": [0.1, 1.0], "lambda2": [0.01, 0.1, 1.0]},
  "knn_k": 3
})";

} // namespace

TEST_F(CliTest, SimulateIsByteIdenticalOnRepeat) {
    const auto cfg = write_config("c.json", kSmallSim);
    ASSERT_EQ(run({"simulate", "--config", cfg, "--seed", "4", "--out-dir", path("a")}), 0) << err_.str();
    ASSERT_EQ(run({"simulate", "--config", cfg, "--seed", "4", "--out-dir", path("b")}), 0) << err_.str();
    const auto a = snapshot(path("a")), b = snapshot(path("b"));
    EXPECT_EQ(a.size(), 5u);
    EXPECT_EQ(a, b);
    ASSERT_EQ(run({"simulate", "--config", cfg, "--seed", "5", "--out-dir", path("c")}), 0);
    EXPECT_NE(snapshot(path("c")).at("tasks.csv"), a.at("tasks.csv"));
}

TEST_F(CliTest, SimulatePaperProfileRowCounts) {
    ASSERT_EQ(run({"simulate", "--profile", "paper-c10", "--out-dir", path("p")}), 0) << err_.str();
    std::ifstream in(path("p/tasks.csv"));
    std::string line;
    std::getline(in, line);
    std::map<std::string, int> rows;
    while (std::getline(in, line)) ++rows[line.substr(0, line.find(','))];
    EXPECT_EQ(rows.size(), 100u);
    for (const auto& [task, n] : rows) EXPECT_EQ(n, 230) << task;
}

TEST_F(CliTest, ConfigErrorsExitWithTwo) {
    const auto bad_split = write_config("a.json", R"({"sim": {"tasks": 10, "clusters": 3}})");
    EXPECT_EQ(run({"simulate", "--config", bad_split, "--out-dir", path("x")}), cli::exit_config);
    const auto unknown = write_config("b.json", R"({"sim": {"taskz": 10}})");
    EXPECT_EQ(run({"simulate", "--config", unknown, "--out-dir", path("x")}), cli::exit_config);
    EXPECT_NE(err_.str().find("sim.taskz"), std::string::npos) << err_.str();
    const auto empty = write_config("c.json", R"({"methods": []})");
    EXPECT_EQ(run({"benchmark", "--config", empty, "--out-dir", path("x")}), cli::exit_config);
    EXPECT_NE(err_.str().find("method list is empty"), std::string::npos);
    EXPECT_EQ(run({"fit", "--method", "nonsense", "--out-dir", path("x")}), cli::exit_config);
    EXPECT_EQ(run({"frobnicate"}), cli::exit_config);
    EXPECT_FALSE(fs::exists(path("x")));
}

TEST_F(CliTest, MissingDataFileIsRuntimeError) {
    EXPECT_EQ(run({"fit", "--data", path("nope.csv"), "--out-dir", path("x")}), cli::exit_runtime);
}

TEST_F(CliTest, FitWithoutFusionGivesSingletons) {
    const auto cfg = write_config("c.json", kSmallSim);
    ASSERT_EQ(run({"fit", "--config", cfg, "--method", "mtlcvx", "--lambda2", "0", "--out-dir", path("f")}), 0)
        << err_.str();
    std::ifstream in(path("f/clusters.csv"));
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "task_id,cluster");
    std::set<std::string> labels;
    int rows = 0;
    while (std::getline(in, line)) {
        labels.insert(line.substr(line.find(',') + 1));
        ++rows;
    }
    EXPECT_EQ(rows, 8);
    EXPECT_EQ(labels.size(), 8u);
}

TEST_F(CliTest, AdaptiveFitWritesBothStages) {
    const auto cfg = write_config("c.json", kSmallSim);
    ASSERT_EQ(run({"fit", "--config", cfg, "--method", "mtlacvx", "--out-dir", path("f")}), 0) << err_.str();
    const auto doc = Json::parse(slurp(path("f/model.json")));
    EXPECT_TRUE(doc.contains("stage1"));
    EXPECT_TRUE(doc.contains("stage2"));
    EXPECT_TRUE(doc.contains("metadata"));
}

TEST_F(CliTest, FitRerunIsIdentical) {
    const auto cfg = write_config("c.json", kSmallSim);
    for (const char* m : {"mtlcvx", "mtlnl", "stlr"}) {
        ASSERT_EQ(run({"fit", "--config", cfg, "--method", m, "--out-dir", path("a")}), 0) << err_.str();
        ASSERT_EQ(run({"fit", "--config", cfg, "--method", m, "--out-dir", path("b")}), 0);
        EXPECT_EQ(snapshot(path("a")), snapshot(path("b"))) << m;
        fs::remove_all(path("a"));
        fs::remove_all(path("b"));
    }
}

TEST_F(CliTest, TuneIsIndependentOfJobs) {
    const auto cfg = write_config("c.json", kSmallSim);
    ASSERT_EQ(run({"tune", "--config", cfg, "--jobs", "1", "--out-dir", path("a")}), 0) << err_.str();
    ASSERT_EQ(run({"tune", "--config", cfg, "--jobs", "4", "--out-dir", path("b")}), 0) << err_.str();
    const auto a = snapshot(path("a"));
    EXPECT_EQ(a, snapshot(path("b")));
    EXPECT_TRUE(a.count("model_mtlacvx.json"));
    EXPECT_TRUE(a.count("grid_mtlcvx.csv"));
}

TEST_F(CliTest, BenchmarkOneRowPerMethod) {
    const auto cfg = write_config("c.json", kSmallSim);
    ASSERT_EQ(run({"benchmark", "--config", cfg, "--reps", "2", "--methods", "stll,mtlcvx", "--out-dir", path("a")}),
              0)
        << err_.str();
    const auto doc = Json::parse(slurp(path("a/summary.json")));
    std::ifstream in(path("a/summary.csv"));
    std::string line;
    int rows = 0;
    std::getline(in, line);
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    EXPECT_EQ(rows, 2);
    ASSERT_EQ(run({"benchmark", "--config", cfg, "--reps", "2", "--methods", "stll,mtlcvx", "--jobs", "3",
                   "--out-dir", path("b")}),
              0);
    EXPECT_EQ(snapshot(path("a")), snapshot(path("b")));
}

TEST_F(CliTest, EvaluateReproducesFitMetrics) {
    const auto cfg = write_config("c.json", kSmallSim);
    ASSERT_EQ(run({"fit", "--config", cfg, "--out-dir", path("f")}), 0) << err_.str();
    ASSERT_EQ(run({"evaluate", "--config", cfg, "--model", path("f/model.json"), "--out-dir", path("e")}), 0)
        << err_.str();
    const auto fit = Json::parse(slurp(path("f/metrics.json")));
    const auto ev = Json::parse(slurp(path("e/metrics.json")));
    const double a = fit["reports"][0]["nmse_mean"].get<double>();
    const double b = ev["reports"][0]["nmse_mean"].get<double>();
    EXPECT_NEAR(a, b, 1e-9 * std::max(1.0, a));
}
