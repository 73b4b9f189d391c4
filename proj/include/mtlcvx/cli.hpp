#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mtlcvx/model_io.hpp"
#include "mtlcvx/sim_gen.hpp"
#include "mtlcvx/task_data.hpp"
#include "mtlcvx/tuning.hpp"

namespace mtl::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    exit_ok = 0,
    exit_partial = 1,  ///< some methods or cells failed; outputs were still written
    exit_config = 2,   ///< usage or configuration error, nothing computed
    exit_runtime = 3,  ///< data or I/O failure
};

struct DataConfig {
    std::string path;  ///< CSV input; empty means simulate
    LossKind loss = LossKind::linear;
    std::string task_column = "task_id";
    std::string response_column = "y";
    double train = 0.5;
    double validation = 0.2;
    double test = 0.3;
    std::size_t train_count = 0;  ///< counts mode when non-zero
    std::size_t validation_count = 0;
    bool standardize = true;  ///< train-split moments, applied to all splits
    bool downsample = false;  ///< balance classes per task before splitting
};

/// Cell lists left empty take the single value from the sim section.
struct BenchmarkConfig {
    int reps = 20;
    std::vector<int> clusters;
    std::vector<double> phis;
    std::vector<double> task_variances;

    std::vector<int> clusters_or(const SimConfig& s) const {
        return clusters.empty() ? std::vector<int>{s.clusters} : clusters;
    }
    std::vector<double> phis_or(const SimConfig& s) const { return phis.empty() ? std::vector<double>{s.phi} : phis; }
    std::vector<double> task_variances_or(const SimConfig& s) const {
        return task_variances.empty() ? std::vector<double>{s.task_variance} : task_variances;
    }
};

struct RunConfig {
    std::string profile;
    std::uint64_t seed = 1;
    int jobs = 1;
    std::string out_dir = "out";

    SimConfig sim;
    LossKind sim_response = LossKind::linear;
    NmseReference reference = NmseReference::noiseless;  ///< simulated linear data only
    DataConfig data;

    Method method = Method::mtlcvx;  ///< fit
    double lambda1 = 1.0;            ///< fit; also the STLR ridge strength
    double lambda2 = 0.1;            ///< fit; MTLNL uses it as its lambda
    std::vector<Method> methods{Method::stll, Method::mtlnl, Method::mtlcvx, Method::mtlacvx};
    PipelineOptions pipeline;
    BenchmarkConfig benchmark;

    std::string model_path;  ///< evaluate
    std::string truth_path;  ///< evaluate, optional ground truth JSON
    bool trace = false;      ///< write per-model trace CSVs

    bool simulated() const { return data.path.empty(); }
    /// Throws Error(ConfigInvalid) naming the offending key.
    void validate(const std::string& command) const;
};

/// Built-in defaults, then the named profile. Empty name: library defaults.
/// Profiles: paper-c10, paper-c5, school-like, landmine-like.
RunConfig profile_config(const std::string& profile);

/// Overlays a JSON config object. Unknown keys and wrong types raise
/// Error(ConfigInvalid) naming the key path.
void apply_config_json(RunConfig& config, const Json& doc);

/// Canonical form used for the config hash. Excludes jobs and out_dir,
/// which must not change results.
Json config_to_json(const RunConfig& config);

/// Parses `args` (without the program name) and runs the command.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cmd_simulate(const RunConfig& config, std::ostream& out);
int cmd_fit(const RunConfig& config, std::ostream& out);
int cmd_tune(const RunConfig& config, std::ostream& out);
int cmd_evaluate(const RunConfig& config, std::ostream& out);
int cmd_benchmark(const RunConfig& config, std::ostream& out);

} // namespace mtl::cli
