#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mtlcvx/baselines.hpp"
#include "mtlcvx/graph.hpp"
#include "mtlcvx/metrics.hpp"
#include "mtlcvx/mtl_core.hpp"
#include "mtlcvx/sim_gen.hpp"
#include "mtlcvx/task_data.hpp"

namespace mtl {

enum class Method { stll, stlr, mtlnl, mtlcvx, mtlacvx };

std::string to_string(Method method);
Method parse_method(const std::string& text);
/// True for the methods that use the task graph and the lambda grid.
bool uses_grid(Method method);

enum class SelectionMetric { nmse, deviance };

std::string to_string(SelectionMetric metric);
SelectionMetric parse_selection_metric(const std::string& text);

/// `count` log-spaced values from lo to hi inclusive.
std::vector<double> log_space(double lo, double hi, int count);

struct GridSpec {
    std::vector<double> lambda1;
    /// Fusion strengths before scaling. Grid search divides them by the mean
    /// edge weight of the graph it is given; MTLNL uses them as its lambda.
    std::vector<double> lambda2;
    std::vector<double> ridge;  ///< STLR grid
    SelectionMetric metric = SelectionMetric::nmse;
    bool scale_by_mean_weight = true;

    /// lambda1: 10 points in [1e-2, 1e2]; lambda2: 10 points in [1e-3, 1e1];
    /// ridge: 20 points in [1e-4, 1e2]. Deviance selection for logistic tasks.
    static GridSpec defaults(LossKind loss);
    /// Throws ConfigInvalid on empty lists or non-positive entries.
    void validate() const;
    /// Sorted ascending and deduplicated copy.
    GridSpec normalized() const;
};

/// Per-task validation score, averaged over tasks: NMSE against observed y
/// (linear) or mean deviance (logistic).
double selection_score(std::span<const TaskDataset> validation, const Predictor& model, SelectionMetric metric);

struct GridCell {
    double lambda1 = 0.0;
    double lambda2 = 0.0;  ///< effective value passed to the solver
    double score = 0.0;
    bool ok = false;
    bool converged = false;
    int iterations = 0;
    std::string error;
};

struct TuneOptions {
    FitConfig fit;  ///< base settings; lambdas are overwritten per cell
    NetworkLassoOptions network;
    int jobs = 1;
};

struct GridResult {
    Method method = Method::mtlcvx;
    std::vector<GridCell> table;
    std::size_t best = 0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double best_score = 0.0;
    std::optional<ModelState> model;         ///< mtlcvx, and stage 2 of mtlacvx
    std::optional<ModelState> stage1;        ///< mtlacvx only
    std::optional<WeightGraph> graph_used;   ///< adaptive graph for mtlacvx
    std::optional<NetworkLassoState> network;

    Predictor predictor() const;
};

/// Fits every grid cell on `train`, scores it on `validation` and keeps the
/// argmin; ties go to the larger lambda2, then the larger lambda1. Within each
/// lambda1 row the lambda2 values are visited in ascending order, each fit
/// warm-started from the previous one. Rows run in parallel when jobs > 1.
/// Failed cells are recorded and skipped; Error(ConfigInvalid) when every cell fails.
///
/// For mtlacvx, `stage1` must hold the selected MTLCVX fit on `graph`; the
/// grid is then searched for stage 2 on the adaptive graph built from it.
GridResult grid_search(std::span<const TaskDataset> train, std::span<const TaskDataset> validation,
                       const WeightGraph& graph, const GridSpec& grid, Method method, const Initialization& init,
                       const TuneOptions& options, const ModelState* stage1 = nullptr);

enum class Protocol {
    holdout,  ///< fit on train, select on validation, report the train fit
    pooled    ///< STLL by K-fold CV on train+validation; others refit the selected lambdas on train+validation
};

std::string to_string(Protocol protocol);
Protocol parse_protocol(const std::string& text);

struct PipelineOptions {
    GridSpec grid;
    TuneOptions tune;
    Protocol protocol = Protocol::holdout;
    int knn_k = 5;
    int stll_grid_count = 50;
    double stll_grid_ratio = 1e-4;
    int cv_folds = 10;
    LassoOptions cv_lasso;   ///< solver settings for the cross-validated lasso
    std::uint64_t seed = 0;  ///< CV fold shuffles
};

/// Inputs for test-set evaluation. `references` (one vector per test task)
/// switches NMSE to a noiseless reference; `W_star` enables coefficient RMSE.
struct EvaluationTarget {
    std::vector<Eigen::VectorXd> references;
    std::optional<Eigen::MatrixXd> W_star;
};

struct MethodOutcome {
    Method method = Method::stll;
    Predictor predictor;
    EvalReport report;
    std::optional<GridResult> grid;
    std::optional<ModelState> model;   ///< final multi-task model (stage 2 for mtlacvx)
    std::optional<ModelState> stage1;  ///< final stage-1 model for mtlacvx
    std::optional<WeightGraph> graph_used;
    std::optional<NetworkLassoState> network;  ///< final MTLNL state
    std::vector<int> clusters;         ///< from the final centroids; empty for other methods
    std::string error;                 ///< non-empty when the method failed
    double seconds = 0.0;              ///< wall clock, excluded from deterministic outputs
};

struct PipelineResult {
    std::vector<SingleTaskFit> single_task;  ///< lasso fits feeding W(0) and the graph
    std::optional<WeightGraph> graph;
    std::vector<MethodOutcome> outcomes;     ///< in the order requested
};

/// Stacks single-task fits into one predictor.
Predictor predictor_from_fits(std::span<const SingleTaskFit> fits);

/// Train+validation rows per task, in that order.
std::vector<TaskDataset> pool_tasks(std::span<const TaskDataset> a, std::span<const TaskDataset> b);

/// Single-task lasso, graph, per-method tuning and test evaluation on one split.
/// Method failures are recorded in the outcome, not thrown.
PipelineResult run_pipeline(const TaskSplit& split, std::span<const Method> methods, const PipelineOptions& options,
                            const EvaluationTarget& target);

/// Evaluates a predictor on the test split into `report`.
void evaluate_into(EvalReport& report, std::span<const TaskDataset> test, const Predictor& model,
                   const EvaluationTarget& target);

struct MonteCarloConfig {
    SimConfig sim;
    std::vector<Method> methods;
    int reps = 1;
    PipelineOptions pipeline;
    LossKind response = LossKind::linear;  ///< logistic draws binary responses on the same designs
    NmseReference reference = NmseReference::noiseless;
    int jobs = 1;

    void validate() const;
};

struct RepResult {
    int rep = 0;
    std::uint64_t seed = 0;
    std::vector<EvalReport> reports;  ///< successful methods only
    std::vector<std::pair<Method, std::string>> failures;
};

struct MethodSummary {
    Method method = Method::stll;
    int successes = 0;
    int failures = 0;
    double nmse_mean = 0.0, nmse_sd = 0.0;
    double rmse_mean = 0.0, rmse_sd = 0.0;
    double auc_mean = 0.0, auc_sd = 0.0;
};

struct MonteCarloResult {
    std::vector<RepResult> reps;
    std::vector<MethodSummary> summary;
};

/// Seed of replication `rep` under master seed `master`.
std::uint64_t rep_seed(std::uint64_t master, int rep);

/// One simulated replication: generate, split, run the pipeline.
RepResult run_replication(const MonteCarloConfig& config, int rep);

/// Replications run in parallel (config.jobs); results do not depend on jobs.
MonteCarloResult run_monte_carlo(const MonteCarloConfig& config);

/// Mean and sample sd per method over successful reps.
std::vector<MethodSummary> summarize(std::span<const RepResult> reps, std::span<const Method> methods);

/// Runs fn(0..count-1) on up to `jobs` threads. Exceptions are rethrown
/// (lowest index first) after all work has finished.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn);

} // namespace mtl
