#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mtlcvx/baselines.hpp"
#include "mtlcvx/metrics.hpp"
#include "mtlcvx/mtl_core.hpp"
#include "mtlcvx/sim_gen.hpp"
#include "mtlcvx/tuning.hpp"

namespace mtl {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "0.1.0";

/// Provenance block carried by every output document.
struct Metadata {
    std::string command;
    std::uint64_t seed = 0;
    std::string config_hash;  ///< FNV-1a 64 of the canonical config, hex
};

Json to_json(const Metadata& meta);

/// 16 hex digits of the FNV-1a 64-bit hash of `text`.
std::string fnv1a_hex(const std::string& text);

/// Row-per-array encoding.
Json matrix_to_json(const Eigen::MatrixXd& M);
Eigen::MatrixXd matrix_from_json(const Json& j);
Json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const Json& j);

Json graph_to_json(const WeightGraph& graph);

/// lambdas, W, U, intercepts, cluster labels, objective trace, status.
Json model_state_to_json(const ModelState& state, std::span<const int> clusters);
Json network_state_to_json(const NetworkLassoState& state);

/// Full model document for one method outcome. `predictor` holds the
/// coefficients to apply to raw (unstandardized) inputs.
Json outcome_to_json(const MethodOutcome& outcome, const Predictor& predictor, std::span<const std::string> task_ids,
                     const Metadata& meta);

/// Reads the "predictor" block written by outcome_to_json.
Predictor predictor_from_json(const Json& doc);

Json ground_truth_to_json(const SimConfig& config, const GroundTruth& truth, const Metadata& meta);
Json sim_config_to_json(const SimConfig& config);

Json eval_report_to_json(const EvalReport& report);
Json grid_table_to_json(const GridResult& grid);

/// step,block,objective with block in {init, centroids, coefficients}.
void write_trace_csv(std::ostream& out, const ModelState& state);
/// task_id,cluster (clusters numbered from 1).
void write_clusters_csv(std::ostream& out, std::span<const std::string> task_ids, std::span<const int> clusters);
void write_grid_csv(std::ostream& out, const GridResult& grid);
/// task_id,<metric columns> per task plus a final "mean" row.
void write_report_csv(std::ostream& out, std::span<const EvalReport> reports, std::span<const std::string> task_ids);

/// One simulated cell of a benchmark table.
struct BenchmarkCell {
    int clusters = 0;
    double phi = 0.0;
    double task_variance = 0.0;
    MonteCarloResult result;
};

/// Rows (C, sigma_v^2, method); for each phi an NMSE and an RMSE column
/// holding "mean (sd)", or an AUC column for logistic responses. Cells
/// without successes print NA.
void write_benchmark_table_csv(std::ostream& out, std::span<const BenchmarkCell> cells,
                               LossKind response = LossKind::linear);
Json benchmark_to_json(std::span<const BenchmarkCell> cells, const Metadata& meta);

/// Writes `text` to `path`, creating parent directories. Throws Error(Io).
void write_text_file(const std::string& path, const std::string& text);

} // namespace mtl
