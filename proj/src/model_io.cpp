#include "mtlcvx/model_io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "mtlcvx/error.hpp"

namespace mtl {

namespace {

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string mean_sd(double mean, double sd) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f (%.3f)", mean, sd);
    return buf;
}

Json doubles(std::span<const double> values) {
    Json a = Json::array();
    for (double v : values) a.push_back(v);
    return a;
}

// CSV fields here are identifiers; quote only when needed.
std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

} // namespace

Json to_json(const Metadata& meta) {
    Json j;
    j["tool"] = "mtlcvx";
    j["version"] = kToolVersion;
    j["command"] = meta.command;
    j["seed"] = meta.seed;
    j["config_hash"] = meta.config_hash;
    return j;
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Json matrix_to_json(const Eigen::MatrixXd& M) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
    if (!j.is_array()) throw Error(ErrorKind::SchemaMismatch, "matrix must be an array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
    Eigen::MatrixXd M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const Json& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw Error(ErrorKind::SchemaMismatch, "ragged matrix row " + std::to_string(i));
        for (Eigen::Index c = 0; c < cols; ++c) M(i, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return M;
}

Json vector_to_json(const Eigen::VectorXd& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Eigen::VectorXd vector_from_json(const Json& j) {
    if (!j.is_array()) throw Error(ErrorKind::SchemaMismatch, "vector must be an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
}

Json graph_to_json(const WeightGraph& graph) {
    Json edges = Json::array();
    for (const Edge& e : graph.edges()) edges.push_back(Json::array({e.m, e.l, e.weight}));
    Json j;
    j["task_count"] = graph.task_count();
    j["edges"] = std::move(edges);
    return j;
}

Json model_state_to_json(const ModelState& state, std::span<const int> clusters) {
    Json j;
    j["lambda1"] = state.config.lambda1;
    j["lambda2"] = state.config.lambda2;
    j["rho"] = state.config.rho;
    j["loss"] = to_string(state.config.loss);
    j["intercept_ridge"] = state.config.intercept_ridge;
    j["converged"] = state.converged;
    j["iterations"] = state.iterations;
    j["centroid_converged"] = state.centroids.converged;
    j["W"] = matrix_to_json(state.W);
    j["U"] = matrix_to_json(state.U);
    j["intercepts"] = vector_to_json(state.intercepts);
    Json labels = Json::array();
    for (int c : clusters) labels.push_back(c);
    j["clusters"] = std::move(labels);
    j["objective_trace"] = doubles(state.objective_trace);
    return j;
}

Json network_state_to_json(const NetworkLassoState& state) {
    Json j;
    j["lambda"] = state.lambda;
    j["rho"] = state.rho;
    j["converged"] = state.converged;
    j["iterations"] = state.iterations;
    j["primal_residual"] = state.primal_residual;
    j["dual_residual"] = state.dual_residual;
    j["W"] = matrix_to_json(state.W);
    j["intercepts"] = vector_to_json(state.intercepts);
    return j;
}

Json grid_table_to_json(const GridResult& grid) {
    Json cells = Json::array();
    for (const GridCell& c : grid.table) {
        Json cell;
        cell["lambda1"] = c.lambda1;
        cell["lambda2"] = c.lambda2;
        cell["ok"] = c.ok;
        cell["score"] = c.ok ? Json(c.score) : Json(nullptr);
        cell["converged"] = c.converged;
        cell["iterations"] = c.iterations;
        if (!c.error.empty()) cell["error"] = c.error;
        cells.push_back(std::move(cell));
    }
    Json j;
    j["method"] = to_string(grid.method);
    j["lambda1"] = grid.lambda1;
    j["lambda2"] = grid.lambda2;
    j["best_score"] = grid.best_score;
    j["cells"] = std::move(cells);
    return j;
}

Json eval_report_to_json(const EvalReport& report) {
    Json j;
    j["method"] = report.method;
    j["lambda1"] = report.lambda1;
    j["lambda2"] = report.lambda2;
    j["seed"] = report.seed;
    if (!report.nmse.empty()) {
        j["nmse_mean"] = report.nmse_mean;
        j["nmse"] = doubles(report.nmse);
    }
    if (!report.rmse.empty()) {
        j["rmse_mean"] = report.rmse_mean;
        j["rmse"] = doubles(report.rmse);
    }
    if (!report.auc.empty()) {
        j["auc_mean"] = report.auc_mean;
        j["auc"] = doubles(report.auc);
    }
    return j;
}

Json outcome_to_json(const MethodOutcome& outcome, const Predictor& predictor, std::span<const std::string> task_ids,
                     const Metadata& meta) {
    Json j;
    j["metadata"] = to_json(meta);
    j["method"] = to_string(outcome.method);
    Json ids = Json::array();
    for (const auto& id : task_ids) ids.push_back(id);
    j["task_ids"] = std::move(ids);
    j["lambda1"] = outcome.report.lambda1;
    j["lambda2"] = outcome.report.lambda2;

    Json pred;
    pred["W"] = matrix_to_json(predictor.W);
    pred["intercepts"] = vector_to_json(predictor.intercepts);
    j["predictor"] = std::move(pred);

    if (outcome.method == Method::mtlacvx) {
        if (outcome.stage1) j["stage1"] = model_state_to_json(*outcome.stage1, {});
        if (outcome.model) j["stage2"] = model_state_to_json(*outcome.model, outcome.clusters);
        if (outcome.graph_used) j["adaptive_graph"] = graph_to_json(*outcome.graph_used);
    } else if (outcome.model) {
        j["model"] = model_state_to_json(*outcome.model, outcome.clusters);
    }
    if (outcome.network) j["network"] = network_state_to_json(*outcome.network);
    if (outcome.grid) j["grid"] = grid_table_to_json(*outcome.grid);
    return j;
}

Predictor predictor_from_json(const Json& doc) {
    if (!doc.contains("predictor")) throw Error(ErrorKind::SchemaMismatch, "model file has no predictor block");
    const Json& p = doc.at("predictor");
    Predictor out;
    out.W = matrix_from_json(p.at("W"));
    out.intercepts = vector_from_json(p.at("intercepts"));
    if (out.intercepts.size() != out.W.rows())
        throw Error(ErrorKind::SchemaMismatch, "predictor intercepts do not match W rows");
    return out;
}

Json sim_config_to_json(const SimConfig& config) {
    Json j;
    j["tasks"] = config.tasks;
    j["features"] = config.features;
    j["clusters"] = config.clusters;
    j["n_train"] = config.n_train;
    j["n_validation"] = config.n_validation;
    j["n_test"] = config.n_test;
    j["phi"] = config.phi;
    j["noise_variance"] = config.noise_variance;
    j["centroid_variance"] = config.centroid_variance;
    j["task_variance"] = config.task_variance;
    j["seed"] = config.seed;
    return j;
}

Json ground_truth_to_json(const SimConfig& config, const GroundTruth& truth, const Metadata& meta) {
    Json j;
    j["metadata"] = to_json(meta);
    j["config"] = sim_config_to_json(config);
    j["cluster_of_task"] = truth.cluster_of_task;
    j["variable_cluster"] = truth.variable_cluster;
    j["U_star"] = matrix_to_json(truth.U_star);
    j["V_star"] = matrix_to_json(truth.V_star);
    j["W_star"] = matrix_to_json(truth.W_star);
    return j;
}

void write_trace_csv(std::ostream& out, const ModelState& state) {
    out << "step,block,objective\n";
    for (std::size_t i = 0; i < state.objective_trace.size(); ++i) {
        const char* block = i == 0 ? "init" : (i % 2 == 1 ? "centroids" : "coefficients");
        out << i << ',' << block << ',' << format_number(state.objective_trace[i]) << '\n';
    }
}

void write_clusters_csv(std::ostream& out, std::span<const std::string> task_ids, std::span<const int> clusters) {
    if (task_ids.size() != clusters.size())
        throw Error(ErrorKind::DimensionMismatch, "cluster labels do not match task count");
    out << "task_id,cluster\n";
    for (std::size_t m = 0; m < clusters.size(); ++m) out << csv_field(task_ids[m]) << ',' << clusters[m] + 1 << '\n';
}

void write_grid_csv(std::ostream& out, const GridResult& grid) {
    out << "lambda1,lambda2,score,ok,converged,iterations,error\n";
    for (const GridCell& c : grid.table) {
        out << format_number(c.lambda1) << ',' << format_number(c.lambda2) << ','
            << (c.ok ? format_number(c.score) : std::string("NA")) << ',' << (c.ok ? 1 : 0) << ','
            << (c.converged ? 1 : 0) << ',' << c.iterations << ',' << csv_field(c.error) << '\n';
    }
}

void write_report_csv(std::ostream& out, std::span<const EvalReport> reports, std::span<const std::string> task_ids) {
    out << "task_id";
    for (const EvalReport& r : reports) {
        if (!r.nmse.empty()) out << ',' << r.method << "_nmse";
        if (!r.rmse.empty()) out << ',' << r.method << "_rmse";
        if (!r.auc.empty()) out << ',' << r.method << "_auc";
    }
    out << '\n';
    // AUC skips single-class tasks, so its vector can be shorter than the task list.
    for (std::size_t m = 0; m < task_ids.size(); ++m) {
        out << csv_field(task_ids[m]);
        for (const EvalReport& r : reports) {
            if (!r.nmse.empty()) out << ',' << (m < r.nmse.size() ? format_number(r.nmse[m]) : "NA");
            if (!r.rmse.empty()) out << ',' << (m < r.rmse.size() ? format_number(r.rmse[m]) : "NA");
            if (!r.auc.empty()) out << ',' << (m < r.auc.size() ? format_number(r.auc[m]) : "NA");
        }
        out << '\n';
    }
    out << "mean";
    for (const EvalReport& r : reports) {
        if (!r.nmse.empty()) out << ',' << format_number(r.nmse_mean);
        if (!r.rmse.empty()) out << ',' << format_number(r.rmse_mean);
        if (!r.auc.empty()) out << ',' << format_number(r.auc_mean);
    }
    out << '\n';
}

void write_benchmark_table_csv(std::ostream& out, std::span<const BenchmarkCell> cells, LossKind response) {
    const bool binary = response == LossKind::logistic;
    std::vector<double> phis;
    for (const auto& c : cells)
        if (std::find(phis.begin(), phis.end(), c.phi) == phis.end()) phis.push_back(c.phi);
    std::sort(phis.begin(), phis.end());

    // (C, sigma_v^2) -> phi -> cell, keeping first-seen row order.
    std::vector<std::pair<int, double>> row_keys;
    std::map<std::pair<int, double>, std::map<double, const BenchmarkCell*>> index;
    for (const auto& c : cells) {
        const auto key = std::make_pair(c.clusters, c.task_variance);
        if (!index.count(key)) row_keys.push_back(key);
        index[key][c.phi] = &c;
    }

    out << "C,sigma_v2,method";
    for (double phi : phis) {
        if (binary)
            out << ",phi=" << phi << " AUC";
        else
            out << ",phi=" << phi << " NMSE,phi=" << phi << " RMSE";
    }
    out << '\n';
    for (const auto& key : row_keys) {
        const auto& by_phi = index[key];
        std::vector<Method> methods;
        for (const auto& [phi, cell] : by_phi)
            for (const auto& s : cell->result.summary)
                if (std::find(methods.begin(), methods.end(), s.method) == methods.end()) methods.push_back(s.method);
        for (Method method : methods) {
            out << key.first << ',' << key.second << ',' << to_string(method);
            for (double phi : phis) {
                const MethodSummary* s = nullptr;
                if (auto it = by_phi.find(phi); it != by_phi.end())
                    for (const auto& candidate : it->second->result.summary)
                        if (candidate.method == method) s = &candidate;
                if (!s || s->successes == 0) {
                    out << (binary ? ",NA" : ",NA,NA");
                    continue;
                }
                if (binary)
                    out << ',' << mean_sd(s->auc_mean, s->auc_sd);
                else
                    out << ',' << mean_sd(s->nmse_mean, s->nmse_sd) << ',' << mean_sd(s->rmse_mean, s->rmse_sd);
            }
            out << '\n';
        }
    }
}

Json benchmark_to_json(std::span<const BenchmarkCell> cells, const Metadata& meta) {
    Json list = Json::array();
    for (const auto& c : cells) {
        Json cell;
        cell["clusters"] = c.clusters;
        cell["phi"] = c.phi;
        cell["task_variance"] = c.task_variance;
        Json summary = Json::array();
        for (const auto& s : c.result.summary) {
            Json row;
            row["method"] = to_string(s.method);
            row["successes"] = s.successes;
            row["failures"] = s.failures;
            row["nmse_mean"] = s.nmse_mean;
            row["nmse_sd"] = s.nmse_sd;
            row["rmse_mean"] = s.rmse_mean;
            row["rmse_sd"] = s.rmse_sd;
            row["auc_mean"] = s.auc_mean;
            row["auc_sd"] = s.auc_sd;
            summary.push_back(std::move(row));
        }
        cell["summary"] = std::move(summary);
        Json reps = Json::array();
        for (const auto& r : c.result.reps) {
            Json rep;
            rep["rep"] = r.rep;
            rep["seed"] = r.seed;
            Json reports = Json::array();
            for (const auto& report : r.reports) reports.push_back(eval_report_to_json(report));
            rep["reports"] = std::move(reports);
            Json failures = Json::array();
            for (const auto& [method, message] : r.failures)
                failures.push_back(Json{{"method", to_string(method)}, {"error", message}});
            rep["failures"] = std::move(failures);
            reps.push_back(std::move(rep));
        }
        cell["reps"] = std::move(reps);
        list.push_back(std::move(cell));
    }
    Json j;
    j["metadata"] = to_json(meta);
    j["cells"] = std::move(list);
    return j;
}

void write_text_file(const std::string& path, const std::string& text) {
    namespace fs = std::filesystem;
    std::error_code ec;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path(), ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create directory for " + path + ": " + ec.message());
    std::ofstream out(target, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + path + " for writing");
    out << text;
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path);
}

} // namespace mtl
