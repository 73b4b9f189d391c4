#include "mtlcvx/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "mtlcvx/error.hpp"
#include "mtlcvx/rng.hpp"

namespace mtl::cli {

namespace {

Error config_error(const std::string& message) { return Error(ErrorKind::ConfigInvalid, message); }

// Read-only view of one JSON object in the config, with its key path for messages.
class Section {
public:
    Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw config_error("'" + display() + "' must be an object");
    }

    void allow(std::initializer_list<const char*> keys) const {
        for (const auto& [key, value] : j_.items()) {
            if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; }))
                throw config_error("unknown key '" + full(key) + "'");
        }
    }

    bool has(const char* key) const { return j_.contains(key); }

    Section section(const char* key) const { return Section(j_.at(key), full(key)); }

    template <class T>
    void get(const char* key, T& dst) const {
        if (!j_.contains(key)) return;
        try {
            dst = j_.at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw config_error("key '" + full(key) + "': " + e.what());
        }
    }

    template <class T, class Parse>
    void get_parsed(const char* key, T& dst, Parse parse) const {
        if (!j_.contains(key)) return;
        std::string text;
        get(key, text);
        try {
            dst = parse(text);
        } catch (const std::exception& e) {
            throw config_error("key '" + full(key) + "': " + e.what());
        }
    }

private:
    std::string display() const { return path_.empty() ? "<root>" : path_; }
    std::string full(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const Json& j_;
    std::string path_;
};

NmseReference parse_reference(const std::string& text) {
    if (text == "noiseless") return NmseReference::noiseless;
    if (text == "observed") return NmseReference::observed;
    throw config_error("reference must be 'noiseless' or 'observed', got '" + text + "'");
}

std::string to_string(NmseReference r) { return r == NmseReference::noiseless ? "noiseless" : "observed"; }

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
    std::vector<Method> out;
    for (const auto& n : names) {
        const Method m = parse_method(n);
        if (std::find(out.begin(), out.end(), m) != out.end()) throw config_error("method '" + n + "' listed twice");
        out.push_back(m);
    }
    return out;
}

Json method_names(std::span<const Method> methods) {
    Json a = Json::array();
    for (auto m : methods) a.push_back(to_string(m));
    return a;
}

// Settings shared by the two simulation profiles: pooled protocol and a
// reduced grid with loose solver tolerances, sized for Monte Carlo runs.
void apply_simulation_profile(RunConfig& c, int clusters) {
    c.sim = SimConfig::reference_design(clusters, 0.0, 1.0, c.seed);
    c.methods = {Method::stll, Method::mtlnl, Method::mtlcvx, Method::mtlacvx};
    c.pipeline.protocol = Protocol::pooled;
    c.pipeline.grid.lambda1 = {0.1, 1.0, 10.0};
    c.pipeline.grid.lambda2 = log_space(1e-2, 1.0, 5);
    c.pipeline.cv_lasso.tol = 1e-6;
    c.pipeline.tune.fit.outer_tol = 1e-4;
    c.pipeline.tune.fit.max_outer = 300;
    c.pipeline.tune.fit.centroid.inner_tol = 1e-6;
    c.pipeline.tune.fit.centroid.outer_tol = 1e-6;
    c.pipeline.tune.network.abs_tol = 1e-3;
    c.pipeline.tune.network.rel_tol = 1e-3;
    c.pipeline.tune.network.max_iterations = 3000;
    c.benchmark.reps = 100;
    c.benchmark.clusters = {clusters};
    c.benchmark.phis = {0.0, 0.2, 0.5};
    c.benchmark.task_variances = {1.0, 2.0, 3.0, 4.0, 5.0};
}

bool needs_data_file(const std::string& profile) { return profile == "school-like" || profile == "landmine-like"; }

Metadata metadata_for(const RunConfig& c, const std::string& command) {
    return {command, c.seed, fnv1a_hex(config_to_json(c).dump())};
}

std::string out_path(const RunConfig& c, const std::string& name) {
    return (std::filesystem::path(c.out_dir) / name).string();
}

void emit(const RunConfig& c, const std::string& name, const std::string& text) {
    write_text_file(out_path(c, name), text);
}

void emit_json(const RunConfig& c, const std::string& name, const Json& doc) { emit(c, name, doc.dump(2) + "\n"); }

template <class Writer>
void emit_csv(const RunConfig& c, const std::string& name, Writer writer) {
    std::ostringstream os;
    writer(os);
    emit(c, name, os.str());
}

// Data as the models see it, plus what raw-scale evaluation needs.
struct Prepared {
    TaskSplit split;                              // model space (standardized when requested)
    std::vector<TaskDataset> raw_test;            // original scale
    std::vector<StandardizationInfo> scaling;     // empty: no standardization
    EvaluationTarget target;                      // against raw_test
    std::vector<std::string> task_ids;
    std::optional<SimDataset> simulated;
};

SimDataset simulate(const RunConfig& c) {
    SimConfig sc = c.sim;
    sc.seed = c.seed;
    auto data = generate(sc);
    if (c.sim_response == LossKind::logistic)
        data.tasks = binarize_responses(data.tasks, data.truth, derive_seed(c.seed, {0xb1}));
    return data;
}

Eigen::MatrixXd load_w_star(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::SchemaMismatch, path + ": " + e.what());
    }
    if (!doc.contains("W_star")) throw Error(ErrorKind::SchemaMismatch, path + " has no W_star");
    return matrix_from_json(doc.at("W_star"));
}

Prepared prepare(const RunConfig& c, bool standardize) {
    Prepared p;
    if (c.simulated()) {
        p.simulated = simulate(c);
        SimConfig sc = c.sim;
        sc.seed = c.seed;
        p.split = split_simulated(*p.simulated, sc);
        p.target.W_star = p.simulated->truth.W_star;
        if (c.sim_response == LossKind::linear && c.reference == NmseReference::noiseless)
            p.target.references = noiseless_responses(p.split.test, p.simulated->truth);
    } else {
        auto tasks = load_tasks_csv(c.data.path, CsvSchema{c.data.task_column, c.data.response_column, c.data.loss});
        if (c.data.downsample)
            for (std::size_t m = 0; m < tasks.size(); ++m)
                tasks[m] = downsample_balanced(tasks[m], derive_seed(c.seed, {0xd5, m}));
        const auto seed = derive_seed(c.seed, {0x5b});
        const SplitSpec spec = c.data.train_count > 0
            ? SplitSpec::counts(c.data.train_count, c.data.validation_count, seed)
            : SplitSpec::fractions(c.data.train, c.data.validation, c.data.test, seed);
        p.split = split_tasks(tasks, spec);
        if (!c.truth_path.empty()) {
            p.target.W_star = load_w_star(c.truth_path);
            if (p.target.W_star->rows() != static_cast<Eigen::Index>(tasks.size()) ||
                p.target.W_star->cols() != tasks.front().X.cols())
                throw Error(ErrorKind::DimensionMismatch, "ground truth W_star does not match the data");
            if (c.data.loss == LossKind::linear && c.reference == NmseReference::noiseless)
                for (std::size_t m = 0; m < tasks.size(); ++m)
                    p.target.references.push_back(p.split.test[m].X * p.target.W_star->row(m).transpose());
        }
    }
    p.raw_test = p.split.test;
    for (const auto& t : p.split.train) p.task_ids.push_back(t.task_id);
    if (standardize && !c.simulated() && c.data.standardize) {
        for (std::size_t m = 0; m < p.split.train.size(); ++m) {
            auto [train, info] = mtl::standardize(p.split.train[m]);
            p.split.train[m] = std::move(train);
            p.split.validation[m] = info.apply(p.split.validation[m]);
            p.split.test[m] = info.apply(p.split.test[m]);
            p.scaling.push_back(std::move(info));
        }
    }
    return p;
}

Predictor to_raw_scale(const Predictor& model, const std::vector<StandardizationInfo>& scaling) {
    if (scaling.empty()) return model;
    Predictor out = model;
    for (std::size_t m = 0; m < scaling.size(); ++m) {
        const auto row = static_cast<Eigen::Index>(m);
        Eigen::VectorXd w = model.W.row(row).transpose();
        out.intercepts(row) = scaling[m].to_original_scale(w, model.intercepts(row));
        out.W.row(row) = w.transpose();
    }
    return out;
}

void print_report(std::ostream& out, const EvalReport& r) {
    char line[256];
    std::snprintf(line, sizeof(line), "%-8s", r.method.c_str());
    out << line;
    if (!r.nmse.empty()) {
        std::snprintf(line, sizeof(line), "  nmse %.4f", r.nmse_mean);
        out << line;
    }
    if (!r.rmse.empty()) {
        std::snprintf(line, sizeof(line), "  rmse %.4f", r.rmse_mean);
        out << line;
    }
    if (!r.auc.empty()) {
        std::snprintf(line, sizeof(line), "  auc %.4f", r.auc_mean);
        out << line;
    }
    std::snprintf(line, sizeof(line), "  lambda1 %g  lambda2 %g", r.lambda1, r.lambda2);
    out << line << '\n';
}

Json metrics_document(const RunConfig& c, const std::string& command, std::span<const EvalReport> reports,
                      const std::vector<std::pair<std::string, std::string>>& failures) {
    Json doc;
    doc["metadata"] = to_json(metadata_for(c, command));
    Json list = Json::array();
    for (const auto& r : reports) list.push_back(eval_report_to_json(r));
    doc["reports"] = std::move(list);
    Json fails = Json::array();
    for (const auto& [method, message] : failures) fails.push_back(Json{{"method", method}, {"error", message}});
    doc["failures"] = std::move(fails);
    return doc;
}

void write_model_outputs(const RunConfig& c, const std::string& command, const MethodOutcome& oc,
                         const Predictor& raw, const std::vector<std::string>& task_ids, const std::string& suffix) {
    emit_json(c, "model" + suffix + ".json", outcome_to_json(oc, raw, task_ids, metadata_for(c, command)));
    if (!oc.clusters.empty())
        emit_csv(c, "clusters" + suffix + ".csv", [&](std::ostream& os) { write_clusters_csv(os, task_ids, oc.clusters); });
    if (oc.grid) emit_csv(c, "grid" + suffix + ".csv", [&](std::ostream& os) { write_grid_csv(os, *oc.grid); });
    if (c.trace && oc.model) {
        emit_csv(c, "trace" + suffix + ".csv", [&](std::ostream& os) { write_trace_csv(os, *oc.model); });
        if (oc.stage1)
            emit_csv(c, "trace" + suffix + "_stage1.csv", [&](std::ostream& os) { write_trace_csv(os, *oc.stage1); });
    }
}

} // namespace

void RunConfig::validate(const std::string& command) const {
    if (jobs < 1) throw config_error("jobs must be >= 1");
    if (out_dir.empty()) throw config_error("out_dir must not be empty");
    if (needs_data_file(profile) && command != "simulate" && command != "benchmark" && data.path.empty())
        throw config_error("profile '" + profile + "' reads a task CSV; set data.path or --data");

    if (simulated() || command == "simulate" || command == "benchmark") {
        if (command == "simulate" && !simulated()) throw config_error("simulate does not read data.path");
        if (command == "benchmark" && !simulated()) throw config_error("benchmark runs on simulated data only");
        SimConfig sc = sim;
        sc.seed = seed;
        sc.validate();
    } else {
        if (data.downsample && data.loss != LossKind::logistic)
            throw config_error("data.downsample needs a logistic response");
        const SplitSpec spec = data.train_count > 0 ? SplitSpec::counts(data.train_count, data.validation_count, seed)
                                                    : SplitSpec::fractions(data.train, data.validation, data.test, seed);
        spec.validate();
    }
    if (pipeline.knn_k < 1) throw config_error("knn_k must be >= 1");

    if (command == "fit") {
        if (!(lambda1 > 0.0)) throw config_error("lambda1 must be positive");
        if (!(lambda2 >= 0.0)) throw config_error("lambda2 must be non-negative");
        FitConfig fc = pipeline.tune.fit;
        fc.lambda1 = lambda1;
        fc.lambda2 = lambda2;
        fc.validate();
    }
    if (command == "tune" || command == "benchmark") {
        if (methods.empty()) throw config_error("method list is empty");
        pipeline.grid.validate();
        pipeline.tune.fit.validate();
        if (pipeline.cv_folds < 2) throw config_error("cv_folds must be >= 2");
        if (!(pipeline.cv_lasso.tol > 0.0)) throw config_error("solver.cv_lasso_tol must be positive");
    }
    if (command == "evaluate" && model_path.empty()) throw config_error("evaluate needs a model file (--model)");
    if (command == "benchmark") {
        if (benchmark.reps < 1) throw config_error("benchmark.reps must be >= 1");
        for (int C : benchmark.clusters_or(sim))
            for (double phi : benchmark.phis_or(sim))
                for (double v : benchmark.task_variances_or(sim)) {
                    SimConfig sc = sim;
                    sc.clusters = C;
                    sc.phi = phi;
                    sc.task_variance = v;
                    sc.validate();
                }
    }
}

RunConfig profile_config(const std::string& profile) {
    RunConfig c;
    c.profile = profile;
    c.pipeline.grid = GridSpec::defaults(LossKind::linear);
    if (profile.empty()) return c;
    if (profile == "paper-c10") {
        apply_simulation_profile(c, 10);
    } else if (profile == "paper-c5") {
        apply_simulation_profile(c, 5);
    } else if (profile == "school-like") {
        c.data.loss = LossKind::linear;
        c.data.standardize = true;
        c.methods = {Method::stll, Method::stlr, Method::mtlnl, Method::mtlcvx, Method::mtlacvx};
    } else if (profile == "landmine-like") {
        c.data.loss = LossKind::logistic;
        c.data.standardize = true;
        c.data.downsample = true;
        c.pipeline.grid = GridSpec::defaults(LossKind::logistic);
        c.pipeline.tune.fit.intercept_ridge = 0.1;
        c.pipeline.tune.network.intercept_ridge = 0.1;
        c.methods = {Method::stll, Method::stlr, Method::mtlnl, Method::mtlcvx, Method::mtlacvx};
    } else {
        throw config_error("unknown profile '" + profile + "' (paper-c10, paper-c5, school-like, landmine-like)");
    }
    return c;
}

void apply_config_json(RunConfig& c, const Json& doc) {
    const Section root(doc, "");
    root.allow({"profile", "seed", "jobs", "out_dir", "method", "methods", "lambda1", "lambda2", "protocol", "knn_k",
                "cv_folds", "reference", "trace", "model", "truth", "data", "sim", "grid", "solver", "benchmark"});
    root.get("seed", c.seed);
    root.get("jobs", c.jobs);
    root.get("out_dir", c.out_dir);
    root.get_parsed("method", c.method, parse_method);
    if (root.has("methods")) {
        std::vector<std::string> names;
        root.get("methods", names);
        try {
            c.methods = parse_methods(names);
        } catch (const std::exception& e) {
            throw config_error(std::string("key 'methods': ") + e.what());
        }
    }
    root.get("lambda1", c.lambda1);
    root.get("lambda2", c.lambda2);
    root.get_parsed("protocol", c.pipeline.protocol, parse_protocol);
    root.get("knn_k", c.pipeline.knn_k);
    root.get("cv_folds", c.pipeline.cv_folds);
    root.get_parsed("reference", c.reference, parse_reference);
    root.get("trace", c.trace);
    root.get("model", c.model_path);
    root.get("truth", c.truth_path);

    if (root.has("data")) {
        const auto s = root.section("data");
        s.allow({"path", "loss", "task_column", "response_column", "train", "validation", "test", "train_count",
                 "validation_count", "standardize", "downsample"});
        s.get("path", c.data.path);
        s.get_parsed("loss", c.data.loss, parse_loss_kind);
        s.get("task_column", c.data.task_column);
        s.get("response_column", c.data.response_column);
        s.get("train", c.data.train);
        s.get("validation", c.data.validation);
        s.get("test", c.data.test);
        s.get("train_count", c.data.train_count);
        s.get("validation_count", c.data.validation_count);
        s.get("standardize", c.data.standardize);
        s.get("downsample", c.data.downsample);
    }
    if (root.has("sim")) {
        const auto s = root.section("sim");
        s.allow({"tasks", "features", "clusters", "n_train", "n_validation", "n_test", "phi", "noise_variance",
                 "centroid_variance", "task_variance", "response"});
        s.get("tasks", c.sim.tasks);
        s.get("features", c.sim.features);
        s.get("clusters", c.sim.clusters);
        s.get("n_train", c.sim.n_train);
        s.get("n_validation", c.sim.n_validation);
        s.get("n_test", c.sim.n_test);
        s.get("phi", c.sim.phi);
        s.get("noise_variance", c.sim.noise_variance);
        s.get("centroid_variance", c.sim.centroid_variance);
        s.get("task_variance", c.sim.task_variance);
        s.get_parsed("response", c.sim_response, parse_loss_kind);
    }
    if (root.has("grid")) {
        const auto s = root.section("grid");
        s.allow({"lambda1", "lambda2", "ridge", "metric", "scale_by_mean_weight"});
        s.get("lambda1", c.pipeline.grid.lambda1);
        s.get("lambda2", c.pipeline.grid.lambda2);
        s.get("ridge", c.pipeline.grid.ridge);
        s.get_parsed("metric", c.pipeline.grid.metric, parse_selection_metric);
        s.get("scale_by_mean_weight", c.pipeline.grid.scale_by_mean_weight);
    }
    if (root.has("solver")) {
        const auto s = root.section("solver");
        s.allow({"rho", "outer_tol", "max_outer", "centroid_inner_tol", "centroid_outer_tol", "centroid_max_inner",
                 "centroid_max_outer", "intercept_ridge", "network_rho", "network_abs_tol", "network_rel_tol",
                 "network_max_iterations", "stll_grid_count", "stll_grid_ratio", "cv_lasso_tol"});
        auto& fit = c.pipeline.tune.fit;
        auto& net = c.pipeline.tune.network;
        s.get("rho", fit.rho);
        s.get("outer_tol", fit.outer_tol);
        s.get("max_outer", fit.max_outer);
        s.get("centroid_inner_tol", fit.centroid.inner_tol);
        s.get("centroid_outer_tol", fit.centroid.outer_tol);
        s.get("centroid_max_inner", fit.centroid.max_inner);
        s.get("centroid_max_outer", fit.centroid.max_outer);
        if (s.has("intercept_ridge")) {
            s.get("intercept_ridge", fit.intercept_ridge);
            net.intercept_ridge = fit.intercept_ridge;
        }
        s.get("network_rho", net.rho);
        s.get("network_abs_tol", net.abs_tol);
        s.get("network_rel_tol", net.rel_tol);
        s.get("network_max_iterations", net.max_iterations);
        s.get("stll_grid_count", c.pipeline.stll_grid_count);
        s.get("stll_grid_ratio", c.pipeline.stll_grid_ratio);
        s.get("cv_lasso_tol", c.pipeline.cv_lasso.tol);
    }
    if (root.has("benchmark")) {
        const auto s = root.section("benchmark");
        s.allow({"reps", "clusters", "phis", "task_variances"});
        s.get("reps", c.benchmark.reps);
        s.get("clusters", c.benchmark.clusters);
        s.get("phis", c.benchmark.phis);
        s.get("task_variances", c.benchmark.task_variances);
    }
}

Json config_to_json(const RunConfig& c) {
    Json j;
    j["profile"] = c.profile;
    j["seed"] = c.seed;
    j["method"] = to_string(c.method);
    j["methods"] = method_names(c.methods);
    j["lambda1"] = c.lambda1;
    j["lambda2"] = c.lambda2;
    j["protocol"] = to_string(c.pipeline.protocol);
    j["knn_k"] = c.pipeline.knn_k;
    j["cv_folds"] = c.pipeline.cv_folds;
    j["reference"] = to_string(c.reference);
    j["trace"] = c.trace;
    j["model"] = c.model_path;
    j["truth"] = c.truth_path;
    j["data"] = Json{{"path", c.data.path},
                     {"loss", to_string(c.data.loss)},
                     {"task_column", c.data.task_column},
                     {"response_column", c.data.response_column},
                     {"train", c.data.train},
                     {"validation", c.data.validation},
                     {"test", c.data.test},
                     {"train_count", c.data.train_count},
                     {"validation_count", c.data.validation_count},
                     {"standardize", c.data.standardize},
                     {"downsample", c.data.downsample}};
    Json sim = sim_config_to_json(c.sim);
    sim.erase("seed");
    sim["response"] = to_string(c.sim_response);
    j["sim"] = std::move(sim);
    const auto& g = c.pipeline.grid;
    j["grid"] = Json{{"lambda1", g.lambda1},
                     {"lambda2", g.lambda2},
                     {"ridge", g.ridge},
                     {"metric", to_string(g.metric)},
                     {"scale_by_mean_weight", g.scale_by_mean_weight}};
    const auto& fit = c.pipeline.tune.fit;
    const auto& net = c.pipeline.tune.network;
    j["solver"] = Json{{"rho", fit.rho},
                       {"outer_tol", fit.outer_tol},
                       {"max_outer", fit.max_outer},
                       {"centroid_inner_tol", fit.centroid.inner_tol},
                       {"centroid_outer_tol", fit.centroid.outer_tol},
                       {"centroid_max_inner", fit.centroid.max_inner},
                       {"centroid_max_outer", fit.centroid.max_outer},
                       {"intercept_ridge", fit.intercept_ridge},
                       {"network_rho", net.rho},
                       {"network_abs_tol", net.abs_tol},
                       {"network_rel_tol", net.rel_tol},
                       {"network_max_iterations", net.max_iterations},
                       {"stll_grid_count", c.pipeline.stll_grid_count},
                       {"stll_grid_ratio", c.pipeline.stll_grid_ratio},
                       {"cv_lasso_tol", c.pipeline.cv_lasso.tol}};
    j["benchmark"] = Json{{"reps", c.benchmark.reps},
                          {"clusters", c.benchmark.clusters},
                          {"phis", c.benchmark.phis},
                          {"task_variances", c.benchmark.task_variances}};
    return j;
}

int cmd_simulate(const RunConfig& c, std::ostream& out) {
    const auto data = simulate(c);
    SimConfig sc = c.sim;
    sc.seed = c.seed;
    const auto split = split_simulated(data, sc);
    const auto meta = metadata_for(c, "simulate");

    emit_csv(c, "tasks.csv", [&](std::ostream& os) { write_tasks_csv(os, data.tasks); });
    emit_csv(c, "train.csv", [&](std::ostream& os) { write_tasks_csv(os, split.train); });
    emit_csv(c, "validation.csv", [&](std::ostream& os) { write_tasks_csv(os, split.validation); });
    emit_csv(c, "test.csv", [&](std::ostream& os) { write_tasks_csv(os, split.test); });
    emit_json(c, "ground_truth.json", ground_truth_to_json(sc, data.truth, meta));

    out << "tasks " << sc.tasks << "  features " << sc.features << "  clusters " << sc.clusters << "  rows/task "
        << sc.rows_per_task() << "  split " << sc.n_train << '/' << sc.n_validation << '/' << sc.n_test << "  response "
        << to_string(c.sim_response) << '\n';
    out << "wrote " << c.out_dir << "/{tasks,train,validation,test}.csv and ground_truth.json\n";
    return exit_ok;
}

int cmd_fit(const RunConfig& c, std::ostream& out) {
    const auto prep = prepare(c, true);
    const auto& train = prep.split.train;
    const auto& validation = prep.split.validation;
    const auto T = train.size();
    const auto loss = train.front().loss;

    // single-task lasso seeds W(0) and the task graph
    const auto stll = run_stll(train, validation, c.pipeline.stll_grid_count, c.pipeline.stll_grid_ratio);
    const auto init = initialization_from_fits(stll);
    WeightGraph graph;
    if (uses_grid(c.method)) {
        if (T < 2) throw Error(ErrorKind::DegenerateK, "multi-task methods need at least two tasks");
        graph = build_knn_weights(init.W, std::min<int>(c.pipeline.knn_k, static_cast<int>(T) - 1));
        emit_csv(c, "graph.csv", [&](std::ostream& os) { write_edge_list_csv(os, graph); });
    }

    FitConfig fc = c.pipeline.tune.fit;
    fc.loss = loss;
    fc.lambda1 = c.lambda1;
    fc.lambda2 = c.lambda2;

    MethodOutcome oc;
    oc.method = c.method;
    oc.report.method = to_string(c.method);
    oc.report.seed = c.seed;
    switch (c.method) {
    case Method::stll:
        oc.predictor = predictor_from_fits(stll);
        break;
    case Method::stlr: {
        const double ridge[] = {c.lambda1};
        oc.predictor = predictor_from_fits(run_stlr(train, validation, ridge));
        oc.report.lambda1 = c.lambda1;
        break;
    }
    case Method::mtlnl: {
        auto st = fit_mtlnl(train, graph, c.lambda2, c.pipeline.tune.network);
        oc.predictor = {st.W, st.intercepts};
        oc.report.lambda2 = c.lambda2;
        oc.network = std::move(st);
        oc.graph_used = graph;
        break;
    }
    case Method::mtlcvx: {
        auto st = fit_mtlcvx(train, graph, fc, init);
        oc.clusters = extract_clusters(st, graph);
        oc.predictor = {st.W, st.intercepts};
        oc.model = std::move(st);
        oc.graph_used = graph;
        break;
    }
    case Method::mtlacvx: {
        auto fit = fit_mtlacvx(train, graph, fc, fc, init);
        oc.clusters = extract_clusters(fit.stage2, fit.adaptive_graph);
        oc.predictor = {fit.stage2.W, fit.stage2.intercepts};
        oc.stage1 = std::move(fit.stage1);
        oc.model = std::move(fit.stage2);
        oc.graph_used = std::move(fit.adaptive_graph);
        break;
    }
    }
    if (uses_grid(c.method) && c.method != Method::mtlnl) {
        oc.report.lambda1 = c.lambda1;
        oc.report.lambda2 = c.lambda2;
    }

    const Predictor raw = to_raw_scale(oc.predictor, prep.scaling);
    evaluate_into(oc.report, prep.raw_test, raw, prep.target);
    write_model_outputs(c, "fit", oc, raw, prep.task_ids, "");
    const EvalReport reports[] = {oc.report};
    emit_json(c, "metrics.json", metrics_document(c, "fit", reports, {}));
    emit_csv(c, "metrics.csv", [&](std::ostream& os) { write_report_csv(os, reports, prep.task_ids); });

    print_report(out, oc.report);
    if (oc.model) {
        const int count = oc.clusters.empty() ? 0 : *std::max_element(oc.clusters.begin(), oc.clusters.end()) + 1;
        out << "clusters " << count << "  iterations " << oc.model->iterations
            << (oc.model->converged ? "" : "  (not converged)") << '\n';
    }
    if (oc.network)
        out << "iterations " << oc.network->iterations << (oc.network->converged ? "" : "  (not converged)") << '\n';
    return exit_ok;
}

int cmd_tune(const RunConfig& c, std::ostream& out) {
    const auto prep = prepare(c, true);
    PipelineOptions po = c.pipeline;
    po.seed = derive_seed(c.seed, {0xc5});
    po.tune.jobs = c.jobs;
    if (prep.split.train.front().loss == LossKind::logistic) po.grid.metric = SelectionMetric::deviance;
    const auto result = run_pipeline(prep.split, c.methods, po, EvaluationTarget{});

    if (result.graph) emit_csv(c, "graph.csv", [&](std::ostream& os) { write_edge_list_csv(os, *result.graph); });
    std::vector<EvalReport> reports;
    std::vector<std::pair<std::string, std::string>> failures;
    for (auto oc : result.outcomes) {
        if (!oc.error.empty()) {
            failures.emplace_back(to_string(oc.method), oc.error);
            out << to_string(oc.method) << "  failed: " << oc.error << '\n';
            continue;
        }
        const Predictor raw = to_raw_scale(oc.predictor, prep.scaling);
        try {
            evaluate_into(oc.report, prep.raw_test, raw, prep.target);
        } catch (const std::exception& e) {
            failures.emplace_back(to_string(oc.method), e.what());
            out << to_string(oc.method) << "  failed: " << e.what() << '\n';
            continue;
        }
        write_model_outputs(c, "tune", oc, raw, prep.task_ids, "_" + to_string(oc.method));
        reports.push_back(oc.report);
        print_report(out, oc.report);
    }
    emit_json(c, "metrics.json", metrics_document(c, "tune", reports, failures));
    emit_csv(c, "metrics.csv", [&](std::ostream& os) { write_report_csv(os, reports, prep.task_ids); });
    return failures.empty() ? exit_ok : exit_partial;
}

int cmd_evaluate(const RunConfig& c, std::ostream& out) {
    std::ifstream in(c.model_path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + c.model_path);
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::SchemaMismatch, c.model_path + ": " + e.what());
    }
    const Predictor model = predictor_from_json(doc);
    const auto prep = prepare(c, false);
    if (model.W.rows() != static_cast<Eigen::Index>(prep.raw_test.size()) ||
        model.W.cols() != prep.raw_test.front().X.cols())
        throw Error(ErrorKind::DimensionMismatch, "model shape does not match the data");

    EvalReport report;
    report.method = doc.value("method", std::string("model"));
    report.lambda1 = doc.value("lambda1", 0.0);
    report.lambda2 = doc.value("lambda2", 0.0);
    report.seed = c.seed;
    evaluate_into(report, prep.raw_test, model, prep.target);
    const EvalReport reports[] = {report};
    emit_json(c, "metrics.json", metrics_document(c, "evaluate", reports, {}));
    emit_csv(c, "metrics.csv", [&](std::ostream& os) { write_report_csv(os, reports, prep.task_ids); });
    print_report(out, report);
    return exit_ok;
}

int cmd_benchmark(const RunConfig& c, std::ostream& out) {
    std::vector<BenchmarkCell> cells;
    bool failed = false;
    for (int C : c.benchmark.clusters_or(c.sim)) {
        for (double v : c.benchmark.task_variances_or(c.sim)) {
            for (double phi : c.benchmark.phis_or(c.sim)) {
                MonteCarloConfig mc;
                mc.sim = c.sim;
                mc.sim.clusters = C;
                mc.sim.phi = phi;
                mc.sim.task_variance = v;
                mc.sim.seed = c.seed;
                mc.methods = c.methods;
                mc.reps = c.benchmark.reps;
                mc.pipeline = c.pipeline;
                mc.response = c.sim_response;
                mc.reference = c.reference;
                mc.jobs = c.jobs;
                mc.validate();

                BenchmarkCell cell{C, phi, v, run_monte_carlo(mc)};
                out << "C=" << C << " sigma_v2=" << v << " phi=" << phi << '\n';
                for (const auto& s : cell.result.summary) {
                    char line[256];
                    if (c.sim_response == LossKind::logistic)
                        std::snprintf(line, sizeof(line), "  %-8s auc %.3f (%.3f)", to_string(s.method).c_str(),
                                      s.auc_mean, s.auc_sd);
                    else
                        std::snprintf(line, sizeof(line), "  %-8s nmse %.3f (%.3f)  rmse %.3f (%.3f)",
                                      to_string(s.method).c_str(), s.nmse_mean, s.nmse_sd, s.rmse_mean, s.rmse_sd);
                    out << line;
                    if (s.failures > 0) {
                        out << "  failures " << s.failures;
                        failed = true;
                    }
                    out << '\n';
                }
                cells.push_back(std::move(cell));
            }
        }
    }
    emit_csv(c, "summary.csv", [&](std::ostream& os) { write_benchmark_table_csv(os, cells, c.sim_response); });
    emit_json(c, "summary.json", benchmark_to_json(cells, metadata_for(c, "benchmark")));
    return failed ? exit_partial : exit_ok;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-task regression with convex clustering of task coefficients", "mtlcvx"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, profile, out_dir, data_path, model_path, truth_path, method;
    std::uint64_t seed = 0;
    int jobs = 1, reps = 1;
    double lambda1 = 0.0, lambda2 = 0.0;
    std::vector<std::string> methods;
    bool trace = false;

    auto* o_config = app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    auto* o_profile = app.add_option("--profile", profile, "paper-c10, paper-c5, school-like or landmine-like");
    auto* o_seed = app.add_option("--seed", seed, "master seed");
    auto* o_jobs = app.add_option("--jobs", jobs, "worker threads");
    auto* o_out = app.add_option("--out-dir", out_dir, "output directory");
    auto* o_data = app.add_option("--data", data_path, "task CSV (task_id,y,x1..xp); simulate when absent");
    auto* o_method = app.add_option("--method", method, "fit: stll, stlr, mtlnl, mtlcvx or mtlacvx");
    auto* o_methods = app.add_option("--methods", methods, "tune/benchmark: comma-separated methods")->delimiter(',');
    auto* o_l1 = app.add_option("--lambda1", lambda1, "fit: lambda1 (STLR: ridge strength)");
    auto* o_l2 = app.add_option("--lambda2", lambda2, "fit: lambda2 (MTLNL: lambda)");
    auto* o_reps = app.add_option("--reps", reps, "benchmark: replications per cell");
    auto* o_model = app.add_option("--model", model_path, "evaluate: model JSON");
    auto* o_truth = app.add_option("--truth", truth_path, "evaluate/tune on CSV: ground truth JSON");
    auto* o_trace = app.add_flag("--trace", trace, "write objective trace CSVs");

    app.add_subcommand("simulate", "generate a clustered multi-task dataset");
    app.add_subcommand("fit", "fit one method at fixed lambdas");
    app.add_subcommand("tune", "grid-search methods on the validation split and evaluate on test");
    app.add_subcommand("evaluate", "score a saved model on the test split");
    app.add_subcommand("benchmark", "Monte Carlo table over simulated cells");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_config;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        Json doc;
        if (o_config->count()) {
            std::ifstream in(config_path);
            try {
                doc = Json::parse(in);
            } catch (const nlohmann::json::parse_error& e) {
                throw config_error(config_path + ": " + e.what());
            }
            if (!doc.is_object()) throw config_error(config_path + ": top level must be an object");
        }
        std::string chosen = profile;
        if (!o_profile->count() && doc.contains("profile")) {
            if (!doc["profile"].is_string()) throw config_error("key 'profile' must be a string");
            chosen = doc["profile"].get<std::string>();
        }
        RunConfig cfg = profile_config(chosen);
        if (o_config->count()) apply_config_json(cfg, doc);
        cfg.profile = chosen;

        if (o_seed->count()) cfg.seed = seed;
        if (o_jobs->count()) cfg.jobs = jobs;
        if (o_out->count()) cfg.out_dir = out_dir;
        if (o_data->count()) cfg.data.path = data_path;
        if (o_method->count()) cfg.method = parse_method(method);
        if (o_methods->count()) cfg.methods = parse_methods(methods);
        if (o_l1->count()) cfg.lambda1 = lambda1;
        if (o_l2->count()) cfg.lambda2 = lambda2;
        if (o_reps->count()) cfg.benchmark.reps = reps;
        if (o_model->count()) cfg.model_path = model_path;
        if (o_truth->count()) cfg.truth_path = truth_path;
        if (o_trace->count()) cfg.trace = true;

        cfg.validate(command);
        if (command == "simulate") return cmd_simulate(cfg, out);
        if (command == "fit") return cmd_fit(cfg, out);
        if (command == "tune") return cmd_tune(cfg, out);
        if (command == "evaluate") return cmd_evaluate(cfg, out);
        return cmd_benchmark(cfg, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return e.kind() == ErrorKind::ConfigInvalid ? exit_config : exit_runtime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_runtime;
    }
}

} // namespace mtl::cli
