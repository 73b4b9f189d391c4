#include "mtlcvx/tuning.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <thread>

#include "mtlcvx/error.hpp"
#include "mtlcvx/logistic_newton.hpp"
#include "mtlcvx/rng.hpp"

namespace mtl {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::vector<double> sorted_unique(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

// Strict preference: lower score, then more regularization.
bool better(const GridCell& a, const GridCell& b) {
    if (!a.ok) return false;
    if (!b.ok) return true;
    if (a.score != b.score) return a.score < b.score;
    if (a.lambda2 != b.lambda2) return a.lambda2 > b.lambda2;
    return a.lambda1 > b.lambda1;
}

FitConfig cell_config(const FitConfig& base, double lambda1, double lambda2) {
    FitConfig c = base;
    c.lambda1 = lambda1;
    c.lambda2 = lambda2;
    return c;
}

struct RowOutcome {
    std::vector<GridCell> cells;
    std::optional<ModelState> best_model;
    std::optional<NetworkLassoState> best_network;
    GridCell best;
};

} // namespace

Predictor predictor_from_fits(std::span<const SingleTaskFit> fits) {
    const auto init = initialization_from_fits(fits);
    return {init.W, init.intercepts};
}

std::string to_string(Method method) {
    switch (method) {
    case Method::stll: return "stll";
    case Method::stlr: return "stlr";
    case Method::mtlnl: return "mtlnl";
    case Method::mtlcvx: return "mtlcvx";
    case Method::mtlacvx: return "mtlacvx";
    }
    return "unknown";
}

Method parse_method(const std::string& text) {
    const auto t = lower(text);
    for (auto m : {Method::stll, Method::stlr, Method::mtlnl, Method::mtlcvx, Method::mtlacvx})
        if (t == to_string(m)) return m;
    throw Error(ErrorKind::ConfigInvalid, "unknown method '" + text + "' (expected stll, stlr, mtlnl, mtlcvx, mtlacvx)");
}

bool uses_grid(Method method) {
    return method == Method::mtlnl || method == Method::mtlcvx || method == Method::mtlacvx;
}

std::string to_string(SelectionMetric metric) { return metric == SelectionMetric::nmse ? "nmse" : "deviance"; }

SelectionMetric parse_selection_metric(const std::string& text) {
    const auto t = lower(text);
    if (t == "nmse") return SelectionMetric::nmse;
    if (t == "deviance") return SelectionMetric::deviance;
    throw Error(ErrorKind::ConfigInvalid, "unknown selection metric '" + text + "' (expected nmse or deviance)");
}

std::string to_string(Protocol protocol) { return protocol == Protocol::holdout ? "holdout" : "pooled"; }

Protocol parse_protocol(const std::string& text) {
    const auto t = lower(text);
    if (t == "holdout") return Protocol::holdout;
    if (t == "pooled") return Protocol::pooled;
    throw Error(ErrorKind::ConfigInvalid, "unknown protocol '" + text + "' (expected holdout or pooled)");
}

std::vector<double> log_space(double lo, double hi, int count) {
    if (!(lo > 0.0) || !(hi >= lo) || count < 1) throw Error(ErrorKind::InvalidArgument, "log_space needs 0 < lo <= hi and count >= 1");
    std::vector<double> out(static_cast<std::size_t>(count));
    const double a = std::log10(lo);
    const double b = std::log10(hi);
    for (int i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
        out[static_cast<std::size_t>(i)] = std::pow(10.0, a + t * (b - a));
    }
    out.front() = lo;
    if (count > 1) out.back() = hi;
    return out;
}

GridSpec GridSpec::defaults(LossKind loss) {
    GridSpec g;
    g.lambda1 = log_space(1e-2, 1e2, 10);
    g.lambda2 = log_space(1e-3, 1e1, 10);
    g.ridge = log_space(1e-4, 1e2, 20);
    g.metric = loss == LossKind::logistic ? SelectionMetric::deviance : SelectionMetric::nmse;
    return g;
}

void GridSpec::validate() const {
    auto check = [](const std::vector<double>& v, const char* name) {
        if (v.empty()) throw Error(ErrorKind::ConfigInvalid, std::string("grid '") + name + "' is empty");
        for (double x : v)
            if (!(x > 0.0) || !std::isfinite(x))
                throw Error(ErrorKind::ConfigInvalid, std::string("grid '") + name + "' has a non-positive entry");
    };
    check(lambda1, "lambda1");
    check(lambda2, "lambda2");
    check(ridge, "ridge");
}

GridSpec GridSpec::normalized() const {
    GridSpec g = *this;
    g.lambda1 = sorted_unique(lambda1);
    g.lambda2 = sorted_unique(lambda2);
    g.ridge = sorted_unique(ridge);
    return g;
}

double selection_score(std::span<const TaskDataset> validation, const Predictor& model, SelectionMetric metric) {
    if (metric == SelectionMetric::nmse) return mean(nmse_per_task(validation, model));
    std::vector<double> dev;
    dev.reserve(validation.size());
    for (std::size_t m = 0; m < validation.size(); ++m) {
        const auto& t = validation[m];
        if (t.loss != LossKind::logistic) throw Error(ErrorKind::InvalidArgument, "deviance needs logistic tasks");
        const Eigen::VectorXd eta = model.predict(t, m);
        double s = 0.0;
        for (Eigen::Index i = 0; i < eta.size(); ++i) s += softplus(eta[i]) - t.y[i] * eta[i];
        dev.push_back(2.0 * s / static_cast<double>(t.n()));
    }
    return mean(dev);
}

Predictor GridResult::predictor() const {
    if (model) return {model->W, model->intercepts};
    if (network) return {network->W, network->intercepts};
    throw Error(ErrorKind::InvalidArgument, "grid result holds no model");
}

GridResult grid_search(std::span<const TaskDataset> train, std::span<const TaskDataset> validation,
                       const WeightGraph& graph, const GridSpec& grid_in, Method method, const Initialization& init,
                       const TuneOptions& options, const ModelState* stage1) {
    if (!uses_grid(method)) throw Error(ErrorKind::InvalidArgument, to_string(method) + " has no lambda grid");
    grid_in.validate();
    const GridSpec grid = grid_in.normalized();
    if (train.size() != validation.size()) throw Error(ErrorKind::DimensionMismatch, "train/validation task counts differ");

    GridResult result;
    result.method = method;

    const WeightGraph* g = &graph;
    Initialization start = init;
    if (method == Method::mtlacvx) {
        if (!stage1) throw Error(ErrorKind::InvalidArgument, "mtlacvx grid search needs the stage-1 fit");
        result.stage1 = *stage1;
        result.graph_used = adaptive_weights(stage1->U, graph);
        g = &*result.graph_used;
        start = stage1->as_initialization();
    }
    const double scale = grid.scale_by_mean_weight && g->edge_count() > 0 ? 1.0 / g->mean_weight() : 1.0;
    const std::vector<double> lambda1s = method == Method::mtlnl ? std::vector<double>{0.0} : grid.lambda1;

    std::vector<RowOutcome> rows(lambda1s.size());
    auto run_row = [&](std::size_t r) {
        RowOutcome& row = rows[r];
        std::optional<ModelState> prev;
        std::optional<NetworkLassoState> prev_net;
        for (double raw : grid.lambda2) {
            GridCell cell;
            cell.lambda1 = lambda1s[r];
            cell.lambda2 = raw * scale;
            try {
                if (method == Method::mtlnl) {
                    auto st = fit_mtlnl(train, *g, cell.lambda2, options.network, prev_net ? &*prev_net : nullptr);
                    cell.score = selection_score(validation, Predictor{st.W, st.intercepts}, grid.metric);
                    cell.converged = st.converged;
                    cell.iterations = st.iterations;
                    cell.ok = std::isfinite(cell.score);
                    if (cell.ok && better(cell, row.best)) {
                        row.best = cell;
                        row.best_network = st;
                    }
                    prev_net = std::move(st);
                } else {
                    const auto cfg = cell_config(options.fit, cell.lambda1, cell.lambda2);
                    auto st = fit_mtlcvx(train, *g, cfg, prev ? prev->as_initialization() : start);
                    cell.score = selection_score(validation, Predictor{st.W, st.intercepts}, grid.metric);
                    cell.converged = st.converged;
                    cell.iterations = st.iterations;
                    cell.ok = std::isfinite(cell.score);
                    if (cell.ok && better(cell, row.best)) {
                        row.best = cell;
                        row.best_model = st;
                    }
                    prev = std::move(st);
                }
                if (!cell.ok) cell.error = "non-finite validation score";
            } catch (const std::exception& e) {
                cell.ok = false;
                cell.error = e.what();
            }
            row.cells.push_back(cell);
        }
    };
    parallel_for(rows.size(), options.jobs, run_row);

    std::size_t best_row = rows.size();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (!rows[r].best.ok) continue;
        if (best_row == rows.size() || better(rows[r].best, rows[best_row].best)) best_row = r;
    }
    for (auto& row : rows)
        for (auto& c : row.cells) result.table.push_back(c);
    if (best_row == rows.size()) throw Error(ErrorKind::ConfigInvalid, "every grid cell failed for " + to_string(method));

    const auto& best = rows[best_row].best;
    for (std::size_t i = 0; i < result.table.size(); ++i) {
        const auto& c = result.table[i];
        if (c.ok && c.lambda1 == best.lambda1 && c.lambda2 == best.lambda2) {
            result.best = i;
            break;
        }
    }
    result.lambda1 = best.lambda1;
    result.lambda2 = best.lambda2;
    result.best_score = best.score;
    result.model = std::move(rows[best_row].best_model);
    result.network = std::move(rows[best_row].best_network);
    return result;
}

std::vector<TaskDataset> pool_tasks(std::span<const TaskDataset> a, std::span<const TaskDataset> b) {
    if (a.size() != b.size()) throw Error(ErrorKind::DimensionMismatch, "cannot pool splits with different task counts");
    std::vector<TaskDataset> out;
    out.reserve(a.size());
    for (std::size_t m = 0; m < a.size(); ++m) {
        if (a[m].p() != b[m].p()) throw Error(ErrorKind::DimensionMismatch, "cannot pool tasks of different width");
        TaskDataset t = a[m];
        t.X.resize(a[m].X.rows() + b[m].X.rows(), a[m].X.cols());
        t.X << a[m].X, b[m].X;
        t.y.resize(a[m].y.size() + b[m].y.size());
        t.y << a[m].y, b[m].y;
        out.push_back(std::move(t));
    }
    return out;
}

void evaluate_into(EvalReport& report, std::span<const TaskDataset> test, const Predictor& model,
                   const EvaluationTarget& target) {
    report.nmse.clear();
    report.rmse.clear();
    report.auc.clear();
    const bool logistic = !test.empty() && test.front().loss == LossKind::logistic;
    if (logistic) {
        for (std::size_t m = 0; m < test.size(); ++m) {
            const auto& t = test[m];
            const double positives = t.y.sum();
            if (positives == 0.0 || positives == static_cast<double>(t.n())) continue;
            report.auc.push_back(auc(t.y, model.predict(t, m)));
        }
    } else if (!target.references.empty()) {
        report.nmse = nmse_per_task(test, model, target.references);
    } else {
        report.nmse = nmse_per_task(test, model);
    }
    if (target.W_star) report.rmse = coefficient_errors(*target.W_star, model.W);
    report.finalize();
}

PipelineResult run_pipeline(const TaskSplit& split, std::span<const Method> methods, const PipelineOptions& options,
                            const EvaluationTarget& target) {
    if (methods.empty()) throw Error(ErrorKind::ConfigInvalid, "no methods requested");
    validate_tasks(split.train);
    if (split.validation.size() != split.train.size() || split.test.size() != split.train.size())
        throw Error(ErrorKind::DimensionMismatch, "splits disagree on the task count");
    const auto T = split.train.size();
    const auto loss = split.train.front().loss;
    const bool pooled_protocol = options.protocol == Protocol::pooled;
    const auto pooled = pooled_protocol ? pool_tasks(split.train, split.validation) : std::vector<TaskDataset>{};
    const std::span<const TaskDataset> final_tasks = pooled_protocol ? std::span<const TaskDataset>(pooled)
                                                                     : std::span<const TaskDataset>(split.train);

    PipelineResult out;
    if (pooled_protocol) {
        out.single_task.reserve(T);
        for (std::size_t m = 0; m < T; ++m) {
            const auto grid = lasso_lambda_grid(pooled[m], options.stll_grid_count, options.stll_grid_ratio);
            out.single_task.push_back(fit_lasso_cv(pooled[m], grid, options.cv_folds, derive_seed(options.seed, {m}), options.cv_lasso));
        }
    } else {
        out.single_task = run_stll(split.train, split.validation, options.stll_grid_count, options.stll_grid_ratio);
    }
    // the graph uses the reported single-task fits; grid fits start from
    // train-only fits so that validation rows never enter a scored model
    const auto init = pooled_protocol
        ? initialization_from_fits(run_stll(split.train, split.validation, options.stll_grid_count, options.stll_grid_ratio))
        : initialization_from_fits(out.single_task);

    const bool need_graph = std::any_of(methods.begin(), methods.end(), uses_grid);
    if (need_graph) {
        if (T < 2) throw Error(ErrorKind::DegenerateK, "multi-task methods need at least two tasks");
        const int k = std::min<int>(options.knn_k, static_cast<int>(T) - 1);
        out.graph = build_knn_weights(initialization_from_fits(out.single_task).W, k);
    }

    TuneOptions tune = options.tune;
    tune.fit.loss = loss;
    std::optional<GridResult> cvx_grid;
    auto selected_cvx = [&]() -> const GridResult& {
        if (!cvx_grid)
            cvx_grid = grid_search(split.train, split.validation, *out.graph, options.grid, Method::mtlcvx, init, tune);
        return *cvx_grid;
    };

    for (auto method : methods) {
        MethodOutcome oc;
        oc.method = method;
        oc.report.method = to_string(method);
        oc.report.seed = options.seed;
        const auto started = std::chrono::steady_clock::now();
        try {
            switch (method) {
            case Method::stll:
                oc.predictor = predictor_from_fits(out.single_task);
                break;
            case Method::stlr: {
                auto fits = run_stlr(split.train, split.validation, options.grid.normalized().ridge);
                if (pooled_protocol) {
                    for (std::size_t m = 0; m < T; ++m) {
                        const double lam = fits[m].lambda;
                        fits[m] = loss == LossKind::logistic ? fit_logistic_ridge(pooled[m], lam) : fit_ridge(pooled[m], lam);
                        fits[m].lambda = lam;
                    }
                }
                oc.predictor = predictor_from_fits(fits);
                break;
            }
            case Method::mtlnl: {
                auto gr = grid_search(split.train, split.validation, *out.graph, options.grid, method, init, tune);
                NetworkLassoState final_state = pooled_protocol
                    ? fit_mtlnl(final_tasks, *out.graph, gr.lambda2, tune.network, &*gr.network)
                    : *gr.network;
                oc.predictor = {final_state.W, final_state.intercepts};
                oc.report.lambda2 = gr.lambda2;
                oc.network = std::move(final_state);
                oc.grid = std::move(gr);
                oc.graph_used = *out.graph;
                break;
            }
            case Method::mtlcvx: {
                const auto& gr = selected_cvx();
                ModelState final_state = pooled_protocol
                    ? fit_mtlcvx(final_tasks, *out.graph, cell_config(tune.fit, gr.lambda1, gr.lambda2),
                                 gr.model->as_initialization())
                    : *gr.model;
                oc.clusters = extract_clusters(final_state, *out.graph);
                oc.predictor = {final_state.W, final_state.intercepts};
                oc.report.lambda1 = gr.lambda1;
                oc.report.lambda2 = gr.lambda2;
                oc.model = std::move(final_state);
                oc.grid = gr;
                oc.graph_used = *out.graph;
                break;
            }
            case Method::mtlacvx: {
                const auto& cvx = selected_cvx();
                auto gr = grid_search(split.train, split.validation, *out.graph, options.grid, method, init, tune,
                                      &*cvx.model);
                if (pooled_protocol) {
                    auto fit = fit_mtlacvx(final_tasks, *out.graph, cell_config(tune.fit, cvx.lambda1, cvx.lambda2),
                                           cell_config(tune.fit, gr.lambda1, gr.lambda2), cvx.model->as_initialization());
                    oc.stage1 = std::move(fit.stage1);
                    oc.model = std::move(fit.stage2);
                    oc.graph_used = std::move(fit.adaptive_graph);
                } else {
                    oc.stage1 = *cvx.model;
                    oc.model = *gr.model;
                    oc.graph_used = *gr.graph_used;
                }
                oc.clusters = extract_clusters(*oc.model, *oc.graph_used);
                oc.predictor = {oc.model->W, oc.model->intercepts};
                oc.report.lambda1 = gr.lambda1;
                oc.report.lambda2 = gr.lambda2;
                oc.grid = std::move(gr);
                break;
            }
            }
            evaluate_into(oc.report, split.test, oc.predictor, target);
        } catch (const std::exception& e) {
            oc.error = e.what();
        }
        oc.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        out.outcomes.push_back(std::move(oc));
    }
    return out;
}

void MonteCarloConfig::validate() const {
    sim.validate();
    if (methods.empty()) throw Error(ErrorKind::ConfigInvalid, "method list is empty");
    if (reps < 1) throw Error(ErrorKind::ConfigInvalid, "reps must be >= 1");
    if (jobs < 1) throw Error(ErrorKind::ConfigInvalid, "jobs must be >= 1");
    pipeline.grid.validate();
}

std::uint64_t rep_seed(std::uint64_t master, int rep) {
    return derive_seed(master, {static_cast<std::uint64_t>(rep)});
}

RepResult run_replication(const MonteCarloConfig& config, int rep) {
    RepResult out;
    out.rep = rep;
    out.seed = rep_seed(config.sim.seed, rep);
    try {
        SimConfig sc = config.sim;
        sc.seed = out.seed;
        auto data = generate(sc);
        if (config.response == LossKind::logistic)
            data.tasks = binarize_responses(data.tasks, data.truth, derive_seed(out.seed, {0xb1}));
        const auto split = split_simulated(data, sc);

        EvaluationTarget target;
        target.W_star = data.truth.W_star;
        if (config.response == LossKind::linear && config.reference == NmseReference::noiseless)
            target.references = noiseless_responses(split.test, data.truth);

        PipelineOptions po = config.pipeline;
        po.seed = derive_seed(out.seed, {0xc5});
        po.tune.jobs = 1;
        if (config.response == LossKind::logistic) po.grid.metric = SelectionMetric::deviance;
        const auto result = run_pipeline(split, config.methods, po, target);
        for (const auto& oc : result.outcomes) {
            if (oc.error.empty()) {
                out.reports.push_back(oc.report);
                out.reports.back().seed = out.seed;
            } else {
                out.failures.emplace_back(oc.method, oc.error);
            }
        }
    } catch (const std::exception& e) {
        out.reports.clear();
        out.failures.clear();
        for (auto m : config.methods) out.failures.emplace_back(m, e.what());
    }
    return out;
}

std::vector<MethodSummary> summarize(std::span<const RepResult> reps, std::span<const Method> methods) {
    std::vector<MethodSummary> out;
    for (auto method : methods) {
        MethodSummary s;
        s.method = method;
        std::vector<double> nmse, rmse, auc_values;
        for (const auto& r : reps) {
            for (const auto& rep : r.reports) {
                if (rep.method != to_string(method)) continue;
                ++s.successes;
                if (!rep.nmse.empty()) nmse.push_back(rep.nmse_mean);
                if (!rep.rmse.empty()) rmse.push_back(rep.rmse_mean);
                if (!rep.auc.empty()) auc_values.push_back(rep.auc_mean);
            }
            for (const auto& f : r.failures)
                if (f.first == method) ++s.failures;
        }
        s.nmse_mean = mean(nmse);
        s.nmse_sd = sample_sd(nmse);
        s.rmse_mean = mean(rmse);
        s.rmse_sd = sample_sd(rmse);
        s.auc_mean = mean(auc_values);
        s.auc_sd = sample_sd(auc_values);
        out.push_back(s);
    }
    return out;
}

MonteCarloResult run_monte_carlo(const MonteCarloConfig& config) {
    config.validate();
    MonteCarloResult out;
    out.reps.resize(static_cast<std::size_t>(config.reps));
    parallel_for(out.reps.size(), config.jobs,
                 [&](std::size_t r) { out.reps[r] = run_replication(config, static_cast<int>(r)); });
    out.summary = summarize(out.reps, config.methods);
    return out;
}

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
    if (count == 0) return;
    const auto workers = static_cast<std::size_t>(std::clamp<long long>(jobs, 1, static_cast<long long>(count)));
    std::vector<std::exception_ptr> errors(count);
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace mtl
