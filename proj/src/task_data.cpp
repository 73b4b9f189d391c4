#include "mtlcvx/task_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "mtlcvx/error.hpp"
#include "mtlcvx/rng.hpp"
#include "mtlcvx/text.hpp"

namespace mtl {

std::string to_string(LossKind kind) {
    return kind == LossKind::linear ? "linear" : "logistic";
}

LossKind parse_loss_kind(const std::string& text) {
    if (text == "linear") return LossKind::linear;
    if (text == "logistic") return LossKind::logistic;
    throw Error(ErrorKind::ConfigInvalid, "unknown loss kind '" + text + "'");
}

void validate_task(const TaskDataset& task) {
    if (task.n() == 0)
        throw Error(ErrorKind::TooFewSamples, "task " + task.task_id + " has no rows");
    if (static_cast<std::size_t>(task.X.rows()) != task.n())
        throw Error(ErrorKind::DimensionMismatch, "task " + task.task_id + ": X rows != length of y");
    if (!task.X.allFinite() || !task.y.allFinite())
        throw Error(ErrorKind::InvalidArgument, "task " + task.task_id + " contains non-finite values");
    if (task.loss == LossKind::logistic) {
        for (Eigen::Index i = 0; i < task.y.size(); ++i) {
            if (task.y[i] != 0.0 && task.y[i] != 1.0)
                throw Error(ErrorKind::InvalidArgument,
                            "task " + task.task_id + ": logistic response must be 0 or 1");
        }
    }
}

void validate_tasks(std::span<const TaskDataset> tasks) {
    if (tasks.empty()) throw Error(ErrorKind::InvalidArgument, "no tasks supplied");
    const auto p = tasks.front().p();
    for (const auto& t : tasks) {
        validate_task(t);
        if (t.p() != p)
            throw Error(ErrorKind::DimensionMismatch,
                        "task " + t.task_id + " has " + std::to_string(t.p()) + " features, expected " +
                            std::to_string(p));
    }
}

TaskDataset StandardizationInfo::apply(const TaskDataset& task) const {
    if (static_cast<Eigen::Index>(task.p()) != x_means.size())
        throw Error(ErrorKind::DimensionMismatch, "standardization width differs from task width");
    TaskDataset out = task;
    out.X = ((task.X.rowwise() - x_means.transpose()).array().rowwise() / x_scales.transpose().array()).matrix();
    if (loss == LossKind::linear) out.y = task.y.array() - y_mean;
    return out;
}

TaskDataset StandardizationInfo::invert(const TaskDataset& task) const {
    TaskDataset out = task;
    out.X = ((task.X.array().rowwise() * x_scales.transpose().array()).matrix()).rowwise() + x_means.transpose();
    if (loss == LossKind::linear) out.y = task.y.array() + y_mean;
    return out;
}

double StandardizationInfo::to_original_scale(Eigen::VectorXd& w, double standardized_intercept) const {
    w = w.cwiseQuotient(x_scales);
    const double base = loss == LossKind::linear ? y_mean + standardized_intercept : standardized_intercept;
    return base - x_means.dot(w);
}

std::pair<TaskDataset, StandardizationInfo> standardize(const TaskDataset& task) {
    validate_task(task);
    const auto n = static_cast<double>(task.n());
    StandardizationInfo info;
    info.loss = task.loss;
    info.x_means = task.X.colwise().mean().transpose();
    info.x_scales.resize(task.X.cols());
    for (Eigen::Index j = 0; j < task.X.cols(); ++j) {
        const double var =
            task.n() > 1 ? (task.X.col(j).array() - info.x_means[j]).square().sum() / (n - 1.0) : 0.0;
        // relative threshold: a column equal to a constant up to rounding counts as constant
        const double scale_ref = std::max(1.0, std::abs(info.x_means[j]));
        if (!(var > 1e-24 * scale_ref * scale_ref))
            throw Error(ErrorKind::ConstantColumn,
                        "task " + task.task_id + ", column " + std::to_string(j) + " has zero variance");
        info.x_scales[j] = std::sqrt(var);
    }
    if (task.loss == LossKind::linear) info.y_mean = task.y.mean();
    return {info.apply(task), std::move(info)};
}

std::vector<TaskDataset> read_tasks_csv(std::istream& in, const CsvSchema& schema) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::SchemaMismatch, "empty CSV (no header)");
    const auto header = split_csv_line(line);
    auto find_column = [&](const std::string& name) -> std::size_t {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw Error(ErrorKind::SchemaMismatch, "missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t task_col = find_column(schema.task_column);
    const std::size_t y_col = find_column(schema.response_column);
    std::vector<std::size_t> feature_cols;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (c != task_col && c != y_col) feature_cols.push_back(c);
    if (feature_cols.empty()) throw Error(ErrorKind::SchemaMismatch, "no feature columns");

    struct Rows {
        std::vector<double> y;
        std::vector<double> x;
    };
    std::vector<std::string> order;
    std::unordered_map<std::string, Rows> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw Error(ErrorKind::SchemaMismatch, "row " + std::to_string(line_no) + " has " +
                                                       std::to_string(cells.size()) + " cells, header has " +
                                                       std::to_string(header.size()));
        auto parse = [&](std::size_t c) {
            double v = 0.0;
            if (!parse_double(cells[c], v))
                throw Error(ErrorKind::NonNumericCell, "row " + std::to_string(line_no) + ", column '" +
                                                           header[c] + "': '" + cells[c] + "'");
            return v;
        };
        const std::string& id = cells[task_col];
        auto [it, inserted] = rows.try_emplace(id);
        if (inserted) order.push_back(id);
        it->second.y.push_back(parse(y_col));
        for (auto c : feature_cols) it->second.x.push_back(parse(c));
    }

    std::vector<TaskDataset> tasks;
    tasks.reserve(order.size());
    const auto p = static_cast<Eigen::Index>(feature_cols.size());
    for (const auto& id : order) {
        const auto& r = rows.at(id);
        TaskDataset t;
        t.task_id = id;
        t.loss = schema.loss;
        const auto n = static_cast<Eigen::Index>(r.y.size());
        t.y = Eigen::Map<const Eigen::VectorXd>(r.y.data(), n);
        t.X = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(r.x.data(), n, p);
        tasks.push_back(std::move(t));
    }
    validate_tasks(tasks);
    return tasks;
}

std::vector<TaskDataset> load_tasks_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
    return read_tasks_csv(in, schema);
}

void write_tasks_csv(std::ostream& out, std::span<const TaskDataset> tasks) {
    validate_tasks(tasks);
    const auto p = tasks.front().p();
    out << "task_id,y";
    for (std::size_t j = 1; j <= p; ++j) out << ",x" << j;
    out << '\n';
    for (const auto& t : tasks) {
        for (Eigen::Index i = 0; i < t.y.size(); ++i) {
            out << t.task_id << ',' << format_double(t.y[i]);
            for (Eigen::Index j = 0; j < t.X.cols(); ++j) out << ',' << format_double(t.X(i, j));
            out << '\n';
        }
    }
}

void write_tasks_csv(const std::string& path, std::span<const TaskDataset> tasks) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
    write_tasks_csv(out, tasks);
}

SplitSpec SplitSpec::fractions(double train, double validation, double test, std::uint64_t seed) {
    SplitSpec s;
    s.mode = Mode::fractions;
    s.train_fraction = train;
    s.validation_fraction = validation;
    s.test_fraction = test;
    s.seed = seed;
    s.validate();
    return s;
}

SplitSpec SplitSpec::counts(std::size_t train, std::size_t validation, std::uint64_t seed) {
    SplitSpec s;
    s.mode = Mode::counts;
    s.train_count = train;
    s.validation_count = validation;
    s.seed = seed;
    s.validate();
    return s;
}

void SplitSpec::validate() const {
    if (mode == Mode::fractions) {
        for (double f : {train_fraction, validation_fraction, test_fraction})
            if (!(f > 0.0 && f < 1.0))
                throw Error(ErrorKind::ConfigInvalid, "split fractions must lie in (0,1)");
        if (std::abs(train_fraction + validation_fraction + test_fraction - 1.0) > 1e-9)
            throw Error(ErrorKind::ConfigInvalid, "split fractions must sum to 1");
    } else if (train_count == 0 || validation_count == 0) {
        throw Error(ErrorKind::ConfigInvalid, "split counts must be positive");
    }
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitSpec& spec) {
    std::size_t train = 0;
    std::size_t val = 0;
    if (spec.mode == SplitSpec::Mode::fractions) {
        const auto nd = static_cast<double>(n);
        train = static_cast<std::size_t>(std::llround(nd * spec.train_fraction));
        val = static_cast<std::size_t>(std::llround(nd * spec.validation_fraction));
    } else {
        train = spec.train_count;
        val = spec.validation_count;
    }
    if (train == 0 || val == 0 || train + val >= n) return {0, 0, 0};
    return {train, val, n - train - val};
}

TaskDataset select_rows(const TaskDataset& task, std::span<const std::size_t> rows) {
    TaskDataset out;
    out.task_id = task.task_id;
    out.loss = task.loss;
    out.y.resize(static_cast<Eigen::Index>(rows.size()));
    out.X.resize(static_cast<Eigen::Index>(rows.size()), task.X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(rows[i]);
        out.y[static_cast<Eigen::Index>(i)] = task.y[r];
        out.X.row(static_cast<Eigen::Index>(i)) = task.X.row(r);
    }
    return out;
}

TaskSplit split_tasks(std::span<const TaskDataset> tasks, const SplitSpec& spec) {
    spec.validate();
    validate_tasks(tasks);
    TaskSplit out;
    for (std::size_t m = 0; m < tasks.size(); ++m) {
        const auto& t = tasks[m];
        const auto sizes = split_sizes(t.n(), spec);
        if (sizes[0] == 0) throw Error(ErrorKind::TooFewSamples, "task " + t.task_id + " cannot be split");
        std::vector<std::size_t> perm(t.n());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        Rng rng(derive_seed(spec.seed, {m}));
        std::shuffle(perm.begin(), perm.end(), rng);
        const std::span<const std::size_t> all(perm);
        out.train.push_back(select_rows(t, all.subspan(0, sizes[0])));
        out.validation.push_back(select_rows(t, all.subspan(sizes[0], sizes[1])));
        out.test.push_back(select_rows(t, all.subspan(sizes[0] + sizes[1], sizes[2])));
    }
    return out;
}

TaskDataset downsample_balanced(const TaskDataset& task, std::uint64_t seed) {
    if (task.loss != LossKind::logistic)
        throw Error(ErrorKind::InvalidArgument, "down-sampling requires a logistic task");
    validate_task(task);
    std::vector<std::size_t> pos;
    std::vector<std::size_t> neg;
    for (Eigen::Index i = 0; i < task.y.size(); ++i)
        (task.y[i] == 1.0 ? pos : neg).push_back(static_cast<std::size_t>(i));
    if (pos.empty() || neg.empty()) throw Error(ErrorKind::SingleClass, "task " + task.task_id);

    // Reduce the majority class. Negatives are the usual majority; if
    // positives outnumber negatives the roles swap so every negative is kept.
    auto& majority = neg.size() >= pos.size() ? neg : pos;
    const auto keep = std::min(pos.size(), neg.size());
    Rng rng(seed);
    std::shuffle(majority.begin(), majority.end(), rng);
    majority.resize(keep);
    std::sort(majority.begin(), majority.end());

    std::vector<std::size_t> rows;
    rows.reserve(2 * keep);
    std::merge(pos.begin(), pos.end(), neg.begin(), neg.end(), std::back_inserter(rows));
    return select_rows(task, rows);
}

} // namespace mtl
