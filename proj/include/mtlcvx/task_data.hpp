#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mtl {

enum class LossKind { linear, logistic };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& text);

/// One regression task: response y (length n) and design X (n x p).
/// Logistic responses are coded 0/1.
struct TaskDataset {
    std::string task_id;
    Eigen::VectorXd y;
    Eigen::MatrixXd X;
    LossKind loss = LossKind::linear;

    std::size_t n() const { return static_cast<std::size_t>(y.size()); }
    std::size_t p() const { return static_cast<std::size_t>(X.cols()); }
};

/// Throws on a task violating the dataset invariants.
void validate_task(const TaskDataset& task);
/// Validates every task and that all share the same feature count.
void validate_tasks(std::span<const TaskDataset> tasks);

/// Column moments used to standardize a task and map fitted
/// coefficients back to the original feature scale.
struct StandardizationInfo {
    LossKind loss = LossKind::linear;
    double y_mean = 0.0;  ///< zero for logistic tasks
    Eigen::VectorXd x_means;
    Eigen::VectorXd x_scales;

    TaskDataset apply(const TaskDataset& task) const;
    TaskDataset invert(const TaskDataset& task) const;

    /// Coefficients fitted on standardized data expressed on the raw scale.
    /// Returns the raw-scale intercept; `w` is rescaled in place.
    double to_original_scale(Eigen::VectorXd& w, double standardized_intercept) const;
};

/// Centers and scales X (sample sd, n-1 denominator); centers y for linear tasks.
std::pair<TaskDataset, StandardizationInfo> standardize(const TaskDataset& task);

struct CsvSchema {
    std::string task_column = "task_id";
    std::string response_column = "y";
    LossKind loss = LossKind::linear;
};

std::vector<TaskDataset> read_tasks_csv(std::istream& in, const CsvSchema& schema);
std::vector<TaskDataset> load_tasks_csv(const std::string& path, const CsvSchema& schema = {});

/// Header `task_id,y,x1,...,xp`; values printed with round-trip precision.
void write_tasks_csv(std::ostream& out, std::span<const TaskDataset> tasks);
void write_tasks_csv(const std::string& path, std::span<const TaskDataset> tasks);

struct SplitSpec {
    enum class Mode { fractions, counts };

    Mode mode = Mode::fractions;
    double train_fraction = 0.5;
    double validation_fraction = 0.2;
    double test_fraction = 0.3;
    /// Counts mode: the test split receives the remaining rows.
    std::size_t train_count = 0;
    std::size_t validation_count = 0;
    std::uint64_t seed = 0;

    static SplitSpec fractions(double train, double validation, double test, std::uint64_t seed);
    static SplitSpec counts(std::size_t train, std::size_t validation, std::uint64_t seed);
    void validate() const;
};

struct TaskSplit {
    std::vector<TaskDataset> train;
    std::vector<TaskDataset> validation;
    std::vector<TaskDataset> test;
};

/// Per-task sizes implied by the spec for a task with n rows.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitSpec& spec);

/// Random disjoint partition per task; row order within each split follows
/// the permutation drawn from (seed, task index).
TaskSplit split_tasks(std::span<const TaskDataset> tasks, const SplitSpec& spec);

/// Keeps every positive and an equal-sized random subset of negatives.
TaskDataset downsample_balanced(const TaskDataset& task, std::uint64_t seed);

/// Row subset helper.
TaskDataset select_rows(const TaskDataset& task, std::span<const std::size_t> rows);

} // namespace mtl
