#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mtlcvx/task_data.hpp"

namespace mtl {

enum class NmseReference { noiseless, observed };

/// Linear predictor per task: eta = intercept_m + X w_m.
struct Predictor {
    Eigen::MatrixXd W;
    Eigen::VectorXd intercepts;

    Eigen::VectorXd predict(const TaskDataset& task, std::size_t m) const;
};

/// ||reference - prediction||^2 / Var(reference), sample variance (n-1).
/// Throws ZeroVariance when the reference is constant.
double task_nmse(const Eigen::VectorXd& reference, const Eigen::VectorXd& prediction);

/// Per-task NMSE against explicit reference vectors (one per task).
std::vector<double> nmse_per_task(std::span<const TaskDataset> tasks, const Predictor& model,
                                  std::span<const Eigen::VectorXd> references);

/// Per-task NMSE against the observed responses of `tasks`.
std::vector<double> nmse_per_task(std::span<const TaskDataset> tasks, const Predictor& model);

/// Per-task ||w*_m - w_m||_2.
std::vector<double> coefficient_errors(const Eigen::MatrixXd& W_star, const Eigen::MatrixXd& W_hat);

/// Mean over tasks of ||w*_m - w_m||_2 (a mean of norms).
double rmse_coeff(const Eigen::MatrixXd& W_star, const Eigen::MatrixXd& W_hat);

/// Mann-Whitney AUC; tied scores count one half. Labels are 0/1.
double auc(std::span<const double> labels, std::span<const double> scores);
double auc(const Eigen::VectorXd& labels, const Eigen::VectorXd& scores);

/// Adjusted Rand index between two labelings of the same items.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

double mean(std::span<const double> values);
/// Sample standard deviation (n-1); 0 for fewer than two values.
double sample_sd(std::span<const double> values);

struct EvalReport {
    std::string method;
    std::vector<double> nmse;  ///< per task; empty when not computed
    std::vector<double> rmse;  ///< per-task coefficient error; empty without W*
    std::vector<double> auc;   ///< per task (tasks with one class in the split are skipped)
    double nmse_mean = 0.0;
    double rmse_mean = 0.0;
    double auc_mean = 0.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    std::uint64_t seed = 0;

    void finalize();  ///< recompute the means from the per-task entries
};

} // namespace mtl
