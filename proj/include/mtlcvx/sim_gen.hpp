#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mtlcvx/task_data.hpp"

namespace mtl {

/// Clustered multi-task linear model with AR(1) Gaussian designs.
struct SimConfig {
    int tasks = 100;
    int features = 100;
    int clusters = 10;
    int n_train = 30;
    int n_validation = 100;
    int n_test = 100;
    double phi = 0.0;                 ///< AR(1) correlation, in [0, 1)
    double noise_variance = 5.0;      ///< sigma^2
    double centroid_variance = 100.0; ///< sigma_u^2
    double task_variance = 1.0;       ///< sigma_v^2 (0 allowed: identical tasks within a cluster)
    std::uint64_t seed = 1;

    int rows_per_task() const { return n_train + n_validation + n_test; }
    void validate() const;

    /// n = 230 split 30/100/100, p = 100, T = 100, sigma^2 = 5, sigma_u^2 = 100.
    static SimConfig reference_design(int clusters, double phi, double task_variance, std::uint64_t seed);
};

struct GroundTruth {
    std::vector<int> cluster_of_task;   ///< length T
    std::vector<int> variable_cluster;  ///< length p
    Eigen::MatrixXd U_star;             ///< C x p
    Eigen::MatrixXd V_star;             ///< T x p
    Eigen::MatrixXd W_star;             ///< T x p, row m = U_star[c(m)] + V_star[m]
};

struct SimDataset {
    std::vector<TaskDataset> tasks;  ///< rows_per_task rows each
    GroundTruth truth;
};

/// Lower-triangular L with L L^T = Sigma, Sigma_ij = phi^|i-j| (closed form).
Eigen::MatrixXd cholesky_ar1(int p, double phi);

/// Deterministic given config.seed.
SimDataset generate(const SimConfig& config);

/// Counts-mode split n_train / n_validation / rest, seeded from config.seed.
TaskSplit split_simulated(const SimDataset& data, const SimConfig& config);

/// X_m w*_m for every task (noiseless reference responses).
std::vector<Eigen::VectorXd> noiseless_responses(std::span<const TaskDataset> tasks, const GroundTruth& truth);

/// Binary responses y ~ Bernoulli(sigmoid(x^T w*_m)) drawn on the same designs.
std::vector<TaskDataset> binarize_responses(std::span<const TaskDataset> tasks, const GroundTruth& truth,
                                            std::uint64_t seed);

} // namespace mtl
