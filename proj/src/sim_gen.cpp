#include "mtlcvx/sim_gen.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mtlcvx/error.hpp"
#include "mtlcvx/logistic_newton.hpp"
#include "mtlcvx/rng.hpp"

namespace mtl {

void SimConfig::validate() const {
    if (tasks < 1 || features < 1 || clusters < 1)
        throw Error(ErrorKind::ConfigInvalid, "tasks, features and clusters must be positive");
    if (tasks % clusters != 0)
        throw Error(ErrorKind::ConfigInvalid, "tasks (" + std::to_string(tasks) + ") must be divisible by clusters (" +
                                                  std::to_string(clusters) + ")");
    if (clusters > features) throw Error(ErrorKind::ConfigInvalid, "more clusters than features");
    if (n_train < 1 || n_validation < 1 || n_test < 1) throw Error(ErrorKind::ConfigInvalid, "split sizes must be positive");
    if (!(phi >= 0.0 && phi < 1.0)) throw Error(ErrorKind::ConfigInvalid, "phi must lie in [0, 1)");
    if (!(noise_variance > 0.0) || !(centroid_variance > 0.0) || !(task_variance >= 0.0))
        throw Error(ErrorKind::ConfigInvalid, "variances must be positive");
}

SimConfig SimConfig::reference_design(int clusters, double phi, double task_variance, std::uint64_t seed) {
    SimConfig c;
    c.clusters = clusters;
    c.phi = phi;
    c.task_variance = task_variance;
    c.seed = seed;
    return c;
}

Eigen::MatrixXd cholesky_ar1(int p, double phi) {
    if (p < 1 || !(std::abs(phi) < 1.0)) throw Error(ErrorKind::InvalidArgument, "need p >= 1 and |phi| < 1");
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(p, p);
    const double tail = std::sqrt(1.0 - phi * phi);
    for (int i = 0; i < p; ++i) {
        L(i, 0) = std::pow(phi, i);
        for (int j = 1; j <= i; ++j) L(i, j) = std::pow(phi, i - j) * tail;
    }
    return L;
}

SimDataset generate(const SimConfig& config) {
    config.validate();
    const int T = config.tasks;
    const int p = config.features;
    const int C = config.clusters;
    Rng rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    SimDataset out;
    auto& truth = out.truth;

    // variable -> cluster, redrawn until no cluster is left empty
    std::uniform_int_distribution<int> pick(0, C - 1);
    truth.variable_cluster.assign(static_cast<std::size_t>(p), 0);
    while (true) {
        std::vector<int> count(static_cast<std::size_t>(C), 0);
        for (auto& v : truth.variable_cluster) {
            v = pick(rng);
            ++count[static_cast<std::size_t>(v)];
        }
        if (std::find(count.begin(), count.end(), 0) == count.end()) break;
    }

    truth.cluster_of_task.resize(static_cast<std::size_t>(T));
    const int per_cluster = T / C;
    for (int m = 0; m < T; ++m) truth.cluster_of_task[static_cast<std::size_t>(m)] = m / per_cluster;

    const double su = std::sqrt(config.centroid_variance);
    const double sv = std::sqrt(config.task_variance);
    truth.U_star = Eigen::MatrixXd::Zero(C, p);
    for (int c = 0; c < C; ++c)
        for (int j = 0; j < p; ++j)
            if (truth.variable_cluster[static_cast<std::size_t>(j)] == c) truth.U_star(c, j) = su * normal(rng);
    truth.V_star = Eigen::MatrixXd::Zero(T, p);
    truth.W_star.resize(T, p);
    for (int m = 0; m < T; ++m) {
        const int c = truth.cluster_of_task[static_cast<std::size_t>(m)];
        for (int j = 0; j < p; ++j)
            if (truth.variable_cluster[static_cast<std::size_t>(j)] == c) truth.V_star(m, j) = sv * normal(rng);
        truth.W_star.row(m) = truth.U_star.row(c) + truth.V_star.row(m);
    }

    const Eigen::MatrixXd L = cholesky_ar1(p, config.phi);
    const int n = config.rows_per_task();
    const double noise_sd = std::sqrt(config.noise_variance);
    out.tasks.reserve(static_cast<std::size_t>(T));
    Eigen::MatrixXd Zs(n, p);
    for (int m = 0; m < T; ++m) {
        TaskDataset t;
        t.task_id = std::to_string(m + 1);
        t.loss = LossKind::linear;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < p; ++j) Zs(i, j) = normal(rng);
        t.X = Zs * L.transpose();
        t.y = t.X * truth.W_star.row(m).transpose();
        for (int i = 0; i < n; ++i) t.y[i] += noise_sd * normal(rng);
        out.tasks.push_back(std::move(t));
    }
    return out;
}

TaskSplit split_simulated(const SimDataset& data, const SimConfig& config) {
    const auto spec = SplitSpec::counts(static_cast<std::size_t>(config.n_train),
                                        static_cast<std::size_t>(config.n_validation), derive_seed(config.seed, {0x5b1}));
    return split_tasks(data.tasks, spec);
}

std::vector<Eigen::VectorXd> noiseless_responses(std::span<const TaskDataset> tasks, const GroundTruth& truth) {
    if (static_cast<Eigen::Index>(tasks.size()) != truth.W_star.rows())
        throw Error(ErrorKind::DimensionMismatch, "task count != rows of W*");
    std::vector<Eigen::VectorXd> out;
    out.reserve(tasks.size());
    for (std::size_t m = 0; m < tasks.size(); ++m)
        out.push_back(tasks[m].X * truth.W_star.row(static_cast<Eigen::Index>(m)).transpose());
    return out;
}

std::vector<TaskDataset> binarize_responses(std::span<const TaskDataset> tasks, const GroundTruth& truth,
                                            std::uint64_t seed) {
    const auto mean = noiseless_responses(tasks, truth);
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<TaskDataset> out(tasks.begin(), tasks.end());
    for (std::size_t m = 0; m < out.size(); ++m) {
        out[m].loss = LossKind::logistic;
        for (Eigen::Index i = 0; i < out[m].y.size(); ++i) out[m].y[i] = unif(rng) < sigmoid(mean[m][i]) ? 1.0 : 0.0;
    }
    return out;
}

} // namespace mtl
