#include "mtlcvx/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "mtlcvx/error.hpp"

namespace mtl {

Eigen::VectorXd Predictor::predict(const TaskDataset& task, std::size_t m) const {
    const auto mi = static_cast<Eigen::Index>(m);
    if (mi >= W.rows() || task.X.cols() != W.cols())
        throw Error(ErrorKind::DimensionMismatch, "predictor does not match task " + task.task_id);
    const double b = intercepts.size() > mi ? intercepts[mi] : 0.0;
    return (task.X * W.row(mi).transpose()).array() + b;
}

double task_nmse(const Eigen::VectorXd& reference, const Eigen::VectorXd& prediction) {
    if (reference.size() != prediction.size() || reference.size() < 2)
        throw Error(ErrorKind::DimensionMismatch, "NMSE needs matching vectors of length >= 2");
    const double var = (reference.array() - reference.mean()).square().sum() / static_cast<double>(reference.size() - 1);
    if (!(var > 0.0)) throw Error(ErrorKind::ZeroVariance, "reference response is constant");
    return (reference - prediction).squaredNorm() / var;
}

std::vector<double> nmse_per_task(std::span<const TaskDataset> tasks, const Predictor& model,
                                  std::span<const Eigen::VectorXd> references) {
    if (references.size() != tasks.size()) throw Error(ErrorKind::DimensionMismatch, "one reference per task required");
    std::vector<double> out;
    out.reserve(tasks.size());
    for (std::size_t m = 0; m < tasks.size(); ++m) {
        try {
            out.push_back(task_nmse(references[m], model.predict(tasks[m], m)));
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::ZeroVariance) throw Error(ErrorKind::ZeroVariance, "task " + tasks[m].task_id);
            throw;
        }
    }
    return out;
}

std::vector<double> nmse_per_task(std::span<const TaskDataset> tasks, const Predictor& model) {
    std::vector<Eigen::VectorXd> refs;
    refs.reserve(tasks.size());
    for (const auto& t : tasks) refs.push_back(t.y);
    return nmse_per_task(tasks, model, refs);
}

std::vector<double> coefficient_errors(const Eigen::MatrixXd& W_star, const Eigen::MatrixXd& W_hat) {
    if (W_star.rows() != W_hat.rows() || W_star.cols() != W_hat.cols())
        throw Error(ErrorKind::DimensionMismatch, "W* and W_hat shapes differ");
    std::vector<double> out(static_cast<std::size_t>(W_star.rows()));
    for (Eigen::Index m = 0; m < W_star.rows(); ++m) out[static_cast<std::size_t>(m)] = (W_star.row(m) - W_hat.row(m)).norm();
    return out;
}

double rmse_coeff(const Eigen::MatrixXd& W_star, const Eigen::MatrixXd& W_hat) {
    const auto errs = coefficient_errors(W_star, W_hat);
    return mean(errs);
}

double auc(std::span<const double> labels, std::span<const double> scores) {
    if (labels.size() != scores.size()) throw Error(ErrorKind::DimensionMismatch, "labels and scores differ in length");
    const std::size_t n = labels.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double positive_rank_sum = 0.0;
    double positives = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1.0) {
                positive_rank_sum += mid_rank;
                positives += 1.0;
            }
        }
        i = j;
    }
    const double negatives = static_cast<double>(n) - positives;
    if (positives == 0.0 || negatives == 0.0) throw Error(ErrorKind::SingleClass, "AUC needs both classes");
    return (positive_rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

double auc(const Eigen::VectorXd& labels, const Eigen::VectorXd& scores) {
    return auc(std::span<const double>(labels.data(), static_cast<std::size_t>(labels.size())),
               std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())));
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw Error(ErrorKind::DimensionMismatch, "labelings differ in length");
    auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> rows;
    std::map<int, double> cols;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1.0;
        rows[a[i]] += 1.0;
        cols[b[i]] += 1.0;
    }
    double index = 0.0;
    for (const auto& [_, c] : joint) index += choose2(c);
    double sum_a = 0.0;
    double sum_b = 0.0;
    for (const auto& [_, c] : rows) sum_a += choose2(c);
    for (const auto& [_, c] : cols) sum_b += choose2(c);
    const double total = choose2(static_cast<double>(a.size()));
    if (total == 0.0) return 1.0;
    const double expected = sum_a * sum_b / total;
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0;  // both labelings trivial and identical in structure
    return (index - expected) / (max_index - expected);
}

double mean(std::span<const double> values) {
    if (values.empty()) return 0.0;
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_sd(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    const double mu = mean(values);
    double ss = 0.0;
    for (double v : values) ss += (v - mu) * (v - mu);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

void EvalReport::finalize() {
    nmse_mean = mean(nmse);
    rmse_mean = mean(rmse);
    auc_mean = mean(auc);
}

} // namespace mtl
