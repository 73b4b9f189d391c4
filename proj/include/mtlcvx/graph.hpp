#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace mtl {

/// Undirected weighted edge between tasks m < l (0-based).
struct Edge {
    std::size_t m = 0;
    std::size_t l = 0;
    double weight = 0.0;
};

/// Task-relationship graph. Each unordered pair is stored once with m < l;
/// only edges with positive weight are stored.
class WeightGraph {
public:
    WeightGraph() = default;
    /// Validates: endpoints in range, m < l, no duplicates, weight > 0 and finite.
    WeightGraph(std::size_t task_count, std::vector<Edge> edges);

    std::size_t task_count() const { return task_count_; }
    std::size_t edge_count() const { return edges_.size(); }
    std::span<const Edge> edges() const { return edges_; }
    const Edge& edge(std::size_t e) const { return edges_[e]; }

    double total_weight() const;
    double mean_weight() const;
    /// Unweighted degree of each task.
    std::vector<std::size_t> degrees() const;

    /// Same topology, new weights (one per edge, in edge order).
    WeightGraph with_weights(std::span<const double> weights) const;

private:
    std::size_t task_count_ = 0;
    std::vector<Edge> edges_;
};

/// k-nearest-neighbour weights from single-task coefficient rows:
/// weight 1 for a mutual neighbour pair, 0.5 for a one-sided one.
/// Euclidean distance; ties go to the smaller task index.
WeightGraph build_knn_weights(const Eigen::MatrixXd& coefficients, int k);

/// Inverse-distance reweighting of `base` from fitted centroid rows,
/// rescaled so the total weight is preserved. Distances below
/// `min_distance` are clamped before inverting.
WeightGraph adaptive_weights(const Eigen::MatrixXd& centroids, const WeightGraph& base,
                             double min_distance = 1e-8);

/// Sparse edge-task incidence: row e has +1 at edge(e).m, -1 at edge(e).l.
struct Incidence {
    std::size_t task_count = 0;
    std::vector<std::pair<std::size_t, std::size_t>> rows;
    /// diag(A^T A); the unweighted degree of each task.
    Eigen::VectorXd gram_diagonal;

    std::size_t edge_count() const { return rows.size(); }
    double max_degree() const { return gram_diagonal.size() ? gram_diagonal.maxCoeff() : 0.0; }

    /// A * U  (|E| x p)
    Eigen::MatrixXd apply(const Eigen::MatrixXd& U) const;
    /// A^T * S  (T x p)
    Eigen::MatrixXd apply_transpose(const Eigen::MatrixXd& S) const;
    /// Dense |E| x T matrix, for inspection and tests.
    Eigen::MatrixXd dense() const;
};

Incidence build_incidence(const WeightGraph& graph);

/// Edge list CSV `m,l,weight` with 1-based task indices.
void write_edge_list_csv(std::ostream& out, const WeightGraph& graph);

} // namespace mtl
