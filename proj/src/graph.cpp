#include "mtlcvx/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>

#include "mtlcvx/error.hpp"
#include "mtlcvx/text.hpp"

namespace mtl {

WeightGraph::WeightGraph(std::size_t task_count, std::vector<Edge> edges)
    : task_count_(task_count), edges_(std::move(edges)) {
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& e : edges_) {
        if (e.m >= e.l || e.l >= task_count_)
            throw Error(ErrorKind::InvalidArgument, "edge endpoints must satisfy m < l < T");
        if (!(e.weight > 0.0) || !std::isfinite(e.weight))
            throw Error(ErrorKind::InvalidArgument, "edge weight must be positive and finite");
        if (!seen.insert({e.m, e.l}).second) throw Error(ErrorKind::InvalidArgument, "duplicate edge");
    }
}

double WeightGraph::total_weight() const {
    double s = 0.0;
    for (const auto& e : edges_) s += e.weight;
    return s;
}

double WeightGraph::mean_weight() const {
    return edges_.empty() ? 0.0 : total_weight() / static_cast<double>(edges_.size());
}

std::vector<std::size_t> WeightGraph::degrees() const {
    std::vector<std::size_t> deg(task_count_, 0);
    for (const auto& e : edges_) {
        ++deg[e.m];
        ++deg[e.l];
    }
    return deg;
}

WeightGraph WeightGraph::with_weights(std::span<const double> weights) const {
    if (weights.size() != edges_.size()) throw Error(ErrorKind::DimensionMismatch, "weight count != edge count");
    auto edges = edges_;
    for (std::size_t e = 0; e < edges.size(); ++e) edges[e].weight = weights[e];
    return WeightGraph(task_count_, std::move(edges));
}

WeightGraph build_knn_weights(const Eigen::MatrixXd& coefficients, int k) {
    const auto T = static_cast<std::size_t>(coefficients.rows());
    if (k < 1 || static_cast<std::size_t>(k) > T - 1 || T < 2)
        throw Error(ErrorKind::DegenerateK, "k=" + std::to_string(k) + " outside [1, T-1] for T=" + std::to_string(T));
    if (!coefficients.allFinite()) throw Error(ErrorKind::InvalidArgument, "non-finite coefficient rows");

    // neighbour[m][l] == true when l is among the k nearest tasks of m
    std::vector<std::vector<bool>> neighbour(T, std::vector<bool>(T, false));
    std::vector<std::size_t> order(T - 1);
    std::vector<double> dist(T);
    for (std::size_t m = 0; m < T; ++m) {
        for (std::size_t l = 0; l < T; ++l)
            dist[l] = (coefficients.row(static_cast<Eigen::Index>(m)) - coefficients.row(static_cast<Eigen::Index>(l)))
                          .squaredNorm();
        order.clear();
        for (std::size_t l = 0; l < T; ++l)
            if (l != m) order.push_back(l);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
        for (int j = 0; j < k; ++j) neighbour[m][order[static_cast<std::size_t>(j)]] = true;
    }

    std::vector<Edge> edges;
    for (std::size_t m = 0; m < T; ++m) {
        for (std::size_t l = m + 1; l < T; ++l) {
            const int count = int(neighbour[m][l]) + int(neighbour[l][m]);
            if (count > 0) edges.push_back({m, l, 0.5 * count});
        }
    }
    return WeightGraph(T, std::move(edges));
}

WeightGraph adaptive_weights(const Eigen::MatrixXd& centroids, const WeightGraph& base, double min_distance) {
    if (base.edge_count() == 0) throw Error(ErrorKind::EmptyGraph, "adaptive weights need at least one edge");
    if (static_cast<std::size_t>(centroids.rows()) != base.task_count())
        throw Error(ErrorKind::DimensionMismatch, "centroid rows != task count");
    if (!centroids.allFinite()) throw Error(ErrorKind::InvalidArgument, "non-finite centroids");

    std::vector<double> inverse(base.edge_count());
    double inverse_sum = 0.0;
    for (std::size_t e = 0; e < base.edge_count(); ++e) {
        const auto& edge = base.edge(e);
        const double d = (centroids.row(static_cast<Eigen::Index>(edge.m)) -
                          centroids.row(static_cast<Eigen::Index>(edge.l)))
                             .norm();
        inverse[e] = 1.0 / std::max(d, min_distance);
        inverse_sum += inverse[e];
    }
    const double nu = base.total_weight() / inverse_sum;
    for (auto& w : inverse) w *= nu;
    return base.with_weights(inverse);
}

Eigen::MatrixXd Incidence::apply(const Eigen::MatrixXd& U) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), U.cols());
    for (std::size_t e = 0; e < rows.size(); ++e)
        out.row(static_cast<Eigen::Index>(e)) =
            U.row(static_cast<Eigen::Index>(rows[e].first)) - U.row(static_cast<Eigen::Index>(rows[e].second));
    return out;
}

Eigen::MatrixXd Incidence::apply_transpose(const Eigen::MatrixXd& S) const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(task_count), S.cols());
    for (std::size_t e = 0; e < rows.size(); ++e) {
        out.row(static_cast<Eigen::Index>(rows[e].first)) += S.row(static_cast<Eigen::Index>(e));
        out.row(static_cast<Eigen::Index>(rows[e].second)) -= S.row(static_cast<Eigen::Index>(e));
    }
    return out;
}

Eigen::MatrixXd Incidence::dense() const {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(task_count));
    for (std::size_t e = 0; e < rows.size(); ++e) {
        A(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(rows[e].first)) = 1.0;
        A(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(rows[e].second)) = -1.0;
    }
    return A;
}

Incidence build_incidence(const WeightGraph& graph) {
    Incidence inc;
    inc.task_count = graph.task_count();
    inc.gram_diagonal = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(graph.task_count()));
    inc.rows.reserve(graph.edge_count());
    for (const auto& e : graph.edges()) {
        inc.rows.emplace_back(e.m, e.l);
        inc.gram_diagonal[static_cast<Eigen::Index>(e.m)] += 1.0;
        inc.gram_diagonal[static_cast<Eigen::Index>(e.l)] += 1.0;
    }
    return inc;
}

void write_edge_list_csv(std::ostream& out, const WeightGraph& graph) {
    out << "m,l,weight\n";
    for (const auto& e : graph.edges()) out << e.m + 1 << ',' << e.l + 1 << ',' << format_double(e.weight) << '\n';
}

} // namespace mtl
