#include "mtlcvx/cvx_clustering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mtlcvx/error.hpp"

namespace mtl {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Rows of S projected in place onto balls of radius radii[e].
void project_rows(RowMatrix& S, const std::vector<double>& radii) {
    for (Eigen::Index e = 0; e < S.rows(); ++e) {
        const double norm = S.row(e).norm();
        const double r = radii[static_cast<std::size_t>(e)];
        if (norm > r) S.row(e) *= (norm > 0.0 ? r / norm : 0.0);
    }
}

// out = proj(S + rho * A * B), row by row
void projected_differences(const Incidence& inc, const RowMatrix& S, const RowMatrix& B, double rho,
                           const std::vector<double>& radii, RowMatrix& out) {
    for (std::size_t e = 0; e < inc.rows.size(); ++e) {
        const auto ei = static_cast<Eigen::Index>(e);
        auto row = out.row(ei);
        row = S.row(ei) + rho * (B.row(static_cast<Eigen::Index>(inc.rows[e].first)) -
                                 B.row(static_cast<Eigen::Index>(inc.rows[e].second)));
        const double norm = row.norm();
        if (norm > radii[e]) row *= (norm > 0.0 ? radii[e] / norm : 0.0);
    }
}

// out += A^T D
void add_transpose(const Incidence& inc, const RowMatrix& D, RowMatrix& out) {
    for (std::size_t e = 0; e < inc.rows.size(); ++e) {
        const auto ei = static_cast<Eigen::Index>(e);
        out.row(static_cast<Eigen::Index>(inc.rows[e].first)) += D.row(ei);
        out.row(static_cast<Eigen::Index>(inc.rows[e].second)) -= D.row(ei);
    }
}

double difference_norm(const Incidence& inc, const RowMatrix& U) {
    double total = 0.0;
    for (const auto& [m, l] : inc.rows)
        total += (U.row(static_cast<Eigen::Index>(m)) - U.row(static_cast<Eigen::Index>(l))).squaredNorm();
    return std::sqrt(total);
}

double relative_change(const RowMatrix& next, const RowMatrix& prev) {
    const double scale = prev.norm();
    const double diff = (next - prev).norm();
    return scale > 0.0 ? diff / scale : diff;
}

} // namespace

Eigen::VectorXd prox_ball(const Eigen::VectorXd& u, double radius) {
    if (!(radius >= 0.0)) throw Error(ErrorKind::InvalidArgument, "prox radius must be >= 0");
    const double norm = u.norm();
    if (norm <= radius) return u;
    return u * (radius / norm);
}

double centroid_objective(const Eigen::MatrixXd& W, const Eigen::MatrixXd& U, const WeightGraph& graph,
                          double lambda1, double lambda2) {
    double fusion = 0.0;
    for (const auto& e : graph.edges())
        fusion += e.weight * (U.row(static_cast<Eigen::Index>(e.m)) - U.row(static_cast<Eigen::Index>(e.l))).norm();
    return 0.5 * lambda1 * (W - U).squaredNorm() + lambda2 * fusion;
}

double centroid_step_size(const Incidence& incidence, double lambda1, double rho) {
    return 1.0 / ((lambda1 + 2.0 * incidence.max_degree()) * std::max(1.0, rho));
}

CentroidState solve_centroids(const Eigen::MatrixXd& W, const WeightGraph& graph, double lambda1, double lambda2,
                              const CentroidState* warm, const CentroidOptions& options) {
    if (static_cast<std::size_t>(W.rows()) != graph.task_count())
        throw Error(ErrorKind::DimensionMismatch, "W rows != task count");
    if (!(lambda1 > 0.0)) throw Error(ErrorKind::ConfigInvalid, "lambda1 must be > 0");
    if (!(lambda2 >= 0.0)) throw Error(ErrorKind::ConfigInvalid, "lambda2 must be >= 0");
    if (!(options.rho > 0.0)) throw Error(ErrorKind::ConfigInvalid, "rho must be > 0");

    const auto inc = build_incidence(graph);
    const auto E = static_cast<Eigen::Index>(graph.edge_count());
    const auto p = W.cols();

    CentroidState st;
    st.rho = options.rho;
    st.eta = centroid_step_size(inc, lambda1, options.rho);

    // no fusion term: the quadratic is minimized at W
    if (lambda2 == 0.0 || E == 0) {
        st.U = W;
        st.S = Eigen::MatrixXd::Zero(E, p);
        st.converged = true;
        return st;
    }

    std::vector<double> radii(static_cast<std::size_t>(E));
    for (Eigen::Index e = 0; e < E; ++e) radii[static_cast<std::size_t>(e)] = lambda2 * graph.edge(static_cast<std::size_t>(e)).weight;

    const bool warm_ok = warm && warm->U.rows() == W.rows() && warm->U.cols() == p && warm->S.rows() == E &&
                         warm->S.cols() == p;
    const RowMatrix Wr = W;
    RowMatrix U = warm_ok ? RowMatrix(warm->U) : Wr;
    RowMatrix S = warm_ok ? RowMatrix(warm->S) : RowMatrix::Zero(E, p);
    project_rows(S, radii);

    auto objective_of = [&](const RowMatrix& M) {
        return centroid_objective(W, Eigen::MatrixXd(M), graph, lambda1, lambda2);
    };
    // Every U is feasible for this objective, so the lowest one seen is returned.
    RowMatrix best_U = U;
    double best = objective_of(U);

    const double rho = options.rho;
    const double eta = st.eta;
    RowMatrix D(E, p);
    RowMatrix Z(W.rows(), p);
    RowMatrix Z_next(W.rows(), p);
    RowMatrix B(W.rows(), p);
    RowMatrix G(W.rows(), p);

    for (int outer = 1; outer <= options.max_outer; ++outer) {
        // accelerated proximal gradient on the U-block; restarted every outer step
        Z = U;
        B = U;
        double alpha = 1.0;
        int k = 0;
        for (; k < options.max_inner; ++k) {
            projected_differences(inc, S, B, rho, radii, D);
            G.noalias() = lambda1 * (B - Wr);
            add_transpose(inc, D, G);
            Z_next.noalias() = B - eta * G;
            const double alpha_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * alpha * alpha));
            B.noalias() = Z_next + ((alpha - 1.0) / alpha_next) * (Z_next - Z);
            const double change = relative_change(Z_next, Z);
            Z.swap(Z_next);
            alpha = alpha_next;
            if (change < options.inner_tol) {
                ++k;
                break;
            }
        }
        st.inner_iterations += k;

        // dual update on the edge differences
        projected_differences(inc, S, Z, rho, radii, D);
        st.primal_residual = (D - S).norm() / rho;
        G = Z - U;
        st.dual_residual = rho * difference_norm(inc, G);
        const double u_change = relative_change(Z, U);
        U.swap(Z);
        S.swap(D);
        st.outer_iterations = outer;
        const double current = objective_of(U);
        if (current <= best) {
            best = current;
            best_U = U;
        }
        if (options.record_trace)
            st.trace.push_back({outer, k, best, current, st.primal_residual, st.dual_residual});
        const double diff_scale = std::max(1.0, difference_norm(inc, U));
        if (u_change < options.outer_tol && st.primal_residual <= options.outer_tol * diff_scale) {
            st.converged = true;
            break;
        }
    }
    // Fused rows only agree to solver accuracy, which a large lambda2 magnifies
    // in the objective; averaging each contracted component removes the gap.
    const double merge_tol = default_merge_tolerance(W);
    for (const RowMatrix* source : {&U, &best_U}) {
        const auto labels = cluster_labels(Eigen::MatrixXd(*source), graph, merge_tol);
        const int components = *std::max_element(labels.begin(), labels.end()) + 1;
        if (components == static_cast<int>(labels.size())) continue;
        RowMatrix sums = RowMatrix::Zero(components, p);
        std::vector<double> counts(static_cast<std::size_t>(components), 0.0);
        for (std::size_t m = 0; m < labels.size(); ++m) {
            sums.row(labels[m]) += source->row(static_cast<Eigen::Index>(m));
            counts[static_cast<std::size_t>(labels[m])] += 1.0;
        }
        RowMatrix snapped(source->rows(), p);
        for (std::size_t m = 0; m < labels.size(); ++m)
            snapped.row(static_cast<Eigen::Index>(m)) = sums.row(labels[m]) / counts[static_cast<std::size_t>(labels[m])];
        const double f = objective_of(snapped);
        if (f <= best) {
            best = f;
            best_U.swap(snapped);
        }
    }
    st.U = best_U;
    st.S = S;
    return st;
}

double default_merge_tolerance(const Eigen::MatrixXd& W) {
    const double cells = static_cast<double>(W.rows() * W.cols());
    return 1e-6 * (1.0 + (cells > 0 ? W.norm() / std::sqrt(cells) : 0.0));
}

std::vector<int> cluster_labels(const Eigen::MatrixXd& U, const WeightGraph& graph, double tolerance) {
    const auto T = graph.task_count();
    std::vector<std::size_t> parent(T);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& e : graph.edges()) {
        const double gap = (U.row(static_cast<Eigen::Index>(e.m)) - U.row(static_cast<Eigen::Index>(e.l))).norm();
        if (gap < tolerance) {
            const auto a = find(e.m);
            const auto b = find(e.l);
            // root is always the smaller index
            if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
    }
    std::vector<int> labels(T, -1);
    std::vector<int> label_of_root(T, -1);
    int next = 0;
    for (std::size_t m = 0; m < T; ++m) {
        const auto r = find(m);
        if (label_of_root[r] < 0) label_of_root[r] = next++;
        labels[m] = label_of_root[r];
    }
    return labels;
}

} // namespace mtl
