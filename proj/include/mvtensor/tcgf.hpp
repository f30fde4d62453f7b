#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvtensor/graph.hpp"
#include "mvtensor/tensor_algebra.hpp"

namespace mvtensor {

/// How a view graph G with column sums D enters the agreement term.
enum class GraphNormalization {
    Symmetric, ///< G * D^-1/2, the bipartite spectral normalization
    Column,    ///< G * D^-1
};

std::string to_string(GraphNormalization n);
GraphNormalization parse_graph_normalization(const std::string &s);

/// G * D^-1/2 or G * D^-1.
Matrix normalize_graph(const Matrix &g, const Vector &degree, GraphNormalization mode);

/// Tensorized consensus graph solver in its anchor form. Each view enters as
/// a fixed row-stochastic N x K graph B; the full N x N model is the case
/// K = N with B a row-normalized similarity graph.
struct TcgfConfig {
    double lambda_e = 0.1; ///< weight of the sparse error term
    double lambda_r = 1.0; ///< weight of the tensor nuclear norm
    double gamma = 0.5;    ///< view-weight exponent, in (0, 1)
    Index dim = 3;         ///< embedding dimension
    std::optional<WeightVector> omega; ///< defaults to all ones
    GraphNormalization normalization = GraphNormalization::Symmetric;
    double mu0 = 0.1;
    double rho0 = 0.1;
    double eta = 1.5;
    double penalty_cap = 1e8;
    double tol = 1e-6;
    int max_iter = 100;
    /// Seeds the orthonormal completion used when dim exceeds the rank of the
    /// fused graph; the solver is otherwise deterministic.
    std::uint64_t seed = 0;

    /// Throws ValidationError on any out-of-range field.
    void validate(Index samples, Index anchors, Index views) const;
};

struct IterationRecord {
    int iter = 0;
    double objective = 0;
    double res_graph_inf = 0;  ///< max over views of ||B - G - E||_inf
    double res_tensor_inf = 0; ///< ||stack(G) - Z||_inf
    double mu = 0;             ///< penalties in effect during the iteration
    double rho = 0;
    Vector alpha;
};

struct TcgfState {
    Matrix f_s; ///< N x d
    Matrix f_a; ///< K x d
    std::vector<Matrix> g;
    std::vector<Matrix> e;
    std::vector<Matrix> y;
    Tensor3 z;        ///< N x M x K
    Tensor3 y_tensor; ///< N x M x K
    std::vector<Vector> degree; ///< column sums of g, lagged one update
    Vector alpha;
    double mu = 0;
    double rho = 0;
    std::vector<IterationRecord> history;
};

struct TcgfResult {
    Matrix embedding;        ///< F_S
    Matrix anchor_embedding; ///< F_A
    Matrix consensus_graph;  ///< F_S * F_A^T
    Vector alpha;
    bool converged = false;
    bool rank_deficient = false;
    int iterations = 0;
    std::vector<IterationRecord> history;
};

struct EmbeddingUpdate {
    Matrix f_s;
    Matrix f_a;
    bool rank_deficient = false;
};

/// Sum over views of alpha_v^gamma * normalized_v, where normalized_v is
/// the normalized graph of view v.
Matrix fused_graph(std::span<const Matrix> normalized, const Vector &alpha, double gamma);

/// F_S = U_d / sqrt(2), F_A = V_d / sqrt(2) from the leading singular pairs of
/// the fused graph. Each left singular vector is signed so that its
/// largest-magnitude entry is positive.
EmbeddingUpdate update_f(std::span<const Matrix> normalized, const Vector &alpha, double gamma,
                         Index dim, std::uint64_t seed = 0);

/// prox_{lambda_r/rho}(G + Y/rho).
Tensor3 update_z(const Tensor3 &g, const Tensor3 &y, double rho, double lambda_r,
                 const WeightVector &omega);

/// Euclidean projection onto the probability simplex (sort and threshold).
Vector project_simplex(const Vector &v);

/// Everything the graph update of one view reads.
struct GraphUpdateInputs {
    const Matrix &b;
    const Matrix &e;
    const Matrix &y;
    const Matrix &z_slice;        ///< Z(:, v, :)
    const Matrix &y_tensor_slice; ///< Y(:, v, :)
    const Matrix &f_s;
    const Matrix &f_a;
    const Vector &degree; ///< column sums of the previous G_v
    GraphNormalization normalization = GraphNormalization::Symmetric;
    double alpha = 1;
    double gamma = 0.5;
    double mu = 1;
    double rho = 1;
};

/// Row-wise simplex projection of P + Q, the exact minimizer of the graph
/// subproblem with the degree matrix held at its lagged value.
Matrix update_g(const GraphUpdateInputs &in);

/// Value of the graph subproblem at g (used to check optimality).
double graph_subproblem_objective(const Matrix &g, const GraphUpdateInputs &in);

/// Soft thresholding of B - G + Y/mu at lambda_e/mu.
Matrix update_e(const Matrix &b, const Matrix &g, const Matrix &y, double mu, double lambda_e);

/// alpha_v proportional to h_v^(1/(1-gamma)), h clamped below at 1e-12.
Vector update_alpha(const Vector &h, double gamma);

/// tr(G_F^T N(G)) for one view, N the configured normalization.
double graph_agreement(const Matrix &consensus, const Matrix &g, const Vector &degree,
                       GraphNormalization mode);

/// Dual ascent on both multipliers and geometric penalty growth, capped.
void update_multipliers(TcgfState &state, std::span<const Matrix> b, double eta, double cap);

/// Runs the solver from G = B, E = Y = 0, Z = stack(G), uniform alpha.
TcgfResult solve_tcgf(std::span<const Matrix> bipartite, const TcgfConfig &config);

/// Builds the bipartite graph of every view over the given anchors, then
/// solves.
TcgfResult solve_tcgf(const MultiViewDataset &dataset, const AnchorSet &anchors, Index knn,
                      const TcgfConfig &config);

/// Row-normalized Gaussian kNN graphs, the inputs of the full N x N model.
std::vector<Matrix> full_graphs(const MultiViewDataset &dataset, Index knn);

/// Columns iter, objective, res_graph_inf, res_tensor_inf, mu, rho,
/// alpha_1..alpha_M.
std::string history_csv(const std::vector<IterationRecord> &history);

} // namespace mvtensor
