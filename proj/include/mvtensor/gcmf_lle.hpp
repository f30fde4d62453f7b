#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvtensor/graph.hpp"

namespace mvtensor {

/// Affinity between embedded samples used to build the consensus Laplacians.
enum class EmbeddingKernel {
    Gaussian, ///< exp(-||u_i - u_j||^2 / (2 sigma^2)), sigma = median pairwise distance
    Linear,   ///< u_i . u_j with negative values clamped to 0
};

std::string to_string(EmbeddingKernel k);
EmbeddingKernel parse_embedding_kernel(const std::string &s);

struct GcmfConfig {
    Index neighbors = 10;
    double lambda_c = 0.1;
    Index dim = 2;
    std::vector<Index> view_dims; ///< per-view override of dim; empty means dim everywhere
    EmbeddingKernel kernel = EmbeddingKernel::Gaussian;
    std::optional<double> bandwidth;
    double tol = 1e-6; ///< relative objective change between sweeps
    int max_sweeps = 50;
    double reg = 1e-3;

    Index dim_of(Index view) const;
    void validate(Index samples, Index views) const;
};

struct SweepRecord {
    int sweep = 0;
    double objective_start = 0; ///< before the sweep, Laplacians of this sweep
    double objective = 0;       ///< after the sweep, same Laplacians
    std::vector<double> steps;  ///< start, then after each view update
};

struct GcmfResult {
    std::vector<Matrix> embeddings; ///< d_v x N, orthonormal rows
    std::vector<SweepRecord> history;
    bool converged = false;
    int sweeps = 0;
    bool eigenvalue_tie = false;
    bool zero_degree_fallback = false;
};

/// (I - S)^T (I - S).
Matrix build_m(const ViewGraph &s);

struct ConsensusLaplacian {
    Matrix laplacian;
    bool zero_degree_fallback = false;
};

/// Kernel affinity over the columns of u (d x N), then I - D^-1/2 G D^-1/2.
ConsensusLaplacian consensus_laplacian(const Matrix &u, EmbeddingKernel kernel,
                                       std::optional<double> bandwidth = std::nullopt);

struct ViewEmbedding {
    Matrix u;          ///< d x N
    Vector eigenvalues; ///< the d smallest, ascending
    bool tie = false;  ///< the d-th and (d+1)-th eigenvalues coincide
};

/// Rows are eigenvectors of the symmetric c for its d smallest eigenvalues,
/// each signed so its largest-magnitude entry is positive.
ViewEmbedding smallest_eigenvectors(const Matrix &c, Index dim);

/// Minimizer of tr(U (M_v + lambda_c * sum_w L_w) U^T) over orthonormal-row U.
ViewEmbedding update_view_embedding(Index view, const Matrix &m_v,
                                    std::span<const Matrix> other_laplacians, double lambda_c,
                                    Index dim);

/// sum_v tr(U_v M_v U_v^T) + lambda_c * sum_{v != w} tr(U_v L_w U_v^T).
double gcmf_objective(std::span<const Matrix> embeddings, std::span<const Matrix> m_mats,
                      std::span<const Matrix> laplacians, double lambda_c);

/// Alternating per-view eigensolves. Every sweep rebuilds all consensus
/// Laplacians from the current embeddings and keeps them fixed while each view
/// is updated in turn.
GcmfResult solve_gcmf(const MultiViewDataset &dataset, const GcmfConfig &config);

/// Columns sweep, objective.
std::string gcmf_history_csv(const std::vector<SweepRecord> &history);

} // namespace mvtensor
