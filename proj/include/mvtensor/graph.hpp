#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mvtensor/dataset.hpp"

namespace mvtensor {

enum class GraphKind { Similarity, Lle, Bipartite };

struct ViewGraph {
    Matrix values;
    GraphKind kind = GraphKind::Similarity;
    bool row_stochastic = false;
};

enum class AnchorMethod { SvdLeverage, Kmeans };

std::string to_string(AnchorMethod m);
AnchorMethod parse_anchor_method(const std::string &s);

struct AnchorSet {
    std::vector<Index> indices; ///< strictly increasing
    AnchorMethod method = AnchorMethod::SvdLeverage;

    Index size() const noexcept { return static_cast<Index>(indices.size()); }
    /// {"method": "svd"|"kmeans", "indices": [...]}
    std::string to_json() const;
    /// Parses the document written by to_json and checks indices < samples.
    static AnchorSet from_json(const std::string &text, Index samples);
};

/// Indices of the k nearest other samples of row i, ordered by distance with
/// ties broken by lower index.
std::vector<Index> nearest_neighbors(const Matrix &x, Index i, Index k);

/// Symmetrized Gaussian kNN similarity graph. `sigma` unset means the median
/// of the retained neighbor distances.
ViewGraph gaussian_knn_graph(const FeatureMatrix &x, Index k,
                             std::optional<double> sigma = std::nullopt);

/// LLE reconstruction weights: each row reconstructs its sample from its k
/// nearest neighbors with weights summing to one.
ViewGraph lle_weights(const FeatureMatrix &x, Index k, double reg);

/// Columns standardized to zero mean and unit variance (std floored at
/// 1e-12), views concatenated side by side.
Matrix standardized_concatenation(const MultiViewDataset &views);

/// Leverage scores (squared row norms of the leading left singular vectors)
/// of the standardized concatenated features.
Vector leverage_scores(const MultiViewDataset &views, Index k);

/// The k samples of highest leverage, ties broken by lower index.
AnchorSet select_anchors_svd(const MultiViewDataset &views, Index k);

/// Samples nearest to the k-means centroids of the standardized features.
AnchorSet select_anchors_kmeans(const MultiViewDataset &views, Index k, std::uint64_t seed);

/// Rows of x at the anchor indices.
Matrix anchor_features(const FeatureMatrix &x, const AnchorSet &anchors);

/// Row-stochastic sample-to-anchor graph from the adaptive-neighbor closed
/// form over each sample's k nearest anchors.
ViewGraph bipartite_graph(const FeatureMatrix &x, const Matrix &anchors, Index k);

struct NormalizedGraph {
    Vector degree;                  ///< column sums
    Matrix column_normalized;       ///< G * D^-1
    std::optional<Matrix> laplacian; ///< I - D^-1/2 G D^-1/2, square input only
    bool zero_degree_fallback = false;
};

/// Column sums of g; zero columns get 1e-12 and set `fallback`.
Vector column_degrees(const Matrix &g, bool *fallback = nullptr);

NormalizedGraph degree_and_normalize(const Matrix &g);
inline NormalizedGraph degree_and_normalize(const ViewGraph &g) {
    return degree_and_normalize(g.values);
}

} // namespace mvtensor
