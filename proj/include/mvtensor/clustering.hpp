#pragma once

#include <cstdint>

#include "mvtensor/dataset.hpp"

namespace mvtensor {

struct KmeansResult {
    LabelVector labels;
    Matrix centroids; ///< clusters x dim
    double inertia = 0;
    int iterations = 0;
};

/// k-means with k-means++ seeding and Lloyd iterations, best of `restarts`
/// runs by inertia (ties go to the lowest restart index). Deterministic for a
/// given seed. An empty cluster is re-seeded at the point farthest from its
/// assigned centroid.
KmeansResult kmeans(const Matrix &points, Index clusters, std::uint64_t seed,
                    int max_iter = 300, int restarts = 10);

/// Per-iteration inertia of a single Lloyd run (seeded as restart 0), used to
/// inspect monotonicity.
std::vector<double> kmeans_inertia_trace(const Matrix &points, Index clusters,
                                         std::uint64_t seed, int max_iter = 300);

/// Contingency table: rows are predicted clusters, columns truth classes.
Eigen::MatrixXi contingency(const LabelVector &pred, const LabelVector &truth);

/// Minimum-cost perfect assignment on a square cost matrix (Hungarian
/// method). Returns, for each row, the assigned column.
std::vector<Index> hungarian_assignment(const Matrix &cost);

/// Fraction of samples correctly labelled under the best one-to-one mapping
/// from clusters to classes. Rectangular tables are zero-padded.
double accuracy(const LabelVector &pred, const LabelVector &truth);

/// Mutual information normalized by sqrt(H(pred) * H(truth)). When either
/// entropy is zero the result is 1 for identical partitions, 0 otherwise.
double nmi(const LabelVector &pred, const LabelVector &truth);

double purity(const LabelVector &pred, const LabelVector &truth);

} // namespace mvtensor
