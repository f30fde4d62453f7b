#include "mvtensor/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "mvtensor/parallel.hpp"

namespace mvtensor {

namespace {

struct LloydRun {
    std::vector<int> labels;
    Matrix centroids;
    double inertia = 0;
    int iterations = 0;
    std::vector<double> trace;
};

std::mt19937_64 restart_rng(std::uint64_t seed, int restart) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(restart)};
    return std::mt19937_64(seq);
}

Matrix plus_plus_seeds(const Matrix &x, Index c, std::mt19937_64 &rng) {
    const Index n = x.rows();
    Matrix centroids(c, x.cols());
    std::uniform_int_distribution<Index> pick(0, n - 1);
    centroids.row(0) = x.row(pick(rng));
    Vector d2 = (x.rowwise() - centroids.row(0)).rowwise().squaredNorm();
    for (Index k = 1; k < c; ++k) {
        const double total = d2.sum();
        Index chosen = 0;
        if (total > 0) {
            std::uniform_real_distribution<double> u(0.0, total);
            const double target = u(rng);
            double acc = 0;
            chosen = n - 1;
            for (Index i = 0; i < n; ++i) {
                acc += d2(i);
                if (acc > target && d2(i) > 0) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = pick(rng);
        }
        centroids.row(k) = x.row(chosen);
        d2 = d2.cwiseMin((x.rowwise() - centroids.row(k)).rowwise().squaredNorm());
    }
    return centroids;
}

// Returns the assignment cost of every point.
Vector assign(const Matrix &x, const Matrix &centroids, std::vector<int> &labels) {
    const Index n = x.rows();
    Vector cost(n);
    for (Index i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (Index k = 0; k < centroids.rows(); ++k) {
            const double d = (x.row(i) - centroids.row(k)).squaredNorm();
            if (d < best) {
                best = d;
                arg = static_cast<int>(k);
            }
        }
        labels[static_cast<std::size_t>(i)] = arg;
        cost(i) = best;
    }
    return cost;
}

LloydRun lloyd(const Matrix &x, Index c, std::uint64_t seed, int restart, int max_iter) {
    auto rng = restart_rng(seed, restart);
    LloydRun run;
    run.centroids = plus_plus_seeds(x, c, rng);
    const Index n = x.rows();
    run.labels.assign(static_cast<std::size_t>(n), -1);
    std::vector<int> next(static_cast<std::size_t>(n));
    Vector cost;
    for (int it = 0; it < max_iter; ++it) {
        cost = assign(x, run.centroids, next);
        run.trace.push_back(cost.sum());
        if (next == run.labels) break;
        run.labels = next;
        run.iterations = it + 1;

        Matrix sums = Matrix::Zero(c, x.cols());
        std::vector<Index> counts(static_cast<std::size_t>(c), 0);
        for (Index i = 0; i < n; ++i) {
            const auto l = run.labels[static_cast<std::size_t>(i)];
            sums.row(l) += x.row(i);
            ++counts[static_cast<std::size_t>(l)];
        }
        for (Index k = 0; k < c; ++k) {
            if (counts[static_cast<std::size_t>(k)] > 0) {
                run.centroids.row(k) = sums.row(k) / static_cast<double>(counts[static_cast<std::size_t>(k)]);
                continue;
            }
            // Empty cluster: move its centroid onto the worst-served point.
            Index far = 0;
            cost.maxCoeff(&far);
            run.centroids.row(k) = x.row(far);
            cost(far) = 0;
        }
    }
    cost = assign(x, run.centroids, run.labels);
    run.inertia = cost.sum();
    return run;
}

void require_same_length(const LabelVector &a, const LabelVector &b) {
    if (a.size() != b.size())
        throw ValidationError("label vectors differ in length: " + std::to_string(a.size()) +
                              " vs " + std::to_string(b.size()));
}

double entropy(const Eigen::VectorXd &counts, double n) {
    double h = 0;
    for (Index i = 0; i < counts.size(); ++i)
        if (counts(i) > 0) h -= counts(i) / n * std::log(counts(i) / n);
    return h;
}

} // namespace

KmeansResult kmeans(const Matrix &points, Index clusters, std::uint64_t seed, int max_iter,
                    int restarts) {
    if (clusters < 1 || clusters > points.rows())
        throw ValidationError("cluster count must be in [1, " + std::to_string(points.rows()) +
                              "], got " + std::to_string(clusters));
    if (!points.allFinite()) throw ValidationError("k-means input has non-finite entries");
    restarts = std::max(restarts, 1);
    std::vector<LloydRun> runs(static_cast<std::size_t>(restarts));
    parallel_for(runs.size(), [&](std::size_t r) {
        runs[r] = lloyd(points, clusters, seed, static_cast<int>(r), max_iter);
    });
    std::size_t best = 0;
    for (std::size_t r = 1; r < runs.size(); ++r)
        if (runs[r].inertia < runs[best].inertia) best = r;
    KmeansResult out;
    out.labels = LabelVector(std::move(runs[best].labels));
    out.centroids = std::move(runs[best].centroids);
    out.inertia = runs[best].inertia;
    out.iterations = runs[best].iterations;
    return out;
}

std::vector<double> kmeans_inertia_trace(const Matrix &points, Index clusters,
                                         std::uint64_t seed, int max_iter) {
    if (clusters < 1 || clusters > points.rows())
        throw ValidationError("cluster count out of range");
    return lloyd(points, clusters, seed, 0, max_iter).trace;
}

Eigen::MatrixXi contingency(const LabelVector &pred, const LabelVector &truth) {
    require_same_length(pred, truth);
    Eigen::MatrixXi table = Eigen::MatrixXi::Zero(pred.classes(), truth.classes());
    for (Index i = 0; i < pred.size(); ++i) ++table(pred[i], truth[i]);
    return table;
}

std::vector<Index> hungarian_assignment(const Matrix &cost) {
    if (cost.rows() != cost.cols()) throw ShapeError("assignment cost matrix must be square");
    const Index n = cost.rows();
    const double inf = std::numeric_limits<double>::infinity();
    // Potentials formulation, 1-based with a sentinel column 0.
    std::vector<double> u(n + 1, 0), v(n + 1, 0);
    std::vector<Index> match(n + 1, 0), way(n + 1, 0);
    for (Index row = 1; row <= n; ++row) {
        match[0] = row;
        Index col0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[col0] = true;
            const Index r0 = match[col0];
            double delta = inf;
            Index col1 = 0;
            for (Index j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(r0 - 1, j - 1) - u[r0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = col0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    col1 = j;
                }
            }
            for (Index j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            col0 = col1;
        } while (match[col0] != 0);
        do {
            const Index col1 = way[col0];
            match[col0] = match[col1];
            col0 = col1;
        } while (col0 != 0);
    }
    std::vector<Index> assignment(static_cast<std::size_t>(n));
    for (Index j = 1; j <= n; ++j) assignment[static_cast<std::size_t>(match[j] - 1)] = j - 1;
    return assignment;
}

double accuracy(const LabelVector &pred, const LabelVector &truth) {
    const Eigen::MatrixXi table = contingency(pred, truth);
    const Index n = std::max(table.rows(), table.cols());
    Matrix cost = Matrix::Zero(n, n);
    cost.topLeftCorner(table.rows(), table.cols()) = -table.cast<double>();
    const auto assignment = hungarian_assignment(cost);
    double hits = 0;
    for (Index r = 0; r < n; ++r) hits -= cost(r, assignment[static_cast<std::size_t>(r)]);
    return hits / static_cast<double>(pred.size());
}

double nmi(const LabelVector &pred, const LabelVector &truth) {
    const Matrix table = contingency(pred, truth).cast<double>();
    const double n = static_cast<double>(pred.size());
    const Eigen::VectorXd rows = table.rowwise().sum();
    const Eigen::VectorXd cols = table.colwise().sum().transpose();
    const double hp = entropy(rows, n), ht = entropy(cols, n);
    if (hp <= 0 || ht <= 0) return (hp <= 0 && ht <= 0) ? 1.0 : 0.0;
    double mi = 0;
    for (Index i = 0; i < table.rows(); ++i)
        for (Index j = 0; j < table.cols(); ++j)
            if (table(i, j) > 0)
                mi += table(i, j) / n * std::log(n * table(i, j) / (rows(i) * cols(j)));
    return std::clamp(mi / std::sqrt(hp * ht), 0.0, 1.0);
}

double purity(const LabelVector &pred, const LabelVector &truth) {
    const Eigen::MatrixXi table = contingency(pred, truth);
    double hits = 0;
    for (Index i = 0; i < table.rows(); ++i) hits += table.row(i).maxCoeff();
    return hits / static_cast<double>(pred.size());
}

} // namespace mvtensor
