#include "mvtensor/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <json.hpp>

#include "mvtensor/clustering.hpp"

namespace mvtensor {

namespace {

double squared_distance(const Matrix &a, Index i, const Matrix &b, Index j) {
    return (a.row(i) - b.row(j)).squaredNorm();
}

// Indices into `ref` ordered by squared distance to row i of `x`, lower index
// first on ties; `skip` excludes one index (the sample itself).
std::vector<std::pair<double, Index>> sorted_distances(const Matrix &x, Index i,
                                                       const Matrix &ref, Index skip) {
    std::vector<std::pair<double, Index>> d;
    d.reserve(static_cast<std::size_t>(ref.rows()));
    for (Index j = 0; j < ref.rows(); ++j)
        if (j != skip) d.emplace_back(squared_distance(x, i, ref, j), j);
    std::sort(d.begin(), d.end());
    return d;
}

void require_neighbor_count(Index k, Index limit, const char *what) {
    if (k < 1 || k >= limit)
        throw ValidationError(std::string(what) + " neighbor count must be in [1, " +
                              std::to_string(limit - 1) + "], got " + std::to_string(k));
}

double median(std::vector<double> v) {
    const std::size_t n = v.size();
    std::sort(v.begin(), v.end());
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

std::string to_string(AnchorMethod m) { return m == AnchorMethod::Kmeans ? "kmeans" : "svd"; }

AnchorMethod parse_anchor_method(const std::string &s) {
    if (s == "svd") return AnchorMethod::SvdLeverage;
    if (s == "kmeans") return AnchorMethod::Kmeans;
    throw ValidationError("unknown anchor method '" + s + "' (expected svd or kmeans)");
}

std::string AnchorSet::to_json() const {
    nlohmann::ordered_json j;
    j["method"] = mvtensor::to_string(method);
    j["indices"] = indices;
    return j.dump(2) + "\n";
}

AnchorSet AnchorSet::from_json(const std::string &text, Index samples) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception &e) {
        throw FormatError(std::string("malformed anchors document: ") + e.what());
    }
    if (!j.is_object() || !j.contains("indices") || !j["indices"].is_array())
        throw FormatError("anchors document needs an \"indices\" array");
    AnchorSet out;
    if (j.contains("method")) out.method = parse_anchor_method(j["method"].get<std::string>());
    for (const auto &v : j["indices"]) {
        if (!v.is_number_integer()) throw FormatError("anchor indices must be integers");
        out.indices.push_back(v.get<Index>());
    }
    for (std::size_t i = 0; i < out.indices.size(); ++i) {
        if (out.indices[i] < 0 || out.indices[i] >= samples)
            throw ValidationError("anchor index " + std::to_string(out.indices[i]) +
                                  " out of range for " + std::to_string(samples) + " samples");
        if (i > 0 && out.indices[i] <= out.indices[i - 1])
            throw ValidationError("anchor indices must be strictly increasing");
    }
    if (out.indices.empty()) throw ValidationError("anchor set is empty");
    return out;
}

std::vector<Index> nearest_neighbors(const Matrix &x, Index i, Index k) {
    require_neighbor_count(k, x.rows(), "kNN");
    const auto d = sorted_distances(x, i, x, i);
    std::vector<Index> out(static_cast<std::size_t>(k));
    for (Index j = 0; j < k; ++j) out[static_cast<std::size_t>(j)] = d[static_cast<std::size_t>(j)].second;
    return out;
}

ViewGraph gaussian_knn_graph(const FeatureMatrix &x, Index k, std::optional<double> sigma) {
    const Matrix &values = x.values();
    const Index n = x.samples();
    require_neighbor_count(k, n, "kNN");

    std::vector<std::vector<std::pair<double, Index>>> kept(static_cast<std::size_t>(n));
    std::vector<double> retained;
    retained.reserve(static_cast<std::size_t>(n * k));
    for (Index i = 0; i < n; ++i) {
        auto d = sorted_distances(values, i, values, i);
        d.resize(static_cast<std::size_t>(k));
        for (const auto &[dist2, j] : d) retained.push_back(std::sqrt(dist2));
        kept[static_cast<std::size_t>(i)] = std::move(d);
    }

    double bandwidth;
    if (sigma) {
        if (!(*sigma > 0)) throw ValidationError("Gaussian bandwidth must be positive");
        bandwidth = *sigma;
    } else {
        bandwidth = median(retained);
        if (!(bandwidth > 0))
            throw ValidationError("degenerate bandwidth: median neighbor distance is zero");
    }

    Matrix s = Matrix::Zero(n, n);
    const double denom = 2 * bandwidth * bandwidth;
    for (Index i = 0; i < n; ++i)
        for (const auto &[dist2, j] : kept[static_cast<std::size_t>(i)])
            s(i, j) = std::exp(-dist2 / denom);
    Matrix sym = 0.5 * (s + s.transpose());
    return ViewGraph{std::move(sym), GraphKind::Similarity, false};
}

ViewGraph lle_weights(const FeatureMatrix &x, Index k, double reg) {
    const Matrix &values = x.values();
    const Index n = x.samples();
    require_neighbor_count(k, n, "LLE");
    if (reg < 0 || !std::isfinite(reg))
        throw ValidationError("LLE regularizer must be nonnegative");

    Matrix s = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        const auto nbrs = nearest_neighbors(values, i, k);
        if (k == 1) {
            s(i, nbrs[0]) = 1.0;
            continue;
        }
        Matrix z(k, values.cols());
        for (Index j = 0; j < k; ++j) z.row(j) = values.row(nbrs[static_cast<std::size_t>(j)]) - values.row(i);
        Matrix gram = z * z.transpose();
        const double trace = gram.trace();
        // With every neighbor coincident the trace vanishes; fall back to an
        // absolute ridge so the weights come out uniform.
        const double ridge = trace > 0 ? reg * trace / static_cast<double>(k) : reg;
        gram.diagonal().array() += ridge;

        Eigen::ColPivHouseholderQR<Matrix> qr(gram);
        if (qr.rank() < k) {
            if (reg == 0)
                throw ValidationError("local Gram system of sample " + std::to_string(i) +
                                      " is singular; a positive regularizer is required");
            throw NumericalError("local Gram system of sample " + std::to_string(i) +
                                 " is singular even after regularization");
        }
        Vector w = qr.solve(Vector::Ones(k));
        w /= w.sum();
        for (Index j = 0; j < k; ++j) s(i, nbrs[static_cast<std::size_t>(j)]) = w(j);
    }
    return ViewGraph{std::move(s), GraphKind::Lle, true};
}

Matrix standardized_concatenation(const MultiViewDataset &views) {
    views.validate();
    const Index n = views.samples();
    Index total = 0;
    for (const auto &v : views.views) total += v.dim();
    Matrix out(n, total);
    Index col = 0;
    for (const auto &v : views.views) {
        for (Index c = 0; c < v.dim(); ++c, ++col) {
            const auto column = v.values().col(c);
            const double mean = column.mean();
            const double var = (column.array() - mean).square().sum() / static_cast<double>(n);
            const double sd = std::max(std::sqrt(var), 1e-12);
            out.col(col) = (column.array() - mean) / sd;
        }
    }
    return out;
}

Vector leverage_scores(const MultiViewDataset &views, Index k) {
    const Matrix x = standardized_concatenation(views);
    Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinU);
    const Vector &sigma = svd.singularValues();
    Index r = std::min({k, x.cols(), x.rows()});
    // Directions beyond the numerical rank are arbitrary; leave them out.
    Index rank = 0;
    const double cutoff = sigma.size() ? 1e-10 * sigma(0) : 0.0;
    while (rank < sigma.size() && sigma(rank) > cutoff) ++rank;
    r = std::min(r, rank);
    return svd.matrixU().leftCols(r).rowwise().squaredNorm();
}

AnchorSet select_anchors_svd(const MultiViewDataset &views, Index k) {
    const Index n = views.samples();
    if (k < 1 || k > n)
        throw ValidationError("anchor count must be in [1, " + std::to_string(n) + "], got " +
                              std::to_string(k));
    const Vector scores = leverage_scores(views, k);
    // Leverages lie in [0, 1]; quantizing to 1e-12 makes roundoff-level
    // differences count as ties.
    std::vector<std::pair<double, Index>> order;
    order.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) order.emplace_back(-std::round(scores(i) * 1e12), i);
    std::sort(order.begin(), order.end());
    AnchorSet out;
    out.method = AnchorMethod::SvdLeverage;
    for (Index i = 0; i < k; ++i) out.indices.push_back(order[static_cast<std::size_t>(i)].second);
    std::sort(out.indices.begin(), out.indices.end());
    return out;
}

AnchorSet select_anchors_kmeans(const MultiViewDataset &views, Index k, std::uint64_t seed) {
    const Index n = views.samples();
    if (k < 1 || k > n)
        throw ValidationError("anchor count must be in [1, " + std::to_string(n) + "], got " +
                              std::to_string(k));
    const Matrix x = standardized_concatenation(views);
    const KmeansResult km = kmeans(x, k, seed);
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    AnchorSet out;
    out.method = AnchorMethod::Kmeans;
    for (Index c = 0; c < k; ++c) {
        const auto d = sorted_distances(km.centroids, c, x, -1);
        for (const auto &[dist2, idx] : d) {
            if (!taken[static_cast<std::size_t>(idx)]) {
                taken[static_cast<std::size_t>(idx)] = true;
                out.indices.push_back(idx);
                break;
            }
        }
    }
    std::sort(out.indices.begin(), out.indices.end());
    return out;
}

Matrix anchor_features(const FeatureMatrix &x, const AnchorSet &anchors) {
    Matrix out(anchors.size(), x.dim());
    for (Index a = 0; a < anchors.size(); ++a) {
        const Index idx = anchors.indices[static_cast<std::size_t>(a)];
        if (idx < 0 || idx >= x.samples())
            throw ValidationError("anchor index " + std::to_string(idx) + " out of range");
        out.row(a) = x.values().row(idx);
    }
    return out;
}

ViewGraph bipartite_graph(const FeatureMatrix &x, const Matrix &anchors, Index k) {
    const Matrix &values = x.values();
    if (anchors.cols() != x.dim())
        throw ShapeError("anchor features have " + std::to_string(anchors.cols()) +
                         " columns, samples have " + std::to_string(x.dim()));
    const Index n = x.samples(), m = anchors.rows();
    require_neighbor_count(k, m, "bipartite");
    Matrix g = Matrix::Zero(n, m);
    for (Index i = 0; i < n; ++i) {
        const auto d = sorted_distances(values, i, anchors, -1);
        const double far = d[static_cast<std::size_t>(k)].first;
        double near_sum = 0;
        for (Index j = 0; j < k; ++j) near_sum += d[static_cast<std::size_t>(j)].first;
        const double denom = static_cast<double>(k) * far - near_sum;
        for (Index j = 0; j < k; ++j) {
            const auto &[dist2, idx] = d[static_cast<std::size_t>(j)];
            g(i, idx) = denom > 0 ? (far - dist2) / denom : 1.0 / static_cast<double>(k);
        }
    }
    return ViewGraph{std::move(g), GraphKind::Bipartite, true};
}

Vector column_degrees(const Matrix &g, bool *fallback) {
    Vector degree = g.colwise().sum().transpose();
    bool used = false;
    for (Index j = 0; j < degree.size(); ++j) {
        if (degree(j) <= 0) {
            degree(j) = 1e-12;
            used = true;
        }
    }
    if (fallback) *fallback = used;
    return degree;
}

NormalizedGraph degree_and_normalize(const Matrix &g) {
    if ((g.array() < 0).any()) throw ValidationError("graph has negative entries");
    NormalizedGraph out;
    out.degree = column_degrees(g, &out.zero_degree_fallback);
    out.column_normalized = g * out.degree.cwiseInverse().asDiagonal();
    if (g.rows() == g.cols()) {
        const Vector inv_sqrt = out.degree.cwiseSqrt().cwiseInverse();
        Matrix l = -(inv_sqrt.asDiagonal() * g * inv_sqrt.asDiagonal());
        l.diagonal().array() += 1.0;
        out.laplacian = std::move(l);
    }
    return out;
}

} // namespace mvtensor
