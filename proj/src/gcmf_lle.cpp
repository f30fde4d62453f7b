#include "mvtensor/gcmf_lle.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "mvtensor/parallel.hpp"

namespace mvtensor {

namespace {

double trace_form(const Matrix &u, const Matrix &c) { return (u * c * u.transpose()).trace(); }

double median_pairwise_distance(const Matrix &points) {
    std::vector<double> d;
    const Index n = points.cols();
    d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j) d.push_back((points.col(i) - points.col(j)).norm());
    if (d.empty()) return 0;
    const std::size_t mid = d.size() / 2;
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
    const double upper = d[mid];
    if (d.size() % 2) return upper;
    const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

} // namespace

std::string to_string(EmbeddingKernel k) { return k == EmbeddingKernel::Linear ? "linear" : "gaussian"; }

EmbeddingKernel parse_embedding_kernel(const std::string &s) {
    if (s == "gaussian") return EmbeddingKernel::Gaussian;
    if (s == "linear") return EmbeddingKernel::Linear;
    throw ValidationError("unknown kernel '" + s + "' (expected gaussian or linear)");
}

Index GcmfConfig::dim_of(Index view) const {
    return view_dims.empty() ? dim : view_dims[static_cast<std::size_t>(view)];
}

void GcmfConfig::validate(Index samples, Index views) const {
    if (neighbors < 1 || neighbors >= samples)
        throw ValidationError("neighbors must be in [1, " + std::to_string(samples - 1) + "]");
    if (!(lambda_c >= 0) || !std::isfinite(lambda_c))
        throw ValidationError("lambda_c must be nonnegative");
    if (!view_dims.empty() && static_cast<Index>(view_dims.size()) != views)
        throw ValidationError("view_dims needs one entry per view");
    for (Index v = 0; v < views; ++v)
        if (dim_of(v) < 1 || dim_of(v) >= samples)
            throw ValidationError("embedding dimension must be in [1, " +
                                  std::to_string(samples - 1) + "]");
    if (bandwidth && !(*bandwidth > 0)) throw ValidationError("bandwidth must be positive");
    if (!(tol >= 0)) throw ValidationError("tol must be nonnegative");
    if (max_sweeps < 1) throw ValidationError("max_sweeps must be at least 1");
    if (!(reg >= 0)) throw ValidationError("reg must be nonnegative");
}

Matrix build_m(const ViewGraph &s) {
    if (s.values.rows() != s.values.cols())
        throw ShapeError("reconstruction graph must be square, got " +
                         std::to_string(s.values.rows()) + "x" + std::to_string(s.values.cols()));
    Matrix r = -s.values;
    r.diagonal().array() += 1.0;
    Matrix m = r.transpose() * r;
    return 0.5 * (m + m.transpose());
}

ConsensusLaplacian consensus_laplacian(const Matrix &u, EmbeddingKernel kernel,
                                       std::optional<double> bandwidth) {
    const Index n = u.cols();
    Matrix g(n, n);
    if (kernel == EmbeddingKernel::Linear) {
        g = (u.transpose() * u).cwiseMax(0.0);
    } else {
        const double sigma = bandwidth ? *bandwidth : median_pairwise_distance(u);
        const double denom = 2 * sigma * sigma;
        for (Index i = 0; i < n; ++i) {
            g(i, i) = 1.0;
            for (Index j = i + 1; j < n; ++j) {
                const double d2 = (u.col(i) - u.col(j)).squaredNorm();
                const double w = d2 == 0 ? 1.0 : (denom > 0 ? std::exp(-d2 / denom) : 0.0);
                g(i, j) = g(j, i) = w;
            }
        }
    }
    NormalizedGraph norm = degree_and_normalize(g);
    Matrix l = std::move(*norm.laplacian);
    return ConsensusLaplacian{0.5 * (l + l.transpose()), norm.zero_degree_fallback};
}

ViewEmbedding smallest_eigenvectors(const Matrix &c, Index dim) {
    if (c.rows() != c.cols()) throw ShapeError("eigenproblem matrix must be square");
    if (dim < 1 || dim > c.rows()) throw ValidationError("embedding dimension out of range");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (c + c.transpose()));
    if (eig.info() != Eigen::Success) throw NumericalError("symmetric eigensolver did not converge");
    ViewEmbedding out;
    out.eigenvalues = eig.eigenvalues().head(dim);
    out.u = eig.eigenvectors().leftCols(dim).transpose();
    for (Index r = 0; r < dim; ++r) {
        Index arg = 0;
        out.u.row(r).cwiseAbs().maxCoeff(&arg);
        if (out.u(r, arg) < 0) out.u.row(r) *= -1;
    }
    if (dim < c.rows()) {
        const double a = eig.eigenvalues()(dim - 1), b = eig.eigenvalues()(dim);
        out.tie = std::abs(b - a) <= 1e-10 * std::max(1.0, std::abs(a));
    }
    return out;
}

ViewEmbedding update_view_embedding(Index view, const Matrix &m_v,
                                    std::span<const Matrix> other_laplacians, double lambda_c,
                                    Index dim) {
    Matrix c = m_v;
    for (const auto &l : other_laplacians) {
        if (l.rows() != c.rows() || l.cols() != c.cols())
            throw ShapeError("view " + std::to_string(view) + ": Laplacian shape mismatch");
        c += lambda_c * l;
    }
    try {
        return smallest_eigenvectors(c, dim);
    } catch (const NumericalError &e) {
        throw NumericalError("view " + std::to_string(view) + ": " + e.what());
    }
}

double gcmf_objective(std::span<const Matrix> embeddings, std::span<const Matrix> m_mats,
                      std::span<const Matrix> laplacians, double lambda_c) {
    double total = 0;
    for (std::size_t v = 0; v < embeddings.size(); ++v) {
        total += trace_form(embeddings[v], m_mats[v]);
        for (std::size_t w = 0; w < laplacians.size(); ++w)
            if (w != v) total += lambda_c * trace_form(embeddings[v], laplacians[w]);
    }
    return total;
}

GcmfResult solve_gcmf(const MultiViewDataset &dataset, const GcmfConfig &config) {
    dataset.validate();
    const Index n = dataset.samples(), m = dataset.view_count();
    config.validate(n, m);

    std::vector<Matrix> m_mats;
    for (const auto &view : dataset.views)
        m_mats.push_back(build_m(lle_weights(view, config.neighbors, config.reg)));

    GcmfResult result;
    std::vector<Matrix> u;
    for (Index v = 0; v < m; ++v) {
        ViewEmbedding e = update_view_embedding(v, m_mats[static_cast<std::size_t>(v)], {}, 0.0,
                                                config.dim_of(v));
        result.eigenvalue_tie = result.eigenvalue_tie || e.tie;
        u.push_back(std::move(e.u));
    }

    std::vector<Matrix> laplacians(static_cast<std::size_t>(m));
    for (int sweep = 1; sweep <= config.max_sweeps; ++sweep) {
        if (m > 1) {
            std::vector<char> fallback(static_cast<std::size_t>(m), 0);
            parallel_for(static_cast<std::size_t>(m), [&](std::size_t w) {
                ConsensusLaplacian l = consensus_laplacian(u[w], config.kernel, config.bandwidth);
                fallback[w] = l.zero_degree_fallback;
                laplacians[w] = std::move(l.laplacian);
            });
            for (char f : fallback) result.zero_degree_fallback = result.zero_degree_fallback || f;
        }
        const std::span<const Matrix> frozen =
            m > 1 ? std::span<const Matrix>(laplacians) : std::span<const Matrix>();

        SweepRecord rec;
        rec.sweep = sweep;
        rec.objective_start = gcmf_objective(u, m_mats, frozen, config.lambda_c);
        rec.steps.push_back(rec.objective_start);
        for (Index v = 0; v < m; ++v) {
            std::vector<Matrix> others;
            if (m > 1)
                for (Index w = 0; w < m; ++w)
                    if (w != v) others.push_back(laplacians[static_cast<std::size_t>(w)]);
            ViewEmbedding e = update_view_embedding(v, m_mats[static_cast<std::size_t>(v)], others,
                                                    config.lambda_c, config.dim_of(v));
            result.eigenvalue_tie = result.eigenvalue_tie || e.tie;
            u[static_cast<std::size_t>(v)] = std::move(e.u);
            rec.steps.push_back(gcmf_objective(u, m_mats, frozen, config.lambda_c));
        }
        rec.objective = rec.steps.back();
        const double previous =
            result.history.empty() ? rec.objective_start : result.history.back().objective;
        result.history.push_back(rec);
        result.sweeps = sweep;
        const double change = std::abs(rec.objective - previous) /
                              std::max(std::abs(previous), 1e-12);
        if (change < config.tol) {
            result.converged = true;
            break;
        }
    }
    result.embeddings = std::move(u);
    return result;
}

std::string gcmf_history_csv(const std::vector<SweepRecord> &history) {
    std::string out = "sweep,objective\n";
    std::array<char, 32> buf;
    for (const auto &r : history) {
        auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), r.objective);
        out += std::to_string(r.sweep) + "," + std::string(buf.data(), end) + "\n";
    }
    return out;
}

} // namespace mvtensor
