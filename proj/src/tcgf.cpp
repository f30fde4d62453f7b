#include "mvtensor/tcgf.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <random>

#include <Eigen/SVD>

namespace mvtensor {

namespace {

std::string fmt(double v) {
    std::array<char, 32> buf;
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), end);
}

void require_positive(double v, const char *name) {
    if (!(v > 0) || !std::isfinite(v))
        throw ValidationError(std::string(name) + " must be positive, got " + fmt(v));
}

double max_abs(const Matrix &m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

// Replaces columns [from, d) of u with a seeded orthonormal completion of
// the preceding columns.
void complete_orthonormal(Matrix &u, Index from, std::mt19937_64 &rng) {
    std::normal_distribution<double> gauss;
    for (Index c = from; c < u.cols(); ++c) {
        for (int attempt = 0; attempt < 16; ++attempt) {
            Vector v(u.rows());
            for (Index i = 0; i < v.size(); ++i) v(i) = gauss(rng);
            for (int pass = 0; pass < 2; ++pass)
                for (Index p = 0; p < c; ++p) v -= u.col(p).dot(v) * u.col(p);
            const double norm = v.norm();
            if (norm > 1e-8) {
                u.col(c) = v / norm;
                break;
            }
        }
    }
}

void check_bipartite(std::span<const Matrix> b) {
    if (b.empty()) throw ValidationError("at least one view graph is required");
    const Index n = b.front().rows(), k = b.front().cols();
    for (std::size_t v = 0; v < b.size(); ++v) {
        const Matrix &g = b[v];
        if (g.rows() != n || g.cols() != k)
            throw ShapeError("graph of view " + std::to_string(v) + " is " +
                             std::to_string(g.rows()) + "x" + std::to_string(g.cols()) +
                             ", expected " + std::to_string(n) + "x" + std::to_string(k));
        if (!g.allFinite() || (g.array() < 0).any())
            throw ValidationError("graph of view " + std::to_string(v) +
                                  " must be finite and nonnegative");
        const Vector rows = g.rowwise().sum();
        if ((rows.array() - 1.0).abs().maxCoeff() > 1e-8)
            throw ValidationError("graph of view " + std::to_string(v) + " is not row-stochastic");
    }
}

template <class Fn>
auto with_context(int iter, const char *step, Fn &&fn) {
    const std::string ctx = "iteration " + std::to_string(iter) + ", " + step + ": ";
    try {
        return fn();
    } catch (const ValidationError &e) {
        throw ValidationError(ctx + e.what());
    } catch (const ShapeError &e) {
        throw ShapeError(ctx + e.what());
    } catch (const Error &e) {
        throw NumericalError(ctx + e.what());
    }
}

} // namespace

std::string to_string(GraphNormalization n) {
    return n == GraphNormalization::Column ? "column" : "symmetric";
}

GraphNormalization parse_graph_normalization(const std::string &s) {
    if (s == "symmetric") return GraphNormalization::Symmetric;
    if (s == "column") return GraphNormalization::Column;
    throw ValidationError("unknown graph normalization '" + s +
                          "' (expected symmetric or column)");
}

Matrix normalize_graph(const Matrix &g, const Vector &degree, GraphNormalization mode) {
    if (degree.size() != g.cols()) throw ShapeError("degree vector does not match graph columns");
    const Vector scale = mode == GraphNormalization::Column
                             ? Vector(degree.cwiseInverse())
                             : Vector(degree.cwiseSqrt().cwiseInverse());
    return g * scale.asDiagonal();
}

void TcgfConfig::validate(Index samples, Index anchors, Index views) const {
    require_positive(lambda_e, "lambda_e");
    require_positive(lambda_r, "lambda_r");
    if (!(gamma > 0 && gamma < 1))
        throw ValidationError("gamma must lie in (0, 1), got " + fmt(gamma));
    if (dim < 1 || dim > std::min(samples, anchors))
        throw ValidationError("embedding dimension must be in [1, " +
                              std::to_string(std::min(samples, anchors)) + "], got " +
                              std::to_string(dim));
    require_positive(mu0, "mu0");
    require_positive(rho0, "rho0");
    if (!(eta > 1) || !std::isfinite(eta))
        throw ValidationError("penalty growth eta must exceed 1, got " + fmt(eta));
    if (!(penalty_cap >= std::max(mu0, rho0)))
        throw ValidationError("penalty cap must be at least the initial penalties");
    require_positive(tol, "tol");
    if (max_iter < 1) throw ValidationError("max_iter must be at least 1");
    if (omega && omega->size() != std::min(samples, views))
        throw ValidationError("omega must have " + std::to_string(std::min(samples, views)) +
                              " entries, got " + std::to_string(omega->size()));
}

Matrix fused_graph(std::span<const Matrix> normalized, const Vector &alpha, double gamma) {
    if (normalized.empty() || static_cast<Index>(normalized.size()) != alpha.size())
        throw ShapeError("need one view weight per graph");
    Matrix fused = Matrix::Zero(normalized.front().rows(), normalized.front().cols());
    for (std::size_t v = 0; v < normalized.size(); ++v)
        fused += std::pow(alpha(static_cast<Index>(v)), gamma) * normalized[v];
    return fused;
}

EmbeddingUpdate update_f(std::span<const Matrix> normalized, const Vector &alpha, double gamma,
                         Index dim, std::uint64_t seed) {
    const Matrix fused = fused_graph(normalized, alpha, gamma);
    if (dim < 1 || dim > std::min(fused.rows(), fused.cols()))
        throw ValidationError("embedding dimension " + std::to_string(dim) +
                              " exceeds the graph size");
    Eigen::BDCSVD<Matrix> svd(fused, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector &sigma = svd.singularValues();
    Matrix u = svd.matrixU().leftCols(dim);
    Matrix v = svd.matrixV().leftCols(dim);

    Index rank = 0;
    const double cutoff = sigma.size() && sigma(0) > 0 ? 1e-12 * sigma(0) : 0.0;
    while (rank < std::min<Index>(dim, sigma.size()) && sigma(rank) > cutoff) ++rank;

    EmbeddingUpdate out;
    if (rank < dim) {
        out.rank_deficient = true;
        std::mt19937_64 rng(seed);
        complete_orthonormal(u, rank, rng);
        complete_orthonormal(v, rank, rng);
    }
    for (Index c = 0; c < dim; ++c) {
        Index arg = 0;
        u.col(c).cwiseAbs().maxCoeff(&arg);
        if (u(arg, c) < 0) {
            u.col(c) *= -1;
            v.col(c) *= -1;
        }
    }
    const double half = std::sqrt(2.0) / 2.0;
    out.f_s = half * u;
    out.f_a = half * v;
    return out;
}

Tensor3 update_z(const Tensor3 &g, const Tensor3 &y, double rho, double lambda_r,
                 const WeightVector &omega) {
    require_positive(rho, "rho");
    if (g.n1() != y.n1() || g.n2() != y.n2() || g.n3() != y.n3())
        throw ShapeError("graph tensor " + g.shape() + " and multiplier " + y.shape() +
                         " differ in shape");
    Tensor3 target = g;
    auto dst = target.values();
    auto src = y.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i] / rho;
    return prox_weighted_tnn(target, lambda_r / rho, omega);
}

Vector project_simplex(const Vector &v) {
    if (v.size() == 0) throw ValidationError("cannot project an empty vector onto the simplex");
    if (!v.allFinite()) throw ValidationError("simplex projection input must be finite");
    std::vector<double> u(v.data(), v.data() + v.size());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumsum = 0, theta = 0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        cumsum += u[j];
        const double t = (cumsum - 1.0) / static_cast<double>(j + 1);
        if (u[j] - t > 0) theta = t;
    }
    return (v.array() - theta).cwiseMax(0.0);
}

namespace {

// Gradient of the agreement term with respect to G, degree held fixed.
Matrix consensus_term(const GraphUpdateInputs &in) {
    return normalize_graph(in.f_s * in.f_a.transpose(), in.degree, in.normalization);
}

void check_graph_inputs(const GraphUpdateInputs &in) {
    require_positive(in.mu, "mu");
    require_positive(in.rho, "rho");
    const Index n = in.b.rows(), k = in.b.cols();
    for (const Matrix *m : {&in.e, &in.y, &in.z_slice, &in.y_tensor_slice})
        if (m->rows() != n || m->cols() != k)
            throw ShapeError("graph update operands must all be " + std::to_string(n) + "x" +
                             std::to_string(k));
    if (in.f_s.rows() != n || in.f_a.rows() != k || in.degree.size() != k)
        throw ShapeError("embedding or degree shape does not match the graph");
}

} // namespace

Matrix update_g(const GraphUpdateInputs &in) {
    check_graph_inputs(in);
    const double total = in.mu + in.rho;
    const Matrix target =
        (in.mu * (in.b - in.e) + in.y + in.rho * in.z_slice - in.y_tensor_slice) / total +
        (std::pow(in.alpha, in.gamma) / total) * consensus_term(in);
    Matrix g(target.rows(), target.cols());
    for (Index i = 0; i < target.rows(); ++i)
        g.row(i) = project_simplex(target.row(i).transpose()).transpose();
    return g;
}

double graph_subproblem_objective(const Matrix &g, const GraphUpdateInputs &in) {
    const Matrix r1 = in.b - g - in.e;
    const Matrix r2 = g - in.z_slice;
    return (in.y.array() * r1.array()).sum() + 0.5 * in.mu * r1.squaredNorm() +
           (in.y_tensor_slice.array() * r2.array()).sum() + 0.5 * in.rho * r2.squaredNorm() -
           std::pow(in.alpha, in.gamma) * (consensus_term(in).array() * g.array()).sum();
}

Matrix update_e(const Matrix &b, const Matrix &g, const Matrix &y, double mu, double lambda_e) {
    require_positive(mu, "mu");
    if (lambda_e < 0) throw ValidationError("lambda_e must be nonnegative");
    const double t = lambda_e / mu;
    const Matrix gamma_mat = b - g + y / mu;
    return gamma_mat.unaryExpr([t](double x) {
        const double mag = std::max(std::abs(x) - t, 0.0);
        return x < 0 ? -mag : mag;
    });
}

Vector update_alpha(const Vector &h, double gamma) {
    if (!(gamma > 0 && gamma < 1))
        throw ValidationError("gamma must lie in (0, 1), got " + fmt(gamma));
    if (h.size() == 0) throw ValidationError("agreement vector is empty");
    const double p = 1.0 / (1.0 - gamma);
    Vector logw = h.cwiseMax(1e-12).array().log() * p;
    const double top = logw.maxCoeff();
    Vector w = (logw.array() - top).exp();
    return w / w.sum();
}

double graph_agreement(const Matrix &consensus, const Matrix &g, const Vector &degree,
                       GraphNormalization mode) {
    return (consensus.array() * normalize_graph(g, degree, mode).array()).sum();
}

void update_multipliers(TcgfState &state, std::span<const Matrix> b, double eta, double cap) {
    for (std::size_t v = 0; v < b.size(); ++v)
        state.y[v] += state.mu * (b[v] - state.g[v] - state.e[v]);
    const Tensor3 g = stack_rotate(state.g);
    auto y = state.y_tensor.values();
    auto gv = g.values();
    auto zv = state.z.values();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += state.rho * (gv[i] - zv[i]);
    state.mu = std::min(eta * state.mu, cap);
    state.rho = std::min(eta * state.rho, cap);
}

TcgfResult solve_tcgf(std::span<const Matrix> bipartite, const TcgfConfig &config) {
    check_bipartite(bipartite);
    const Index n = bipartite.front().rows(), k = bipartite.front().cols();
    const Index m = static_cast<Index>(bipartite.size());
    config.validate(n, k, m);
    const WeightVector omega = config.omega ? *config.omega : WeightVector::ones(std::min(n, m));

    TcgfState s;
    s.g.assign(bipartite.begin(), bipartite.end());
    s.e.assign(bipartite.size(), Matrix::Zero(n, k));
    s.y.assign(bipartite.size(), Matrix::Zero(n, k));
    s.z = stack_rotate(s.g);
    s.y_tensor = Tensor3(n, m, k);
    s.alpha = Vector::Constant(m, 1.0 / static_cast<double>(m));
    for (const auto &g : s.g) s.degree.push_back(column_degrees(g));
    s.mu = config.mu0;
    s.rho = config.rho0;

    TcgfResult result;
    for (int iter = 1; iter <= config.max_iter; ++iter) {
        std::vector<Matrix> normalized;
        normalized.reserve(s.g.size());
        for (std::size_t v = 0; v < s.g.size(); ++v)
            normalized.push_back(normalize_graph(s.g[v], s.degree[v], config.normalization));
        const EmbeddingUpdate f = with_context(iter, "embedding update", [&] {
            return update_f(normalized, s.alpha, config.gamma, config.dim, config.seed);
        });
        s.f_s = f.f_s;
        s.f_a = f.f_a;
        result.rank_deficient = result.rank_deficient || f.rank_deficient;

        const double tensor_norm = with_context(iter, "tensor update", [&] {
            Tensor3 target = stack_rotate(s.g);
            auto dst = target.values();
            auto src = s.y_tensor.values();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i] / s.rho;
            ProxOutput p = prox_weighted_tnn_with_norm(target, config.lambda_r / s.rho, omega);
            s.z = std::move(p.value);
            return p.norm;
        });

        with_context(iter, "graph update", [&] {
            for (std::size_t v = 0; v < s.g.size(); ++v) {
                const Matrix z_slice = lateral_slice(s.z, static_cast<Index>(v));
                const Matrix y_slice = lateral_slice(s.y_tensor, static_cast<Index>(v));
                s.g[v] = update_g({bipartite[v], s.e[v], s.y[v], z_slice, y_slice, s.f_s, s.f_a,
                                   s.degree[v], config.normalization,
                                   s.alpha(static_cast<Index>(v)), config.gamma,
                                   s.mu, s.rho});
            }
            return 0;
        });
        with_context(iter, "error update", [&] {
            for (std::size_t v = 0; v < s.g.size(); ++v)
                s.e[v] = update_e(bipartite[v], s.g[v], s.y[v], s.mu, config.lambda_e);
            return 0;
        });

        for (std::size_t v = 0; v < s.g.size(); ++v) s.degree[v] = column_degrees(s.g[v]);
        const Matrix consensus = s.f_s * s.f_a.transpose();
        Vector h(m);
        for (Index v = 0; v < m; ++v)
            h(v) = graph_agreement(consensus, s.g[static_cast<std::size_t>(v)],
                                   s.degree[static_cast<std::size_t>(v)], config.normalization);
        s.alpha = with_context(iter, "view-weight update", [&] {
            return update_alpha(h, config.gamma);
        });

        IterationRecord rec;
        rec.iter = iter;
        rec.mu = s.mu;
        rec.rho = s.rho;
        rec.alpha = s.alpha;
        double l1 = 0;
        for (std::size_t v = 0; v < s.g.size(); ++v) {
            rec.res_graph_inf = std::max(rec.res_graph_inf, max_abs(bipartite[v] - s.g[v] - s.e[v]));
            l1 += s.e[v].cwiseAbs().sum();
        }
        {
            const Tensor3 g = stack_rotate(s.g);
            auto gv = g.values();
            auto zv = s.z.values();
            for (std::size_t i = 0; i < gv.size(); ++i)
                rec.res_tensor_inf = std::max(rec.res_tensor_inf, std::abs(gv[i] - zv[i]));
        }
        double agreement = 0;
        for (Index v = 0; v < m; ++v) agreement += std::pow(s.alpha(v), config.gamma) * h(v);
        rec.objective = -agreement + config.lambda_e * l1 + config.lambda_r * tensor_norm;
        s.history.push_back(rec);

        update_multipliers(s, bipartite, config.eta, config.penalty_cap);
        result.iterations = iter;
        if (std::max(rec.res_graph_inf, rec.res_tensor_inf) < config.tol) {
            result.converged = true;
            break;
        }
    }

    result.embedding = s.f_s;
    result.anchor_embedding = s.f_a;
    result.consensus_graph = s.f_s * s.f_a.transpose();
    result.alpha = s.alpha;
    result.history = std::move(s.history);
    return result;
}

TcgfResult solve_tcgf(const MultiViewDataset &dataset, const AnchorSet &anchors, Index knn,
                      const TcgfConfig &config) {
    dataset.validate();
    std::vector<Matrix> graphs;
    for (const auto &view : dataset.views)
        graphs.push_back(bipartite_graph(view, anchor_features(view, anchors), knn).values);
    return solve_tcgf(graphs, config);
}

std::vector<Matrix> full_graphs(const MultiViewDataset &dataset, Index knn) {
    dataset.validate();
    std::vector<Matrix> graphs;
    for (const auto &view : dataset.views) {
        Matrix s = gaussian_knn_graph(view, knn).values;
        const Vector rows = s.rowwise().sum();
        for (Index i = 0; i < s.rows(); ++i) {
            if (rows(i) > 0) {
                s.row(i) /= rows(i);
            } else {
                s.row(i).setConstant(1.0 / static_cast<double>(s.cols()));
            }
        }
        graphs.push_back(std::move(s));
    }
    return graphs;
}

std::string history_csv(const std::vector<IterationRecord> &history) {
    std::string out = "iter,objective,res_graph_inf,res_tensor_inf,mu,rho";
    const Index m = history.empty() ? 0 : history.front().alpha.size();
    for (Index v = 0; v < m; ++v) out += ",alpha_" + std::to_string(v + 1);
    out += "\n";
    for (const auto &r : history) {
        out += std::to_string(r.iter) + "," + fmt(r.objective) + "," + fmt(r.res_graph_inf) +
               "," + fmt(r.res_tensor_inf) + "," + fmt(r.mu) + "," + fmt(r.rho);
        for (Index v = 0; v < r.alpha.size(); ++v) out += "," + fmt(r.alpha(v));
        out += "\n";
    }
    return out;
}

} // namespace mvtensor
