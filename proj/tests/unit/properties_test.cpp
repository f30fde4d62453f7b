#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>

#include "mvtensor/clustering.hpp"
#include "mvtensor/dataset_io.hpp"
#include "mvtensor/gcmf_lle.hpp"
#include "mvtensor/tcgf.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace mvtensor;

namespace {

double max_abs_diff(const Tensor3 &a, const Tensor3 &b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
    return m;
}

double squared_distance(const Tensor3 &a, const Tensor3 &b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a.values()[i] - b.values()[i]) * (a.values()[i] - b.values()[i]);
    return s;
}

} // namespace

TEST_CASE("t_product is associative") {
    std::mt19937_64 rng(70);
    for (int rep = 0; rep < 20; ++rep) {
        const Tensor3 a = oracle::random_tensor(rng, 3, 4, 5), b = oracle::random_tensor(rng, 4, 2, 5),
                      c = oracle::random_tensor(rng, 2, 3, 5);
        CHECK(max_abs_diff(t_product(t_product(a, b), c), t_product(a, t_product(b, c))) < 1e-8);
    }
}

TEST_CASE("prox output beats nearby perturbations") {
    // the thresholding solves 1/2||A-Z||^2 + (tau/n3)||Z||_{w,*}
    std::mt19937_64 rng(71);
    std::normal_distribution<double> nd(0.0, 1e-3);
    for (int rep = 0; rep < 5; ++rep) {
        const Index n3 = 3 + rep;
        const Tensor3 a = oracle::random_tensor(rng, 3, 3, n3);
        const double tau = 0.4;
        const WeightVector w = WeightVector::ones(3);
        const Tensor3 z = prox_weighted_tnn(a, tau, w);
        auto objective = [&](const Tensor3 &t) {
            return 0.5 * squared_distance(a, t) + tau / static_cast<double>(n3) * weighted_tnn(t, w);
        };
        const double best = objective(z);
        for (int s = 0; s < 1000; ++s) {
            Tensor3 p = z;
            for (auto &v : p.values()) v += nd(rng);
            CHECK(best <= objective(p) + 1e-12);
        }
    }
}

TEST_CASE("graph rows sum to one and kNN graphs are symmetric") {
    std::mt19937_64 rng(72);
    for (int rep = 0; rep < 5; ++rep) {
        const FeatureMatrix x(oracle::random_matrix(rng, 25, 4));
        const Matrix anchors = oracle::random_matrix(rng, 8, 4);
        const ViewGraph b = bipartite_graph(x, anchors, 4);
        const ViewGraph l = lle_weights(x, 5, 1e-3);
        CHECK((b.values.rowwise().sum().array() - 1).abs().maxCoeff() <= 1e-10);
        CHECK((l.values.rowwise().sum().array() - 1).abs().maxCoeff() <= 1e-10);
        CHECK(b.values.minCoeff() >= 0);
        for (Index i = 0; i < 25; ++i) {
            std::vector<std::pair<double, double>> dw;
            for (Index j = 0; j < 8; ++j) dw.push_back({(x.values().row(i) - anchors.row(j)).squaredNorm(), b.values(i, j)});
            std::sort(dw.begin(), dw.end());
            for (std::size_t j = 1; j < dw.size(); ++j) CHECK(dw[j].second <= dw[j - 1].second + 1e-15);
        }
        const ViewGraph g = gaussian_knn_graph(x, 4);
        CHECK(g.values == g.values.transpose());
        CHECK(g.values.diagonal().cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("svd anchors follow the points under row permutation") {
    std::mt19937_64 rng(73);
    const Matrix x = oracle::random_matrix(rng, 30, 5);
    std::vector<Index> perm(30);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix px(30, 5);
    for (Index i = 0; i < 30; ++i) px.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
    MultiViewDataset a, b;
    a.views.emplace_back(x);
    b.views.emplace_back(px);
    const AnchorSet sa = select_anchors_svd(a, 6), sb = select_anchors_svd(b, 6);
    std::vector<Index> mapped;
    for (Index i : sb.indices) mapped.push_back(perm[static_cast<std::size_t>(i)]);
    std::sort(mapped.begin(), mapped.end());
    CHECK(mapped == sa.indices);
}

TEST_CASE("update_f keeps the joint embedding orthonormal") {
    std::mt19937_64 rng(74);
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<Matrix> g;
        for (int v = 0; v < 3; ++v) g.push_back(oracle::random_row_stochastic(rng, 15, 6));
        const Vector alpha = update_alpha(oracle::random_matrix(rng, 3, 1, 0.1, 1).col(0), 0.5);
        const EmbeddingUpdate f = update_f(g, alpha, 0.5, 4);
        const Matrix gram = f.f_s.transpose() * f.f_s + f.f_a.transpose() * f.f_a;
        CHECK((gram - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("update_alpha is scale invariant and never beaten by the grid") {
    std::mt19937_64 rng(75);
    for (int rep = 0; rep < 20; ++rep) {
        const Vector h = oracle::random_matrix(rng, 3, 1, 0.01, 5).col(0);
        const Vector a = update_alpha(h, 0.5);
        CHECK((update_alpha(7.5 * h, 0.5) - a).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(std::abs(a.sum() - 1) <= 1e-10);
        CHECK(a.minCoeff() >= 0);
        double val = 0;
        for (Index v = 0; v < 3; ++v) val += std::sqrt(a(v)) * h(v);
        CHECK(oracle::simplex_grid_max(h, 0.5, 10000) <= val + 1e-12);
    }
}

TEST_CASE("update_e and update_z do not increase their subproblems") {
    std::mt19937_64 rng(76);
    std::normal_distribution<double> nd(0.0, 1e-2);
    const Matrix b = oracle::random_row_stochastic(rng, 5, 4), g = oracle::random_row_stochastic(rng, 5, 4),
                 y = oracle::random_matrix(rng, 5, 4);
    const double mu = 1.3, lambda_e = 0.2;
    const Matrix e = update_e(b, g, y, mu, lambda_e);
    auto e_obj = [&](const Matrix &x) {
        const Matrix r = b - g - x;
        return lambda_e * x.cwiseAbs().sum() + (y.array() * r.array()).sum() + 0.5 * mu * r.squaredNorm();
    };
    for (int s = 0; s < 1000; ++s) {
        Matrix p = e;
        for (Index i = 0; i < p.size(); ++i) p.data()[i] += nd(rng);
        CHECK(e_obj(e) <= e_obj(p) + 1e-12);
    }

    const Tensor3 gt = oracle::random_tensor(rng, 5, 2, 4), yt = oracle::random_tensor(rng, 5, 2, 4);
    const double rho = 2.0, lambda_r = 0.5;
    const WeightVector w = WeightVector::ones(2);
    const Tensor3 z = update_z(gt, yt, rho, lambda_r, w);
    auto z_obj = [&](const Tensor3 &t) {
        double lin = 0;
        for (std::size_t i = 0; i < t.size(); ++i) lin += yt.values()[i] * (gt.values()[i] - t.values()[i]);
        return lambda_r / 4.0 * weighted_tnn(t, w) + lin + 0.5 * rho * squared_distance(gt, t);
    };
    for (int s = 0; s < 1000; ++s) {
        Tensor3 p = z;
        for (auto &v : p.values()) v += nd(rng);
        CHECK(z_obj(z) <= z_obj(p) + 1e-12);
    }
}

TEST_CASE("converged solves satisfy the residual bound and simplex constraints") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        BlobSpec spec;
        spec.n_per_cluster = 30;
        spec.dims = {5, 7, 9};
        spec.noise_sigmas = {0.8, 1.0, 1.2};
        spec.seed = seed;
        const MultiViewDataset d = make_synthetic_blobs(spec);
        TcgfConfig c;
        const TcgfResult r = solve_tcgf(d, select_anchors_kmeans(d, 15, seed), 4, c);
        CHECK(static_cast<int>(r.history.size()) == r.iterations);
        if (r.converged) {
            CHECK(r.history.back().res_graph_inf < c.tol);
            CHECK(r.history.back().res_tensor_inf < c.tol);
        }
        for (const auto &rec : r.history) {
            CHECK(std::abs(rec.alpha.sum() - 1) <= 1e-10);
            CHECK(rec.alpha.minCoeff() >= 0);
            CHECK(std::isfinite(rec.objective));
        }
        const Matrix gram = r.embedding.transpose() * r.embedding + r.anchor_embedding.transpose() * r.anchor_embedding;
        CHECK((gram - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("graph updates stay on the simplex") {
    std::mt19937_64 rng(77);
    for (int rep = 0; rep < 20; ++rep) {
        const Matrix b = oracle::random_row_stochastic(rng, 6, 4), e = oracle::random_matrix(rng, 6, 4),
                     y = oracle::random_matrix(rng, 6, 4, -3, 3), z = oracle::random_matrix(rng, 6, 4),
                     yt = oracle::random_matrix(rng, 6, 4), fs = oracle::random_matrix(rng, 6, 2),
                     fa = oracle::random_matrix(rng, 4, 2);
        const Vector deg = Vector::Constant(4, 1.5);
        const Matrix g = update_g(GraphUpdateInputs{b, e, y, z, yt, fs, fa, deg, GraphNormalization::Symmetric,
                                                    0.4, 0.5, 0.7, 1.1});
        CHECK(g.minCoeff() >= 0);
        CHECK((g.rowwise().sum().array() - 1).abs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("eigen-subproblem trace equals the eigenvalue sum") {
    std::mt19937_64 rng(78);
    for (int rep = 0; rep < 10; ++rep) {
        const Matrix s = oracle::random_row_stochastic(rng, 12, 12);
        const Matrix m = build_m(ViewGraph{s, GraphKind::Lle, true});
        CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(m).eigenvalues().minCoeff() >= -1e-10);
        const ViewEmbedding e = smallest_eigenvectors(m, 3);
        CHECK(std::abs((e.u * m * e.u.transpose()).trace() - e.eigenvalues.sum()) <= 1e-8);
        CHECK((e.u * e.u.transpose() - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("accuracy is one exactly for relabelings") {
    std::mt19937_64 rng(79);
    std::uniform_int_distribution<int> lab(0, 3);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<int> t(20);
        for (auto &v : t) v = lab(rng);
        std::vector<int> perm{3, 1, 0, 2};
        std::vector<int> p(20);
        for (std::size_t i = 0; i < 20; ++i) p[i] = perm[static_cast<std::size_t>(t[i])];
        CHECK(accuracy(LabelVector(p), LabelVector(t)) == 1.0);
        p[static_cast<std::size_t>(rep % 20)] = (p[static_cast<std::size_t>(rep % 20)] + 1) % 4;
        CHECK(accuracy(LabelVector(p), LabelVector(t)) < 1.0);
    }
}

TEST_CASE("loaders reject non-finite values") {
    TempDir dir;
    Matrix m = Matrix::Ones(2, 2);
    save_matrix(dir / "ok.mvb", MatrixFormat::Mvb, m);
    std::string bytes = read_file(dir / "ok.mvb");
    const double inf = std::numeric_limits<double>::infinity();
    std::memcpy(bytes.data() + 12 + 8 * 3, &inf, 8);
    write_file_atomic(dir / "inf.mvb", bytes);
    CHECK_THROWS_WITH_AS(load_matrix(dir / "inf.mvb", MatrixFormat::Mvb), doctest::Contains("row 2"), FormatError);
    CHECK_THROWS_WITH_AS(matrix_from_csv("1,2\n3,-inf\n"), doctest::Contains("row 2"), FormatError);
}
