#include "mvtensor/tensor_algebra.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>

#include <Eigen/SVD>
#include <fftw3.h>

#include "mvtensor/parallel.hpp"

namespace mvtensor {

namespace {

using Complex = std::complex<double>;

// The FFTW planner is not re-entrant.
std::mutex &planner_mutex() {
    static std::mutex m;
    return m;
}

struct PlanDeleter {
    void operator()(fftw_plan_s *p) const {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(p);
    }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

// In-place DFT of every tube t(i, j, :) of a slice-major buffer.
void transform_tubes(Complex *data, Index n1n2, Index n3, int sign) {
    if (n3 == 1) return;
    const int n = static_cast<int>(n3);
    const int stride = static_cast<int>(n1n2);
    auto *buf = reinterpret_cast<fftw_complex *>(data);
    Plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan.reset(fftw_plan_many_dft(1, &n, stride, buf, nullptr, stride, 1, buf,
                                      nullptr, stride, 1, sign, FFTW_ESTIMATE));
    }
    if (!plan) throw NumericalError("FFTW could not plan a length-" + std::to_string(n3) +
                                    " transform");
    fftw_execute(plan.get());
}

// Slices whose Fourier transform is its own conjugate (0 and, for even n3, n3/2)
// are real for real input.
bool self_conjugate(Index j, Index n3) { return (2 * j) % n3 == 0; }

std::vector<Index> slices_to_compute(Index n3, SliceMode mode) {
    std::vector<Index> out;
    const Index last = mode == SliceMode::Full ? n3 - 1 : n3 / 2;
    for (Index j = 0; j <= last; ++j) out.push_back(j);
    return out;
}

// Copies conj(slice j) into slice n3 - j for every computed j.
void mirror_conjugates(ComplexTensor3 &t) {
    const Index n3 = t.n3();
    for (Index j = 1; j <= n3 / 2; ++j) {
        if (n3 - j == j) continue;
        t.slice(n3 - j) = t.slice(j).conjugate();
    }
}

void require_weights(const Tensor3 &a, const WeightVector &w) {
    const Index count = std::min(a.n1(), a.n2());
    if (w.size() != count)
        throw ValidationError("weight vector has length " + std::to_string(w.size()) +
                              " but tensor " + a.shape() + " has " +
                              std::to_string(count) + " singular values per slice");
}

Vector slice_singular_values(const ComplexTensor3 &f, Index j) {
    if (self_conjugate(j, f.n3())) {
        Eigen::JacobiSVD<Matrix> svd(f.slice(j).real());
        return svd.singularValues();
    }
    Eigen::JacobiSVD<ComplexMatrix> svd(f.slice(j));
    return svd.singularValues();
}

} // namespace

WeightVector::WeightVector(std::vector<double> omega) : omega_{std::move(omega)} {
    if (omega_.empty()) throw ValidationError("weight vector must not be empty");
    for (double w : omega_)
        if (!(w > 0) || !std::isfinite(w))
            throw ValidationError("weights must be finite and strictly positive");
}

WeightVector WeightVector::ones(Index count) {
    return WeightVector(std::vector<double>(static_cast<std::size_t>(count), 1.0));
}

ComplexTensor3 fft3(const Tensor3 &t) {
    ComplexTensor3 out(t.n1(), t.n2(), t.n3());
    std::copy(t.values().begin(), t.values().end(), out.values().begin());
    transform_tubes(out.values().data(), t.n1() * t.n2(), t.n3(), FFTW_FORWARD);
    return out;
}

ComplexTensor3 ifft3_complex(const ComplexTensor3 &t) {
    ComplexTensor3 out = t;
    transform_tubes(out.values().data(), t.n1() * t.n2(), t.n3(), FFTW_BACKWARD);
    const double scale = 1.0 / static_cast<double>(t.n3());
    for (auto &v : out.values()) v *= scale;
    return out;
}

Tensor3 ifft3(const ComplexTensor3 &t) {
    const ComplexTensor3 c = ifft3_complex(t);
    Tensor3 out(t.n1(), t.n2(), t.n3());
    double max_real = 1.0, max_imag = 0.0;
    auto dst = out.values();
    auto src = c.values();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = src[i].real();
        max_real = std::max(max_real, std::abs(src[i].real()));
        max_imag = std::max(max_imag, std::abs(src[i].imag()));
    }
    if (max_imag > 1e-8 * max_real)
        throw NumericalError("inverse transform left an imaginary residue of " +
                             std::to_string(max_imag));
    return out;
}

Tensor3 identity_tensor(Index n, Index n3) {
    Tensor3 out(n, n, n3);
    for (Index i = 0; i < n; ++i) out(i, i, 0) = 1.0;
    return out;
}

Tensor3 transpose(const Tensor3 &t) {
    Tensor3 out(t.n2(), t.n1(), t.n3());
    for (Index k = 0; k < t.n3(); ++k) {
        const Index src = k == 0 ? 0 : t.n3() - k;
        out.slice(k) = t.slice(src).transpose();
    }
    return out;
}

Tensor3 t_product(const Tensor3 &a, const Tensor3 &b) {
    if (a.n2() != b.n1() || a.n3() != b.n3())
        throw ShapeError("t-product needs a.n2 == b.n1 and a.n3 == b.n3, got " +
                         a.shape() + " and " + b.shape());
    const ComplexTensor3 fa = fft3(a);
    const ComplexTensor3 fb = fft3(b);
    ComplexTensor3 fc(a.n1(), b.n2(), a.n3());
    for (Index k = 0; k < a.n3(); ++k) fc.slice(k).noalias() = fa.slice(k) * fb.slice(k);
    return ifft3(fc);
}

TSvdFactors t_svd(const Tensor3 &a) {
    const Index n1 = a.n1(), n2 = a.n2(), n3 = a.n3();
    const ComplexTensor3 f = fft3(a);
    ComplexTensor3 fu(n1, n1, n3), fs(n1, n2, n3), fv(n2, n2, n3);
    const auto slices = slices_to_compute(n3, SliceMode::ConjugateSymmetric);
    parallel_for(slices.size(), [&](std::size_t idx) {
        const Index j = slices[idx];
        ComplexMatrix u, v;
        Vector sigma;
        if (self_conjugate(j, n3)) {
            Eigen::JacobiSVD<Matrix> svd(f.slice(j).real(),
                                         Eigen::ComputeFullU | Eigen::ComputeFullV);
            u = svd.matrixU().cast<Complex>();
            v = svd.matrixV().cast<Complex>();
            sigma = svd.singularValues();
        } else {
            Eigen::JacobiSVD<ComplexMatrix> svd(f.slice(j),
                                                Eigen::ComputeFullU | Eigen::ComputeFullV);
            u = svd.matrixU();
            v = svd.matrixV();
            sigma = svd.singularValues();
        }
        fu.slice(j) = u;
        fv.slice(j) = v;
        auto s = fs.slice(j);
        for (Index i = 0; i < sigma.size(); ++i) s(i, i) = sigma(i);
    });
    mirror_conjugates(fu);
    mirror_conjugates(fs);
    mirror_conjugates(fv);
    return TSvdFactors{ifft3(fu), ifft3(fs), ifft3(fv)};
}

Matrix fourier_singular_values(const Tensor3 &a, SliceMode mode) {
    const Index n3 = a.n3();
    const ComplexTensor3 f = fft3(a);
    Matrix out(std::min(a.n1(), a.n2()), n3);
    const auto slices = slices_to_compute(n3, mode);
    parallel_for(slices.size(), [&](std::size_t idx) {
        const Index j = slices[idx];
        out.col(j) = slice_singular_values(f, j);
    });
    if (mode == SliceMode::ConjugateSymmetric)
        for (Index j = 1; j <= n3 / 2; ++j)
            if (n3 - j != j) out.col(n3 - j) = out.col(j);
    return out;
}

double weighted_tnn(const Tensor3 &a, const WeightVector &w, SliceMode mode) {
    require_weights(a, w);
    const Matrix sigma = fourier_singular_values(a, mode);
    double total = 0;
    for (Index j = 0; j < sigma.cols(); ++j)
        for (Index i = 0; i < sigma.rows(); ++i) total += w[i] * std::abs(sigma(i, j));
    return total;
}

ProxOutput prox_weighted_tnn_with_norm(const Tensor3 &a, double tau, const WeightVector &w,
                                       SliceMode mode) {
    if (!(tau > 0) || !std::isfinite(tau))
        throw ValidationError("prox threshold tau must be positive, got " +
                              std::to_string(tau));
    require_weights(a, w);
    const Index n3 = a.n3();
    const double scale = tau;
    ComplexTensor3 f = fft3(a);
    const auto slices = slices_to_compute(n3, mode);
    std::vector<double> slice_norm(static_cast<std::size_t>(n3), 0.0);
    parallel_for(slices.size(), [&](std::size_t idx) {
        const Index j = slices[idx];
        auto slice = f.slice(j);
        Eigen::JacobiSVD<ComplexMatrix> svd(slice, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Vector &sigma = svd.singularValues();
        Index rank = 0;
        Vector shrunk(sigma.size());
        double norm = 0;
        for (Index i = 0; i < sigma.size(); ++i) {
            shrunk(i) = std::max(sigma(i) - scale * w[i], 0.0);
            norm += w[i] * shrunk(i);
            if (shrunk(i) > 0) rank = i + 1;
        }
        slice_norm[static_cast<std::size_t>(j)] = norm;
        if (rank == 0) {
            slice.setZero();
            return;
        }
        slice.noalias() = svd.matrixU().leftCols(rank) *
                          shrunk.head(rank).cast<Complex>().asDiagonal() *
                          svd.matrixV().leftCols(rank).adjoint();
    });
    if (mode == SliceMode::ConjugateSymmetric) {
        mirror_conjugates(f);
        for (Index j = 1; j <= n3 / 2; ++j)
            if (n3 - j != j)
                slice_norm[static_cast<std::size_t>(n3 - j)] = slice_norm[static_cast<std::size_t>(j)];
    }
    ProxOutput out{ifft3(f), 0.0};
    for (double v : slice_norm) out.norm += v;
    return out;
}

Tensor3 prox_weighted_tnn(const Tensor3 &a, double tau, const WeightVector &w,
                          SliceMode mode) {
    return prox_weighted_tnn_with_norm(a, tau, w, mode).value;
}

Tensor3 stack_rotate(std::span<const Matrix> graphs) {
    if (graphs.empty()) throw ValidationError("stack_rotate needs at least one graph");
    const Index n = graphs.front().rows(), k = graphs.front().cols();
    const Index m = static_cast<Index>(graphs.size());
    for (Index v = 0; v < m; ++v) {
        const auto &g = graphs[static_cast<std::size_t>(v)];
        if (g.rows() != n || g.cols() != k)
            throw ShapeError("graph " + std::to_string(v) + " has shape " +
                             std::to_string(g.rows()) + "x" + std::to_string(g.cols()) +
                             ", expected " + std::to_string(n) + "x" + std::to_string(k));
    }
    Tensor3 out(n, m, k);
    for (Index v = 0; v < m; ++v) {
        const auto &g = graphs[static_cast<std::size_t>(v)];
        for (Index kk = 0; kk < k; ++kk)
            for (Index i = 0; i < n; ++i) out(i, v, kk) = g(i, kk);
    }
    return out;
}

Matrix lateral_slice(const Tensor3 &t, Index v) {
    Matrix out(t.n1(), t.n3());
    for (Index k = 0; k < t.n3(); ++k)
        for (Index i = 0; i < t.n1(); ++i) out(i, k) = t(i, v, k);
    return out;
}

std::vector<Matrix> unstack_rotate(const Tensor3 &t) {
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(t.n2()));
    for (Index v = 0; v < t.n2(); ++v) out.push_back(lateral_slice(t, v));
    return out;
}

} // namespace mvtensor
