#pragma once

#include <span>
#include <vector>

#include "mvtensor/tensor3.hpp"

namespace mvtensor {

/// Strictly positive weights applied to the sorted singular values of every
/// Fourier-domain frontal slice.
class WeightVector {
public:
    explicit WeightVector(std::vector<double> omega);
    static WeightVector ones(Index count);

    Index size() const noexcept { return static_cast<Index>(omega_.size()); }
    double operator[](Index i) const { return omega_[static_cast<std::size_t>(i)]; }
    std::span<const double> values() const noexcept { return omega_; }

private:
    std::vector<double> omega_;
};

/// Factors of A = U * S * V^T under the t-product.
struct TSvdFactors {
    Tensor3 u; ///< n1 x n1 x n3, orthogonal
    Tensor3 s; ///< n1 x n2 x n3, f-diagonal
    Tensor3 v; ///< n2 x n2 x n3, orthogonal
};

/// How many Fourier slices the slice-wise routines decompose.
enum class SliceMode {
    /// Decompose slices 0..floor(n3/2) and mirror the rest by conjugation.
    ConjugateSymmetric,
    /// Decompose every slice independently.
    Full,
};

// DFT along the third axis. The forward transform is unnormalized; the
// inverse divides by n3.
ComplexTensor3 fft3(const Tensor3 &t);
ComplexTensor3 ifft3_complex(const ComplexTensor3 &t);

/// Inverse transform back to the reals. Imaginary residue up to 1e-8 (relative
/// to max(1, largest real magnitude)) is discarded; more raises NumericalError.
Tensor3 ifft3(const ComplexTensor3 &t);

/// Identity tensor: first frontal slice is I_n, the rest are zero.
Tensor3 identity_tensor(Index n, Index n3);

/// Tensor transpose: transpose each frontal slice, then reverse slices 2..n3.
Tensor3 transpose(const Tensor3 &t);

/// t-product a * b, evaluated as slice-wise products in the Fourier domain.
Tensor3 t_product(const Tensor3 &a, const Tensor3 &b);

TSvdFactors t_svd(const Tensor3 &a);

/// Sorted singular values of every Fourier slice; column j holds slice j.
Matrix fourier_singular_values(const Tensor3 &a,
                               SliceMode mode = SliceMode::ConjugateSymmetric);

/// Weighted t-SVD nuclear norm: sum over all n3 Fourier slices of
/// omega_i * sigma_i, sigma sorted non-increasing. No 1/n3 factor.
double weighted_tnn(const Tensor3 &a, const WeightVector &w,
                    SliceMode mode = SliceMode::ConjugateSymmetric);

/// Weighted singular-value thresholding in the Fourier domain: slice j is
/// shrunk as sigma_i <- max(sigma_i - tau*w_i, 0).
///
/// Since ||A - Z||_F^2 is (1/n3) times the Fourier-domain squared distance,
/// this is argmin_Z 1/2 ||A - Z||_F^2 + (tau/n3) * ||Z||_{w,*}; the 1/n3 is
/// absorbed into tau. Exact for nonincreasing weights.
Tensor3 prox_weighted_tnn(const Tensor3 &a, double tau, const WeightVector &w,
                          SliceMode mode = SliceMode::ConjugateSymmetric);

struct ProxOutput {
    Tensor3 value;
    double norm = 0; ///< weighted_tnn of value, read off the shrunk spectrum
};
ProxOutput prox_weighted_tnn_with_norm(const Tensor3 &a, double tau, const WeightVector &w,
                                       SliceMode mode = SliceMode::ConjugateSymmetric);

/// Stacks M graphs of shape N x K into an N x M x K tensor with
/// t(:, v, :) = graphs[v].
Tensor3 stack_rotate(std::span<const Matrix> graphs);
std::vector<Matrix> unstack_rotate(const Tensor3 &t);

/// Lateral slice t(:, v, :) as an n1 x n3 matrix.
Matrix lateral_slice(const Tensor3 &t, Index v);

} // namespace mvtensor
