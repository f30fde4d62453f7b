#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mvtensor/error.hpp"

namespace mvtensor {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;

/// Dense third-order tensor of shape n1 x n2 x n3.
///
/// Storage is slice-major: frontal slice k occupies a contiguous block of
/// n1*n2 values laid out row-major, so entry (i, j, k) lives at
/// (k*n1 + i)*n2 + j.
template <class Scalar>
class BasicTensor3 {
public:
    using RowMajorMatrix =
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using SliceMap = Eigen::Map<RowMajorMatrix>;
    using ConstSliceMap = Eigen::Map<const RowMajorMatrix>;

    BasicTensor3() = default;

    BasicTensor3(Index n1, Index n2, Index n3) : n1_{n1}, n2_{n2}, n3_{n3} {
        if (n1 <= 0 || n2 <= 0 || n3 <= 0)
            throw ShapeError("tensor dimensions must be positive, got " +
                             shape_string(n1, n2, n3));
        values_.assign(static_cast<std::size_t>(n1 * n2 * n3), Scalar{0});
    }

    BasicTensor3(Index n1, Index n2, Index n3, std::vector<Scalar> values)
        : n1_{n1}, n2_{n2}, n3_{n3}, values_{std::move(values)} {
        if (n1 <= 0 || n2 <= 0 || n3 <= 0)
            throw ShapeError("tensor dimensions must be positive, got " +
                             shape_string(n1, n2, n3));
        if (values_.size() != static_cast<std::size_t>(n1 * n2 * n3))
            throw ShapeError("value count " + std::to_string(values_.size()) +
                             " does not match shape " + shape_string(n1, n2, n3));
    }

    Index n1() const noexcept { return n1_; }
    Index n2() const noexcept { return n2_; }
    Index n3() const noexcept { return n3_; }
    std::size_t size() const noexcept { return values_.size(); }

    Scalar &operator()(Index i, Index j, Index k) {
        return values_[static_cast<std::size_t>((k * n1_ + i) * n2_ + j)];
    }
    const Scalar &operator()(Index i, Index j, Index k) const {
        return values_[static_cast<std::size_t>((k * n1_ + i) * n2_ + j)];
    }

    SliceMap slice(Index k) { return SliceMap(values_.data() + k * n1_ * n2_, n1_, n2_); }
    ConstSliceMap slice(Index k) const {
        return ConstSliceMap(values_.data() + k * n1_ * n2_, n1_, n2_);
    }

    std::span<Scalar> values() noexcept { return values_; }
    std::span<const Scalar> values() const noexcept { return values_; }

    std::string shape() const { return shape_string(n1_, n2_, n3_); }

    double frobenius_norm() const {
        double s = 0;
        for (const auto &v : values_) s += std::norm(v);
        return std::sqrt(s);
    }

    static std::string shape_string(Index n1, Index n2, Index n3) {
        return std::to_string(n1) + "x" + std::to_string(n2) + "x" + std::to_string(n3);
    }

private:
    Index n1_ = 0, n2_ = 0, n3_ = 0;
    std::vector<Scalar> values_;
};

using Tensor3 = BasicTensor3<double>;
using ComplexTensor3 = BasicTensor3<std::complex<double>>;

} // namespace mvtensor
