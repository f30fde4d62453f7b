#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mvtensor/tensor3.hpp"

namespace mvtensor {

/// Feature matrix of one view: one row per sample, finite entries, at least
/// two samples.
class FeatureMatrix {
public:
    explicit FeatureMatrix(Matrix values);

    Index samples() const noexcept { return values_.rows(); }
    Index dim() const noexcept { return values_.cols(); }
    const Matrix &values() const noexcept { return values_; }

private:
    Matrix values_;
};

/// Cluster or class labels in [0, classes()).
class LabelVector {
public:
    LabelVector() = default;
    explicit LabelVector(std::vector<int> labels);

    Index size() const noexcept { return static_cast<Index>(labels_.size()); }
    int operator[](Index i) const { return labels_[static_cast<std::size_t>(i)]; }
    const std::vector<int> &values() const noexcept { return labels_; }
    /// max label + 1
    int classes() const noexcept { return classes_; }

private:
    std::vector<int> labels_;
    int classes_ = 0;
};

struct MultiViewDataset {
    std::string name;
    std::vector<FeatureMatrix> views;
    std::optional<LabelVector> labels;

    Index samples() const { return views.empty() ? 0 : views.front().samples(); }
    Index view_count() const { return static_cast<Index>(views.size()); }

    /// Throws ValidationError unless every view shares the sample count and
    /// the labels (when present) match it.
    void validate() const;
};

} // namespace mvtensor
