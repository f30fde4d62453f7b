#include "mvtensor/dataset.hpp"

#include <algorithm>

namespace mvtensor {

FeatureMatrix::FeatureMatrix(Matrix values) : values_{std::move(values)} {
    if (values_.rows() < 2)
        throw ValidationError("a feature matrix needs at least 2 samples, got " +
                              std::to_string(values_.rows()));
    if (values_.cols() < 1) throw ValidationError("a feature matrix needs at least 1 column");
    if (!values_.allFinite()) throw ValidationError("feature matrix has non-finite entries");
}

LabelVector::LabelVector(std::vector<int> labels) : labels_{std::move(labels)} {
    if (labels_.empty()) throw ValidationError("label vector must not be empty");
    for (std::size_t i = 0; i < labels_.size(); ++i)
        if (labels_[i] < 0)
            throw ValidationError("label " + std::to_string(labels_[i]) + " at position " +
                                  std::to_string(i) + " is negative");
    classes_ = *std::max_element(labels_.begin(), labels_.end()) + 1;
}

void MultiViewDataset::validate() const {
    if (views.empty()) throw ValidationError("dataset '" + name + "' has no views");
    const Index n = views.front().samples();
    for (std::size_t v = 0; v < views.size(); ++v)
        if (views[v].samples() != n)
            throw ValidationError("view " + std::to_string(v) + " has " +
                                  std::to_string(views[v].samples()) +
                                  " samples, expected " + std::to_string(n));
    if (labels && labels->size() != n)
        throw ValidationError("dataset has " + std::to_string(n) + " samples but " +
                              std::to_string(labels->size()) + " labels");
}

} // namespace mvtensor
