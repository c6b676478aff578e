#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "multida/matrix.hpp"

namespace multida {

// Labeled training data. X is n x p with one row per sample; y holds encoded
// class indices 1..K and class_labels[k-1] is the original label of class k.
class Dataset {
public:
    Dataset() = default;

    // Validates: y has n entries in 1..K, every class is present, X is finite.
    // Empty class_labels default to "1".."K"; empty feature_names to "V1".."Vp".
    Dataset(RealMatrix x, std::vector<int> y, std::vector<std::string> class_labels = {},
            std::vector<std::string> feature_names = {});

    std::size_t samples() const { return x_.rows(); }
    std::size_t features() const { return x_.cols(); }
    int classes() const { return static_cast<int>(class_labels_.size()); }

    const RealMatrix& x() const { return x_; }
    const std::vector<int>& y() const { return y_; }
    const std::vector<int>& class_counts() const { return class_counts_; }
    const std::vector<std::string>& class_labels() const { return class_labels_; }
    const std::vector<std::string>& feature_names() const { return feature_names_; }

    // Keeps the label encoding; every class must still be represented.
    Dataset select_rows(std::span<const std::size_t> rows) const;
    Dataset select_features(std::span<const std::size_t> columns) const;

private:
    RealMatrix x_;
    std::vector<int> y_;
    std::vector<int> class_counts_;
    std::vector<std::string> class_labels_;
    std::vector<std::string> feature_names_;
};

// Rejects NaN/inf entries, naming the first offending cell (1-based).
void require_finite(const RealMatrix& x, const char* what);

}  // namespace multida
