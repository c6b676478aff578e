#include "multida/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "multida/errors.hpp"

namespace multida {

void require_finite(const RealMatrix& x, const char* what) {
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
            if (!std::isfinite(x(i, j))) {
                throw ValidationError(std::string(what) + ": non-finite value at row " +
                                      std::to_string(i + 1) + ", column " +
                                      std::to_string(j + 1));
            }
        }
    }
}

Dataset::Dataset(RealMatrix x, std::vector<int> y, std::vector<std::string> class_labels,
                 std::vector<std::string> feature_names)
    : x_(std::move(x)),
      y_(std::move(y)),
      class_labels_(std::move(class_labels)),
      feature_names_(std::move(feature_names)) {
    if (y_.size() != x_.rows()) {
        throw ValidationError("label count " + std::to_string(y_.size()) +
                              " does not match sample count " + std::to_string(x_.rows()));
    }
    if (x_.rows() == 0) throw ValidationError("dataset has no samples");
    if (x_.cols() == 0) throw ValidationError("dataset has no features");
    int top = *std::max_element(y_.begin(), y_.end());
    if (class_labels_.empty()) {
        for (int k = 1; k <= top; ++k) class_labels_.push_back(std::to_string(k));
    }
    const int k_count = classes();
    class_counts_.assign(k_count, 0);
    for (std::size_t i = 0; i < y_.size(); ++i) {
        if (y_[i] < 1 || y_[i] > k_count) {
            throw ValidationError("label at row " + std::to_string(i + 1) + " outside 1.." +
                                  std::to_string(k_count));
        }
        ++class_counts_[y_[i] - 1];
    }
    for (int k = 0; k < k_count; ++k) {
        if (class_counts_[k] == 0) {
            throw ValidationError("class '" + class_labels_[k] + "' has no samples");
        }
    }
    if (feature_names_.empty()) {
        for (std::size_t j = 0; j < x_.cols(); ++j) {
            feature_names_.push_back("V" + std::to_string(j + 1));
        }
    }
    if (feature_names_.size() != x_.cols()) {
        throw ValidationError("feature name count does not match feature count");
    }
    require_finite(x_, "dataset");
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
    RealMatrix sub(rows.size(), features());
    std::vector<int> y(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        auto src = x_.row(rows[r]);
        std::copy(src.begin(), src.end(), sub.row(r).begin());
        y[r] = y_[rows[r]];
    }
    return Dataset(std::move(sub), std::move(y), class_labels_, feature_names_);
}

Dataset Dataset::select_features(std::span<const std::size_t> columns) const {
    RealMatrix sub(samples(), columns.size());
    std::vector<std::string> names;
    names.reserve(columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
        for (std::size_t i = 0; i < samples(); ++i) sub(i, c) = x_(i, columns[c]);
        names.push_back(feature_names_[columns[c]]);
    }
    return Dataset(std::move(sub), y_, class_labels_, std::move(names));
}

}  // namespace multida
