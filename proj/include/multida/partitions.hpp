#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "multida/matrix.hpp"

namespace multida {

// How hypotheses are generated for a K-class problem.
enum class Scheme { Exhaustive, OneVsRest, Ordinal, User };

// multiLDA (one variance per hypothesis) or multiQDA (one per group).
enum class VarianceMode { Equal, Unequal };

std::string to_string(Scheme scheme);
std::string to_string(VarianceMode mode);
Scheme parse_scheme(std::string_view text);
VarianceMode parse_variance_mode(std::string_view text);

inline constexpr int kDefaultMaxClasses = 12;

// One column of the hypothesis matrix: labels[k] is the group (1-based) of
// class k+1. Always held in restricted-growth form, so two columns describing
// the same set partition compare equal.
class PartitionColumn {
public:
    PartitionColumn() = default;
    // Relabels groups by order of first appearance. Labels must be >= 1.
    explicit PartitionColumn(std::span<const int> labels);
    PartitionColumn(std::initializer_list<int> labels);

    const std::vector<int>& labels() const { return labels_; }
    int classes() const { return static_cast<int>(labels_.size()); }
    int groups() const { return groups_; }
    bool is_null() const { return groups_ == 1; }

    // True if every group of *this lies inside a single group of `coarse`.
    bool refines(const PartitionColumn& coarse) const;

    bool operator==(const PartitionColumn&) const = default;

private:
    std::vector<int> labels_;
    int groups_ = 0;
};

// Restricted-growth relabeling of an arbitrary label vector.
std::vector<int> canonicalize(std::span<const int> labels);

// Group-count-then-lexicographic order used for every PartitionSet.
bool column_less(const PartitionColumn& a, const PartitionColumn& b);

// Group (1-based) that class `class_label` (1-based) falls into.
int group_index(int class_label, const PartitionColumn& column);

// Bell number via the Bell triangle; saturates at UINT64_MAX.
std::uint64_t bell_number(int k);

// Every set partition of K classes, null first, in column_less order.
std::vector<PartitionColumn> enumerate_exhaustive(int classes,
                                                  int max_classes = kDefaultMaxClasses);

class PartitionSet {
public:
    PartitionSet() = default;

    // Builds the hypothesis set for a scheme. `user_matrix` (K rows, one column
    // per hypothesis) is required for Scheme::User and rejected otherwise.
    static PartitionSet build(int classes, Scheme scheme, VarianceMode mode,
                              const IntMatrix* user_matrix = nullptr,
                              int max_classes = kDefaultMaxClasses);

    // Wraps columns that must already satisfy every set invariant (canonical,
    // distinct, sorted, null first). Used when reloading a saved model.
    static PartitionSet from_columns(int classes, std::vector<PartitionColumn> columns,
                                     Scheme scheme, VarianceMode mode);

    int classes() const { return classes_; }
    int hypotheses() const { return static_cast<int>(columns_.size()); }
    Scheme scheme() const { return scheme_; }
    VarianceMode variance_mode() const { return mode_; }

    const std::vector<PartitionColumn>& columns() const { return columns_; }
    const PartitionColumn& column(int m) const { return columns_[m]; }

    // Per-hypothesis vectors, m is 0-based.
    const std::vector<int>& group_counts() const { return groups_; }
    const std::vector<int>& degrees_of_freedom() const { return nu_; }
    const std::vector<int>& cumulative_groups() const { return z_; }
    int total_groups() const { return z_.empty() ? 0 : z_.back(); }

    // First flat slot (0-based) of hypothesis m's groups: z_{m-1}.
    int group_offset(int m) const { return m == 0 ? 0 : z_[m - 1]; }
    // a_km - 1: flat 0-based slot used by class k (0-based) under hypothesis m.
    int slot(int k, int m) const { return allocation_(k, m) - 1; }

    // K x M matrices with 1-based entries.
    IntMatrix matrix() const;
    const IntMatrix& allocation() const { return allocation_; }

private:
    void derive();

    int classes_ = 0;
    Scheme scheme_ = Scheme::Exhaustive;
    VarianceMode mode_ = VarianceMode::Equal;
    std::vector<PartitionColumn> columns_;
    std::vector<int> groups_;
    std::vector<int> nu_;
    std::vector<int> z_;
    IntMatrix allocation_;
};

// a_km = z_m - (G_m - S_km) for an arbitrary S whose columns use labels
// 1..G_m; no canonicalization or reordering is applied.
IntMatrix allocation_matrix(const IntMatrix& s);

}  // namespace multida
