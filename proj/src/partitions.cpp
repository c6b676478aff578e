#include "multida/partitions.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <sstream>

#include "multida/errors.hpp"

namespace multida {

std::string to_string(Scheme scheme) {
    switch (scheme) {
        case Scheme::Exhaustive: return "exhaustive";
        case Scheme::OneVsRest: return "onevsrest";
        case Scheme::Ordinal: return "ordinal";
        case Scheme::User: return "user";
    }
    return "unknown";
}

std::string to_string(VarianceMode mode) {
    return mode == VarianceMode::Equal ? "equal" : "unequal";
}

Scheme parse_scheme(std::string_view text) {
    if (text == "exhaustive") return Scheme::Exhaustive;
    if (text == "onevsrest") return Scheme::OneVsRest;
    if (text == "ordinal") return Scheme::Ordinal;
    if (text == "user") return Scheme::User;
    throw ValidationError("unknown scheme '" + std::string(text) + "'");
}

VarianceMode parse_variance_mode(std::string_view text) {
    if (text == "equal") return VarianceMode::Equal;
    if (text == "unequal") return VarianceMode::Unequal;
    throw ValidationError("unknown variance mode '" + std::string(text) + "'");
}

std::vector<int> canonicalize(std::span<const int> labels) {
    std::vector<int> out(labels.size());
    std::vector<std::pair<int, int>> seen;  // (original label, canonical label)
    int next = 1;
    for (std::size_t k = 0; k < labels.size(); ++k) {
        if (labels[k] < 1) {
            throw ValidationError("group labels must be >= 1, got " + std::to_string(labels[k]));
        }
        auto it = std::find_if(seen.begin(), seen.end(),
                               [&](const auto& p) { return p.first == labels[k]; });
        if (it == seen.end()) {
            seen.emplace_back(labels[k], next);
            out[k] = next++;
        } else {
            out[k] = it->second;
        }
    }
    return out;
}

PartitionColumn::PartitionColumn(std::span<const int> labels)
    : labels_(canonicalize(labels)) {
    groups_ = labels_.empty() ? 0 : *std::max_element(labels_.begin(), labels_.end());
}

PartitionColumn::PartitionColumn(std::initializer_list<int> labels)
    : PartitionColumn(std::span<const int>(labels.begin(), labels.size())) {}

bool PartitionColumn::refines(const PartitionColumn& coarse) const {
    if (coarse.classes() != classes()) return false;
    // Each fine group must map to exactly one coarse group.
    std::vector<int> image(static_cast<std::size_t>(groups_) + 1, 0);
    for (int k = 0; k < classes(); ++k) {
        int& target = image[labels_[k]];
        if (target == 0) {
            target = coarse.labels_[k];
        } else if (target != coarse.labels_[k]) {
            return false;
        }
    }
    return true;
}

bool column_less(const PartitionColumn& a, const PartitionColumn& b) {
    if (a.groups() != b.groups()) return a.groups() < b.groups();
    return a.labels() < b.labels();
}

int group_index(int class_label, const PartitionColumn& column) {
    if (class_label < 1 || class_label > column.classes()) {
        throw ValidationError("class label " + std::to_string(class_label) +
                              " outside 1.." + std::to_string(column.classes()));
    }
    return column.labels()[class_label - 1];
}

std::uint64_t bell_number(int k) {
    if (k < 0) return 0;
    constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
    std::vector<std::uint64_t> row{1};
    for (int i = 1; i <= k; ++i) {
        std::vector<std::uint64_t> next{row.back()};
        for (std::uint64_t v : row) {
            std::uint64_t prev = next.back();
            next.push_back(prev > kMax - v ? kMax : prev + v);
        }
        row = std::move(next);
    }
    return row.front();
}

namespace {

void extend_rgs(std::vector<int>& prefix, int max_label, int classes,
                std::vector<PartitionColumn>& out) {
    if (static_cast<int>(prefix.size()) == classes) {
        out.emplace_back(std::span<const int>(prefix));
        return;
    }
    for (int label = 1; label <= max_label + 1; ++label) {
        prefix.push_back(label);
        extend_rgs(prefix, std::max(max_label, label), classes, out);
        prefix.pop_back();
    }
}

void sort_unique(std::vector<PartitionColumn>& cols) {
    std::sort(cols.begin(), cols.end(), column_less);
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
}

std::string describe_bell(int k) {
    std::ostringstream os;
    os << "B_" << k << " = " << bell_number(k);
    return os.str();
}

}  // namespace

std::vector<PartitionColumn> enumerate_exhaustive(int classes, int max_classes) {
    if (classes < 1) throw ValidationError("class count must be >= 1");
    if (classes > max_classes) {
        throw ValidationError("exhaustive enumeration refused for K=" + std::to_string(classes) +
                              ": " + describe_bell(classes) +
                              " hypotheses (Bell-number growth; " + describe_bell(15) +
                              "). Raise the class limit (currently " +
                              std::to_string(max_classes) +
                              ") or use the onevsrest/ordinal schemes");
    }
    std::vector<PartitionColumn> out;
    out.reserve(bell_number(classes));
    std::vector<int> prefix{1};
    extend_rgs(prefix, 1, classes, out);
    sort_unique(out);
    return out;
}

namespace {

std::vector<PartitionColumn> one_vs_rest(int classes) {
    std::vector<PartitionColumn> out;
    out.emplace_back(std::vector<int>(classes, 1));
    for (int k = 0; k < classes; ++k) {
        std::vector<int> labels(classes, 1);
        labels[k] = 2;
        out.emplace_back(std::span<const int>(labels));
    }
    sort_unique(out);
    return out;
}

std::vector<PartitionColumn> ordinal(int classes) {
    std::vector<PartitionColumn> out;
    const std::uint32_t cuts = classes - 1;
    for (std::uint32_t mask = 0; mask < (1u << cuts); ++mask) {
        std::vector<int> labels(classes, 1);
        for (int k = 1; k < classes; ++k) {
            labels[k] = labels[k - 1] + ((mask >> (k - 1)) & 1u ? 1 : 0);
        }
        out.emplace_back(std::span<const int>(labels));
    }
    sort_unique(out);
    return out;
}

std::vector<PartitionColumn> from_user_matrix(int classes, const IntMatrix& s) {
    if (static_cast<int>(s.rows()) != classes) {
        throw ValidationError("user partition matrix has " + std::to_string(s.rows()) +
                              " rows, expected K=" + std::to_string(classes));
    }
    if (s.cols() == 0) throw ValidationError("user partition matrix has zero columns");
    std::vector<PartitionColumn> out;
    out.emplace_back(std::vector<int>(classes, 1));
    for (std::size_t m = 0; m < s.cols(); ++m) {
        std::vector<int> labels = s.column(m);
        const std::string where = "user partition column " + std::to_string(m + 1);
        int top = 0;
        for (int v : labels) {
            if (v < 1) throw ValidationError(where + ": group label " + std::to_string(v) + " < 1");
            top = std::max(top, v);
        }
        std::set<int> present(labels.begin(), labels.end());
        if (static_cast<int>(present.size()) != top) {
            throw ValidationError(where + ": group labels are not exactly 1.." +
                                  std::to_string(top));
        }
        out.emplace_back(std::span<const int>(labels));
    }
    sort_unique(out);
    return out;
}

}  // namespace

PartitionSet PartitionSet::build(int classes, Scheme scheme, VarianceMode mode,
                                 const IntMatrix* user_matrix, int max_classes) {
    if (classes < 1) throw ValidationError("class count must be >= 1");
    if (scheme == Scheme::User && user_matrix == nullptr) {
        throw ValidationError("user scheme requires a partition matrix");
    }
    if (scheme != Scheme::User && user_matrix != nullptr) {
        throw ValidationError("a partition matrix is only accepted with the user scheme");
    }
    PartitionSet set;
    set.classes_ = classes;
    set.scheme_ = scheme;
    set.mode_ = mode;
    switch (scheme) {
        case Scheme::Exhaustive: set.columns_ = enumerate_exhaustive(classes, max_classes); break;
        case Scheme::OneVsRest: set.columns_ = one_vs_rest(classes); break;
        case Scheme::Ordinal: set.columns_ = ordinal(classes); break;
        case Scheme::User: set.columns_ = from_user_matrix(classes, *user_matrix); break;
    }
    set.derive();
    return set;
}

PartitionSet PartitionSet::from_columns(int classes, std::vector<PartitionColumn> columns,
                                        Scheme scheme, VarianceMode mode) {
    if (columns.empty()) throw ValidationError("partition set has no columns");
    for (std::size_t m = 0; m < columns.size(); ++m) {
        if (columns[m].classes() != classes) {
            throw ValidationError("partition column " + std::to_string(m + 1) + " has " +
                                  std::to_string(columns[m].classes()) + " rows, expected " +
                                  std::to_string(classes));
        }
        if (m > 0 && !column_less(columns[m - 1], columns[m])) {
            throw ValidationError("partition columns are not strictly ordered at column " +
                                  std::to_string(m + 1));
        }
    }
    if (!columns.front().is_null()) {
        throw ValidationError("first partition column is not the null hypothesis");
    }
    PartitionSet set;
    set.classes_ = classes;
    set.scheme_ = scheme;
    set.mode_ = mode;
    set.columns_ = std::move(columns);
    set.derive();
    return set;
}

void PartitionSet::derive() {
    const int m_count = hypotheses();
    groups_.resize(m_count);
    nu_.resize(m_count);
    z_.resize(m_count);
    int running = 0;
    for (int m = 0; m < m_count; ++m) {
        groups_[m] = columns_[m].groups();
        nu_[m] = (mode_ == VarianceMode::Equal ? 1 : 2) * (groups_[m] - 1);
        running += groups_[m];
        z_[m] = running;
    }
    allocation_ = allocation_matrix(matrix());
}

IntMatrix PartitionSet::matrix() const {
    IntMatrix s(classes_, columns_.size());
    for (std::size_t m = 0; m < columns_.size(); ++m) {
        for (int k = 0; k < classes_; ++k) s(k, m) = columns_[m].labels()[k];
    }
    return s;
}

IntMatrix allocation_matrix(const IntMatrix& s) {
    IntMatrix a(s.rows(), s.cols());
    int z = 0;
    for (std::size_t m = 0; m < s.cols(); ++m) {
        int g = 0;
        for (std::size_t k = 0; k < s.rows(); ++k) g = std::max(g, s(k, m));
        z += g;
        for (std::size_t k = 0; k < s.rows(); ++k) a(k, m) = z - (g - s(k, m));
    }
    return a;
}

}  // namespace multida
