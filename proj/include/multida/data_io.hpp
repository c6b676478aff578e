#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "multida/dataset.hpp"
#include "multida/estimator.hpp"
#include "multida/matrix.hpp"

namespace multida {

struct CsvSchema {
    bool has_header = true;
    // Header name, or a 1-based column number. Unset means no label column.
    std::optional<std::string> label_column = std::string("label");
    char delimiter = ',';
};

// Labels are encoded 1..K in order of first appearance.
Dataset read_dataset(std::istream& in, const CsvSchema& schema, const std::string& source = "<stream>");
Dataset load_dataset(const std::string& path, const CsvSchema& schema = {});

// Unlabeled matrix for prediction. A label column, if present, is dropped.
struct QueryMatrix {
    RealMatrix x;
    std::vector<std::string> feature_names;  // empty without a header
};
QueryMatrix read_query(std::istream& in, const CsvSchema& schema, const std::string& source = "<stream>");
QueryMatrix load_query(const std::string& path, const CsvSchema& schema = {});

// Header row of feature names plus a trailing "label" column.
void write_dataset(std::ostream& out, const Dataset& data, char delimiter = ',');
void save_dataset(const std::string& path, const Dataset& data, char delimiter = ',');

// Integer matrix without header (user partition matrices).
IntMatrix read_int_matrix(std::istream& in, const std::string& source = "<stream>");
IntMatrix load_int_matrix(const std::string& path);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

struct FilterRule {
    enum class Kind { ZeroMad, ClassMedianBelow };
    Kind kind = Kind::ZeroMad;
    double threshold = 0.0;
};

struct FilterResult {
    Dataset data;
    std::vector<std::size_t> kept;  // original 0-based column of each kept feature
};

// Midpoint of the two central order statistics for even counts.
double median(std::vector<double> values);

FilterResult filter_features(const Dataset& data, const FilterRule& rule);

inline constexpr int kModelSchemaVersion = 1;

std::string model_to_json(const FittedModel& model);
FittedModel model_from_json(const std::string& text, const std::string& source = "<string>");
void save_model(const FittedModel& model, const std::string& path);
FittedModel load_model(const std::string& path);

}  // namespace multida
