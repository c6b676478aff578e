#include "multida/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "multida/errors.hpp"

namespace multida {

namespace {

using json = nlohmann::json;

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delim) {
            fields.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(trim(cur));
    return fields;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
};

Table read_table(std::istream& in, bool has_header, char delim, const std::string& source) {
    Table t;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_line(line, delim);
        if (width == 0) {
            width = fields.size();
        } else if (fields.size() != width) {
            throw ValidationError(source + ": line " + std::to_string(line_no) + " has " +
                                  std::to_string(fields.size()) + " fields, expected " +
                                  std::to_string(width));
        }
        if (has_header && t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        t.rows.push_back(std::move(fields));
        t.line_numbers.push_back(line_no);
    }
    if (t.rows.empty()) throw ValidationError(source + ": no data rows");
    return t;
}

double parse_cell(const std::string& cell, std::size_t line, std::size_t column,
                  const std::string& source) {
    double v = 0.0;
    const char* begin = cell.data();
    const char* end = cell.data() + cell.size();
    if (!cell.empty() && *begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw ValidationError(source + ": non-numeric or missing value '" + cell + "' at line " +
                              std::to_string(line) + ", column " + std::to_string(column + 1));
    }
    return v;
}

// 0-based index of the label column, or npos.
std::size_t locate_label(const Table& t, const CsvSchema& schema, const std::string& source,
                         bool required) {
    if (!schema.label_column) {
        if (required) throw ValidationError(source + ": no label column configured");
        return std::string::npos;
    }
    const std::string& spec = *schema.label_column;
    if (!t.header.empty()) {
        auto it = std::find(t.header.begin(), t.header.end(), spec);
        if (it != t.header.end()) return static_cast<std::size_t>(it - t.header.begin());
    }
    std::size_t index = 0;
    auto [ptr, ec] = std::from_chars(spec.data(), spec.data() + spec.size(), index);
    const std::size_t width = t.rows.front().size();
    if (ec == std::errc() && ptr == spec.data() + spec.size() && index >= 1 && index <= width) {
        return index - 1;
    }
    if (required) throw ValidationError(source + ": label column '" + spec + "' not found");
    return std::string::npos;
}

}  // namespace

Dataset read_dataset(std::istream& in, const CsvSchema& schema, const std::string& source) {
    const Table t = read_table(in, schema.has_header, schema.delimiter, source);
    const std::size_t label_col = locate_label(t, schema, source, true);
    const std::size_t width = t.rows.front().size();
    if (width < 2) throw ValidationError(source + ": need a label column and at least one feature");

    std::vector<std::string> names;
    for (std::size_t c = 0; c < width; ++c) {
        if (c == label_col) continue;
        names.push_back(t.header.empty() ? "V" + std::to_string(names.size() + 1) : t.header[c]);
    }
    RealMatrix x(t.rows.size(), width - 1);
    std::vector<int> y(t.rows.size());
    std::vector<std::string> labels;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string& label = row[label_col];
        if (label.empty()) {
            throw ValidationError(source + ": missing label at line " +
                                  std::to_string(t.line_numbers[r]));
        }
        auto it = std::find(labels.begin(), labels.end(), label);
        if (it == labels.end()) {
            labels.push_back(label);
            y[r] = static_cast<int>(labels.size());
        } else {
            y[r] = static_cast<int>(it - labels.begin()) + 1;
        }
        std::size_t out_c = 0;
        for (std::size_t c = 0; c < width; ++c) {
            if (c == label_col) continue;
            x(r, out_c++) = parse_cell(row[c], t.line_numbers[r], c, source);
        }
    }
    if (labels.size() < 2) throw ValidationError(source + ": fewer than 2 classes");
    return Dataset(std::move(x), std::move(y), std::move(labels), std::move(names));
}

Dataset load_dataset(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    return read_dataset(in, schema, path);
}

QueryMatrix read_query(std::istream& in, const CsvSchema& schema, const std::string& source) {
    const Table t = read_table(in, schema.has_header, schema.delimiter, source);
    const std::size_t label_col = locate_label(t, schema, source, false);
    const std::size_t width = t.rows.front().size();
    QueryMatrix q;
    const std::size_t p = width - (label_col == std::string::npos ? 0 : 1);
    if (p == 0) throw ValidationError(source + ": no feature columns");
    q.x = RealMatrix(t.rows.size(), p);
    for (std::size_t c = 0; c < width && !t.header.empty(); ++c) {
        if (c != label_col) q.feature_names.push_back(t.header[c]);
    }
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        std::size_t out_c = 0;
        for (std::size_t c = 0; c < width; ++c) {
            if (c == label_col) continue;
            q.x(r, out_c++) = parse_cell(t.rows[r][c], t.line_numbers[r], c, source);
        }
    }
    return q;
}

QueryMatrix load_query(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    return read_query(in, schema, path);
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

namespace {

std::string quote_field(const std::string& s, char delim) {
    if (s.find_first_of(std::string{delim, '"', '\n'}) == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace

void write_dataset(std::ostream& out, const Dataset& data, char delimiter) {
    for (const auto& name : data.feature_names()) out << quote_field(name, delimiter) << delimiter;
    out << "label\n";
    for (std::size_t i = 0; i < data.samples(); ++i) {
        for (double v : data.x().row(i)) out << format_double(v) << delimiter;
        out << quote_field(data.class_labels()[data.y()[i] - 1], delimiter) << '\n';
    }
}

void save_dataset(const std::string& path, const Dataset& data, char delimiter) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    write_dataset(out, data, delimiter);
}

IntMatrix read_int_matrix(std::istream& in, const std::string& source) {
    const Table t = read_table(in, false, ',', source);
    IntMatrix s(t.rows.size(), t.rows.front().size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        for (std::size_t c = 0; c < s.cols(); ++c) {
            const std::string& cell = t.rows[r][c];
            int v = 0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
                throw ValidationError(source + ": non-integer value '" + cell + "' at line " +
                                      std::to_string(t.line_numbers[r]) + ", column " +
                                      std::to_string(c + 1));
            }
            s(r, c) = v;
        }
    }
    return s;
}

IntMatrix load_int_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    return read_int_matrix(in, path);
}

double median(std::vector<double> values) {
    if (values.empty()) throw ValidationError("median of an empty set");
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    const double upper = values[mid];
    if (values.size() % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + mid);
    return lower + (upper - lower) / 2.0;
}

FilterResult filter_features(const Dataset& data, const FilterRule& rule) {
    if (rule.kind == FilterRule::Kind::ClassMedianBelow && !std::isfinite(rule.threshold)) {
        throw ValidationError("class-median threshold must be finite");
    }
    std::vector<std::size_t> kept;
    const int k_count = data.classes();
    for (std::size_t j = 0; j < data.features(); ++j) {
        const std::vector<double> col = data.x().column(j);
        bool keep = true;
        if (rule.kind == FilterRule::Kind::ZeroMad) {
            const double med = median(col);
            std::vector<double> dev(col.size());
            std::transform(col.begin(), col.end(), dev.begin(),
                           [med](double v) { return std::abs(v - med); });
            keep = median(std::move(dev)) != 0.0;
        } else {
            std::vector<std::vector<double>> by_class(k_count);
            for (std::size_t i = 0; i < col.size(); ++i) by_class[data.y()[i] - 1].push_back(col[i]);
            keep = std::any_of(by_class.begin(), by_class.end(), [&](auto& v) {
                return median(v) >= rule.threshold;
            });
        }
        if (keep) kept.push_back(j);
    }
    if (kept.empty()) throw ValidationError("feature filter removed every feature");
    return {data.select_features(kept), std::move(kept)};
}

namespace {

json matrix_rows(const RealMatrix& m) {
    json rows = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (double v : m.row(r)) {
            if (std::isfinite(v)) {
                row.push_back(v);
            } else {
                row.push_back(nullptr);  // -inf lambda of an inadmissible hypothesis
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

RealMatrix rows_matrix(const json& rows, std::size_t expected_rows, std::size_t cols,
                       const char* field, bool null_is_neg_inf = false) {
    if (!rows.is_array() || rows.size() != expected_rows) {
        throw ValidationError(std::string("model field '") + field + "' has the wrong row count");
    }
    RealMatrix m(expected_rows, cols);
    for (std::size_t r = 0; r < expected_rows; ++r) {
        const json& row = rows[r];
        if (!row.is_array() || row.size() != cols) {
            throw ValidationError(std::string("model field '") + field + "' row " +
                                  std::to_string(r + 1) + " has the wrong length");
        }
        for (std::size_t c = 0; c < cols; ++c) {
            if (row[c].is_null() && null_is_neg_inf) {
                m(r, c) = kNegInf;
            } else {
                m(r, c) = row[c].get<double>();
            }
        }
    }
    return m;
}

}  // namespace

std::string model_to_json(const FittedModel& model) {
    const ModelParts& mp = model.parts();
    const PartitionSet& ps = mp.partitions;
    const IntMatrix s = ps.matrix();
    json doc;
    doc["schema_version"] = kModelSchemaVersion;
    doc["K"] = ps.classes();
    doc["M"] = ps.hypotheses();
    doc["n"] = mp.samples;
    doc["p"] = model.features();
    doc["class_label_map"] = mp.class_labels;
    doc["scheme"] = to_string(ps.scheme());
    doc["S"] = s.data();
    doc["variance_mode"] = to_string(ps.variance_mode());
    doc["penalty"] = {{"kind", to_string(mp.penalty.kind)}, {"C", mp.penalty.C}};
    doc["prior_term_mode"] = to_string(mp.prior_term);
    doc["pi"] = mp.pi;
    std::vector<bool> admissible(mp.admissible.begin(), mp.admissible.end());
    doc["admissible"] = admissible;
    doc["feature_names"] = mp.feature_names;
    doc["variance_floor"] = mp.variance_floor;
    doc["gamma_hat"] = matrix_rows(mp.gamma);
    doc["lambda"] = matrix_rows(mp.lambda);
    doc["mu"] = matrix_rows(mp.mu);
    doc["sigma2"] = matrix_rows(mp.sigma2);
    return doc.dump(1);
}

FittedModel model_from_json(const std::string& text, const std::string& source) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(source + ": model parse error: " + e.what());
    }
    try {
        const int version = doc.at("schema_version").get<int>();
        if (version != kModelSchemaVersion) {
            throw ValidationError(source + ": unsupported model schema_version " +
                                  std::to_string(version));
        }
        const int k_count = doc.at("K").get<int>();
        const int m_count = doc.at("M").get<int>();
        const auto p = doc.at("p").get<std::size_t>();
        if (k_count < 1 || m_count < 1 || p < 1) throw ValidationError(source + ": bad dimensions");
        const auto s_flat = doc.at("S").get<std::vector<int>>();
        if (s_flat.size() != static_cast<std::size_t>(k_count) * m_count) {
            throw ValidationError(source + ": S has the wrong size");
        }
        IntMatrix s(k_count, m_count, s_flat);
        std::vector<PartitionColumn> cols;
        for (int m = 0; m < m_count; ++m) {
            const std::vector<int> raw = s.column(m);
            if (canonicalize(raw) != raw) {
                throw ValidationError(source + ": S column " + std::to_string(m + 1) +
                                      " is not in canonical form");
            }
            cols.emplace_back(std::span<const int>(raw));
        }
        const VarianceMode mode = parse_variance_mode(doc.at("variance_mode").get<std::string>());
        PartitionSet ps = PartitionSet::from_columns(
            k_count, std::move(cols), parse_scheme(doc.at("scheme").get<std::string>()), mode);

        ModelParts mp;
        mp.penalty.kind = parse_penalty_kind(doc.at("penalty").at("kind").get<std::string>());
        mp.penalty.C = doc.at("penalty").at("C").get<double>();
        mp.prior_term = parse_prior_term(doc.at("prior_term_mode").get<std::string>());
        mp.samples = doc.at("n").get<std::size_t>();
        mp.class_labels = doc.at("class_label_map").get<std::vector<std::string>>();
        mp.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
        mp.pi = doc.at("pi").get<std::vector<double>>();
        const auto admissible = doc.at("admissible").get<std::vector<bool>>();
        mp.admissible.assign(admissible.begin(), admissible.end());
        mp.variance_floor = doc.at("variance_floor").get<std::vector<double>>();
        const std::size_t slots = ps.total_groups();
        const std::size_t var_cols = mode == VarianceMode::Equal ? m_count : slots;
        mp.gamma = rows_matrix(doc.at("gamma_hat"), p, m_count, "gamma_hat");
        mp.lambda = rows_matrix(doc.at("lambda"), p, m_count, "lambda", true);
        mp.mu = rows_matrix(doc.at("mu"), p, slots, "mu");
        mp.sigma2 = rows_matrix(doc.at("sigma2"), p, var_cols, "sigma2");
        for (std::size_t j = 0; j < p; ++j) {
            for (int m = 0; m < m_count; ++m) {
                if ((mp.lambda(j, m) == kNegInf) != (mp.admissible[m] == 0)) {
                    throw ValidationError(source + ": lambda/admissibility mismatch at feature " +
                                          std::to_string(j + 1));
                }
            }
        }
        mp.partitions = std::move(ps);
        return FittedModel(std::move(mp));
    } catch (const json::exception& e) {
        throw ValidationError(source + ": malformed model: " + e.what());
    } catch (const ValidationError& e) {
        const std::string what = e.what();
        if (what.rfind(source, 0) == 0) throw;
        throw ValidationError(source + ": " + what);
    }
}

void save_model(const FittedModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out << model_to_json(model) << '\n';
    if (!out) throw ValidationError("write failed for '" + path + "'");
}

FittedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return model_from_json(buf.str(), path);
}

}  // namespace multida
