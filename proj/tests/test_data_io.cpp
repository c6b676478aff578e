#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <json.hpp>
#include <limits>
#include <random>
#include <sstream>

#include "multida/data_io.hpp"
#include "multida/errors.hpp"
#include "oracles.hpp"

using namespace multida;

namespace {

std::filesystem::path tmp_dir() {
    std::filesystem::path dir(MULTIDA_TEST_TMP);
    std::filesystem::create_directories(dir);
    return dir;
}

Dataset parse(const std::string& text, CsvSchema schema = {}) {
    std::istringstream in(text);
    return read_dataset(in, schema, "test.csv");
}

// Three classes of four samples each with the given per-class values.
Dataset three_class(const std::vector<std::vector<double>>& features) {
    const std::size_t p = features.size();
    RealMatrix x(12, p);
    std::vector<int> y;
    for (std::size_t i = 0; i < 12; ++i) {
        y.push_back(static_cast<int>(i / 4) + 1);
        for (std::size_t j = 0; j < p; ++j) x(i, j) = features[j][i];
    }
    return Dataset(std::move(x), y);
}

FittedModel sample_model(std::uint64_t seed, VarianceMode mode, Scheme scheme = Scheme::Exhaustive) {
    std::mt19937_64 rng(seed);
    const Dataset d = oracle::random_dataset(rng, 40, 12, 4, 5, 1.0);
    return fit(d, PartitionSet::build(4, scheme, mode), PenaltyConfig::resolve(PenaltyKind::BIC, 40, 12));
}

}  // namespace

TEST_CASE("labeled csv parsing") {
    const Dataset d = parse("x,label\n0,a\n2,a\n4,b\n6,b\n");
    CHECK(d.samples() == 4);
    CHECK(d.features() == 1);
    CHECK(d.classes() == 2);
    CHECK(d.y() == std::vector<int>{1, 1, 2, 2});
    CHECK(d.class_labels() == std::vector<std::string>{"a", "b"});
    CHECK(d.feature_names() == std::vector<std::string>{"x"});
    CHECK(d.x()(3, 0) == 6.0);
}

TEST_CASE("labels are encoded in order of first appearance") {
    const Dataset d = parse("label,f1,f2\nzeta,1,2\nalpha,3,4\nzeta,5,6\n");
    CHECK(d.class_labels() == std::vector<std::string>{"zeta", "alpha"});
    CHECK(d.y() == std::vector<int>{1, 2, 1});
    CHECK(d.feature_names() == std::vector<std::string>{"f1", "f2"});
}

TEST_CASE("label column by index and custom delimiter without header") {
    CsvSchema schema;
    schema.has_header = false;
    schema.label_column = "1";
    schema.delimiter = ';';
    const Dataset d = parse("a;1.5;2\nb;3;4e1\n", schema);
    CHECK(d.classes() == 2);
    CHECK(d.x()(1, 1) == 40.0);
    CHECK(d.feature_names() == std::vector<std::string>{"V1", "V2"});
}

TEST_CASE("ingestion errors") {
    CHECK_THROWS_WITH_AS(parse("x,label\n0,a\nNA,b\n"), doctest::Contains("line 3, column 1"),
                         ValidationError);
    CHECK_THROWS_WITH_AS(parse("x,label\n0,a\nabc,b\n"), doctest::Contains("'abc'"), ValidationError);
    CHECK_THROWS_WITH_AS(parse("x,label\n0,a\n1,\n"), doctest::Contains("missing label"), ValidationError);
    CHECK_THROWS_WITH_AS(parse("x,label\n0,a\n1,a\n"), doctest::Contains("fewer than 2 classes"),
                         ValidationError);
    CHECK_THROWS_AS(parse("x,y\n0,a\n1,b\n"), ValidationError);
    CHECK_THROWS_AS(parse("x,label\n0,a,3\n1,b\n"), ValidationError);
    CHECK_THROWS_AS(load_dataset("/nonexistent/file.csv"), ValidationError);
}

TEST_CASE("query parsing") {
    CsvSchema schema;
    schema.has_header = false;
    schema.label_column.reset();
    std::istringstream in("0.5\n-2\n");
    const QueryMatrix q = read_query(in, schema);
    CHECK(q.x.rows() == 2);
    CHECK(q.x.cols() == 1);
    CHECK(q.x(1, 0) == -2.0);

    std::istringstream labeled("a,label,b\n1,x,2\n3,y,4\n");
    const QueryMatrix q2 = read_query(labeled, CsvSchema{});
    CHECK(q2.x == RealMatrix(2, 2, {1.0, 2.0, 3.0, 4.0}));
    CHECK(q2.feature_names == std::vector<std::string>{"a", "b"});
}

TEST_CASE("user partition matrix parsing") {
    std::istringstream in("1,1\n1,2\n2,2\n");
    CHECK(read_int_matrix(in) == IntMatrix(3, 2, {1, 1, 1, 2, 2, 2}));
    std::istringstream bad("1,1.5\n");
    CHECK_THROWS_AS(read_int_matrix(bad), ValidationError);
}

TEST_CASE("median convention") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    CHECK_THROWS_AS(median({}), ValidationError);
}

TEST_CASE("zero-MAD filter") {
    const Dataset d = three_class({
        std::vector<double>(12, 4.0),                              // constant
        {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12},                   // varies
        {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 9},                      // MAD 0 despite an outlier
    });
    const FilterResult r = filter_features(d, FilterRule{FilterRule::Kind::ZeroMad, 0.0});
    CHECK(r.kept == std::vector<std::size_t>{1});
    CHECK(r.data.features() == 1);
    CHECK(r.data.feature_names() == std::vector<std::string>{"V2"});
}

TEST_CASE("class-median filter") {
    // Class medians (6.9, 6.5, 5.0) and (7.2, 6.5, 5.0).
    const Dataset d = three_class({
        {6.8, 6.9, 6.9, 7.5, 6.0, 6.5, 6.5, 9.0, 4.0, 5.0, 5.0, 5.5},
        {7.0, 7.2, 7.2, 7.3, 6.0, 6.5, 6.5, 9.0, 4.0, 5.0, 5.0, 5.5},
    });
    const FilterRule rule{FilterRule::Kind::ClassMedianBelow, 7.0};
    const FilterResult r = filter_features(d, rule);
    CHECK(r.kept == std::vector<std::size_t>{1});
    const FilterResult again = filter_features(r.data, rule);
    CHECK(again.kept == std::vector<std::size_t>{0});
    CHECK(again.data.x() == r.data.x());
    CHECK_THROWS_AS(filter_features(d, FilterRule{FilterRule::Kind::ClassMedianBelow, 100.0}),
                    ValidationError);
    CHECK_THROWS_AS(filter_features(d, FilterRule{FilterRule::Kind::ClassMedianBelow,
                                                  std::numeric_limits<double>::infinity()}),
                    ValidationError);
}

TEST_CASE("filters are idempotent on random data") {
    std::mt19937_64 rng(41);
    std::uniform_int_distribution<int> level(0, 3);
    RealMatrix x(20, 30);
    for (std::size_t i = 0; i < 20; ++i) {
        for (std::size_t j = 0; j < 30; ++j) x(i, j) = j % 3 == 0 ? 1.0 : level(rng) + 0.25 * j;
    }
    std::vector<int> y;
    for (int i = 0; i < 20; ++i) y.push_back(1 + i % 3);
    const Dataset d(x, y);
    for (const FilterRule& rule : {FilterRule{FilterRule::Kind::ZeroMad, 0.0},
                                   FilterRule{FilterRule::Kind::ClassMedianBelow, 4.0}}) {
        const FilterResult once = filter_features(d, rule);
        const FilterResult twice = filter_features(once.data, rule);
        CHECK(twice.data.x() == once.data.x());
        CHECK(twice.kept.size() == once.kept.size());
    }
}

TEST_CASE("shortest round-trip formatting") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(2.0) == "2");
    std::mt19937_64 rng(43);
    std::normal_distribution<double> normal(0.0, 1e3);
    for (int i = 0; i < 1000; ++i) {
        const double v = normal(rng) * std::pow(10.0, i % 20 - 10);
        CHECK(std::stod(format_double(v)) == v);
    }
}

TEST_CASE("dataset csv round trip is bit exact") {
    std::mt19937_64 rng(47);
    const Dataset d = oracle::random_dataset(rng, 25, 7, 3, 2, 3.0);
    std::ostringstream out;
    write_dataset(out, d);
    std::istringstream in(out.str());
    const Dataset back = read_dataset(in, CsvSchema{});
    CHECK(back.x() == d.x());
    CHECK(back.feature_names() == d.feature_names());
    // Re-encoding may permute labels; the partition of samples must not change.
    for (std::size_t i = 0; i < d.samples(); ++i) {
        CHECK(back.class_labels()[back.y()[i] - 1] == d.class_labels()[d.y()[i] - 1]);
    }
    std::ostringstream again;
    write_dataset(again, back);
    std::istringstream in2(again.str());
    CHECK(read_dataset(in2, CsvSchema{}).x() == back.x());
}

TEST_CASE("model round trip preserves every field and prediction") {
    for (VarianceMode mode : {VarianceMode::Equal, VarianceMode::Unequal}) {
        const FittedModel model = sample_model(53, mode);
        const auto path = (tmp_dir() / ("model_" + to_string(mode) + ".json")).string();
        save_model(model, path);
        const FittedModel back = load_model(path);
        const ModelParts& a = model.parts();
        const ModelParts& b = back.parts();
        CHECK(b.partitions.matrix() == a.partitions.matrix());
        CHECK(b.partitions.variance_mode() == mode);
        CHECK(b.penalty.C == a.penalty.C);
        CHECK(b.penalty.kind == a.penalty.kind);
        CHECK(b.prior_term == a.prior_term);
        CHECK(b.samples == a.samples);
        CHECK(b.class_labels == a.class_labels);
        CHECK(b.feature_names == a.feature_names);
        CHECK(b.pi == a.pi);
        CHECK(b.admissible == a.admissible);
        CHECK(b.variance_floor == a.variance_floor);
        CHECK(b.mu == a.mu);
        CHECK(b.sigma2 == a.sigma2);
        CHECK(b.gamma == a.gamma);
        for (std::size_t i = 0; i < a.lambda.data().size(); ++i) {
            CHECK((a.lambda.data()[i] == b.lambda.data()[i] ||
                   (std::isinf(a.lambda.data()[i]) && std::isinf(b.lambda.data()[i]))));
        }
        std::mt19937_64 rng(59);
        const RealMatrix q = oracle::random_dataset(rng, 15, 12, 4, 1, 1.0).x();
        CHECK(predict(back, q).probabilities == predict(model, q).probabilities);
    }
}

TEST_CASE("corrupt model files are rejected") {
    const FittedModel model = sample_model(61, VarianceMode::Equal);
    const std::string text = model_to_json(model);

    CHECK_THROWS_WITH_AS(model_from_json(text.substr(0, text.size() / 2)), doctest::Contains("parse"),
                         ValidationError);

    auto doc = nlohmann::json::parse(text);
    // Scale feature 1's weights so the row sums to 0.8.
    for (auto& w : doc["gamma_hat"][0]) w = w.get<double>() * 0.8;
    CHECK_THROWS_WITH_AS(model_from_json(doc.dump()), doctest::Contains("gamma"), ValidationError);

    doc = nlohmann::json::parse(text);
    doc["schema_version"] = 99;
    CHECK_THROWS_WITH_AS(model_from_json(doc.dump()), doctest::Contains("schema_version"), ValidationError);

    doc = nlohmann::json::parse(text);
    doc["S"][1] = 2;  // first row of column 2 no longer starts at 1
    CHECK_THROWS_AS(model_from_json(doc.dump()), ValidationError);

    doc = nlohmann::json::parse(text);
    doc.erase("mu");
    CHECK_THROWS_AS(model_from_json(doc.dump()), ValidationError);

    CHECK_THROWS_AS(load_model((tmp_dir() / "missing.json").string()), ValidationError);
}
