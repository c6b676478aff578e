#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "multida/dataset.hpp"
#include "multida/estimator.hpp"
#include "multida/partitions.hpp"

namespace multida {

enum class Scenario { FsConsistency, IndEqualVar, IndUnequalVar, DepEqualCov, DepUnequalCov };

std::string to_string(Scenario s);
Scenario parse_scenario(std::string_view text);

struct SimSpec {
    Scenario scenario = Scenario::FsConsistency;
    std::size_t n = 100;
    std::size_t p = 500;
    int K = 3;
    double discriminative_fraction = 0.10;
    std::optional<double> mean_shift;  // unset: 2 for fs-consistency, 0.5 otherwise
    double variance_scale = 1.0;       // group g sd = 1 + (g-1) * scale (unequal variance)
    std::size_t block_size = 0;        // 0: p / 10
    double block_density = 0.25;       // fraction of nonzero off-diagonal factor entries
    std::uint64_t seed = 1;

    double shift() const;
    std::size_t block() const;
    void validate() const;
};

// gamma0 as one 0-based true hypothesis per feature, indexed into the
// exhaustive partition set for K.
struct TruthAssignment {
    PartitionSet partitions;
    std::vector<int> hypothesis;
    std::vector<std::vector<double>> group_means;  // independent scenarios; empty for null rows
    std::vector<std::vector<double>> group_sds;

    std::size_t features() const { return hypothesis.size(); }
    IntMatrix gamma0() const;
};

struct SimData {
    Dataset data;
    TruthAssignment truth;
    std::vector<int> class_sizes;
    bool uneven_split = false;  // n not divisible by K; largest-remainder allocation used
};

// Class sizes summing to n, as equal as possible, extras to the lowest classes.
std::vector<int> split_classes(std::size_t n, int classes);

// Independent generator stream keyed by (seed, keys...).
std::mt19937_64 make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

SimData gen_independent(const SimSpec& spec);

// b x b factor stored by column: entry (row, value) pairs for each column.
struct SparseFactor {
    std::size_t size = 0;
    std::vector<std::vector<std::pair<std::size_t, double>>> columns;

    // y = B^T z for one block.
    void transpose_multiply(std::span<const double> z, std::span<double> y) const;
    // Dense B^T B entry (a, b).
    double gram(std::size_t a, std::size_t b) const;
};

struct DependentDesign {
    std::size_t block_size = 0;
    // factors[c][l]: block l for covariance set c (one set, or one per class).
    std::vector<std::vector<SparseFactor>> factors;
    std::vector<std::size_t> permutation;  // generated column j lands at permutation[j]
    std::vector<std::size_t> signal_width; // |s_k| per class
};

DependentDesign make_dependent_design(const SimSpec& spec);
SimData gen_dependent(const SimSpec& spec);

// Dispatches on the scenario.
SimData generate(const SimSpec& spec);

struct SelectionError {
    double total = 0.0;       // E
    double overfit = 0.0;     // E_O
    double underfit = 0.0;    // E_U
    double normalized = 0.0;  // E / (2p)
    double per_hypothesis = 0.0;  // E / M
    double hard_rate = 0.0;   // argmax mismatch rate
};

SelectionError selection_error(const FittedModel& model, const TruthAssignment& truth);
SelectionError selection_error(const RealMatrix& gamma_hat, const TruthAssignment& truth);

struct CvOptions {
    std::size_t folds = 5;
    std::size_t trials = 50;
    Scheme scheme = Scheme::Exhaustive;
    VarianceMode variance = VarianceMode::Equal;
    FitOptions fit;          // fit.threads is ignored; folds run on `threads`
    std::uint64_t seed = 1;
    unsigned threads = 1;
    int max_classes = kDefaultMaxClasses;
};

struct CvFold {
    std::size_t trial = 0;
    std::size_t fold = 0;
    std::size_t tested = 0;
    std::size_t wrong = 0;
    double error = 0.0;
};

struct CvReport {
    std::vector<CvFold> folds;       // trial-major
    std::vector<double> trial_error; // mean fold error per trial
    double mean = 0.0;
    double sd = 0.0;                 // sample sd over trials (0 for one trial)
};

// Fold id per sample, stratified by class.
std::vector<std::size_t> stratified_folds(const Dataset& data, std::size_t folds,
                                          std::mt19937_64& rng);

CvReport cross_validate(const Dataset& data, const CvOptions& options);

struct ConsistencyOptions {
    std::size_t p = 500;
    int K = 3;
    std::vector<std::size_t> n_grid{50, 100, 150, 200, 250, 300, 350, 400, 450, 500};
    std::size_t replicates = 20;
    double discriminative_fraction = 0.10;
    double mean_shift = 2.0;
    VarianceMode variance = VarianceMode::Equal;
    FitOptions fit;
    std::uint64_t seed = 1;
};

struct SimReport {
    std::size_t n = 0;
    std::size_t p = 0;
    int K = 0;
    std::size_t replicate = 0;
    std::uint64_t seed = 0;
    SelectionError selection;
    bool uneven_split = false;
    double fit_seconds = 0.0;
};

std::vector<SimReport> consistency_sweep(const ConsistencyOptions& options);

}  // namespace multida
