#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "multida/dataset.hpp"
#include "multida/matrix.hpp"
#include "multida/partitions.hpp"

namespace multida {

enum class PenaltyKind { BIC, AIC, EBIC, Custom };

// Price per degree of freedom in the hypothesis weights.
struct PenaltyConfig {
    PenaltyKind kind = PenaltyKind::EBIC;
    double C = 0.0;

    // BIC: log n, AIC: 2, EBIC: log n + 2 log p, Custom: `custom_value`.
    static PenaltyConfig resolve(PenaltyKind kind, std::size_t n, std::size_t p,
                                 double custom_value = 0.0);
};

std::string to_string(PenaltyKind kind);
PenaltyKind parse_penalty_kind(std::string_view text);

// Class-prior term added to each discriminant score.
enum class PriorTerm { Log, PLogP };

std::string to_string(PriorTerm term);
PriorTerm parse_prior_term(std::string_view text);

inline constexpr double kVarianceFloorScale = 1e-8;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Per-(hypothesis, group) sums laid out in flat "slots": hypothesis m owns
// slots [group_offset(m), group_offset(m) + G_m). Feature values are shifted by
// shift[j] (the feature's first observation) before summing so constant
// features give exactly zero spread.
struct SufficientStats {
    std::size_t samples = 0;
    std::size_t features = 0;
    std::vector<int> class_counts;   // n_k
    std::vector<int> slot_counts;    // n_mg
    std::vector<double> shift;       // per feature
    RealMatrix sum;                  // p x z_M, sums of (x - shift)
    RealMatrix sumsq;                // p x z_M, sums of (x - shift)^2

    // Sums of the unshifted values.
    double raw_sum(std::size_t j, std::size_t slot) const;
    double raw_sumsq(std::size_t j, std::size_t slot) const;
};

SufficientStats accumulate_stats(const Dataset& data, const PartitionSet& parts,
                                 unsigned threads = 1);

struct MleEstimates {
    RealMatrix mu;                      // p x z_M
    RealMatrix sigma2;                  // p x M (equal) or p x z_M (unequal)
    std::vector<double> pi;             // K
    std::vector<double> variance_floor; // p
    std::vector<char> admissible;       // M
    std::vector<std::string> warnings;
};

// Closed-form MLEs; variances are clamped at the per-feature floor.
// Hypotheses whose variance MLE is undefined are marked inadmissible.
MleEstimates fit_mles(const SufficientStats& stats, const PartitionSet& parts);

// Likelihood-ratio statistic of hypothesis m against the null for feature j.
// Inadmissible hypotheses give -inf.
double lrt(const SufficientStats& stats, const MleEstimates& mles, const PartitionSet& parts,
           std::size_t j, int m);

// Softmax of 0.5*lambda_m - C*nu_m with max subtraction; -inf lambdas get 0.
std::vector<double> gamma_weights(std::span<const double> lambda, std::span<const int> nu,
                                  double penalty_c);

// Every field of a fitted model. FittedModel validates these on construction.
struct ModelParts {
    PartitionSet partitions;
    PenaltyConfig penalty;
    PriorTerm prior_term = PriorTerm::Log;
    std::size_t samples = 0;
    std::vector<std::string> class_labels;
    std::vector<std::string> feature_names;
    std::vector<double> pi;
    std::vector<char> admissible;
    std::vector<double> variance_floor;
    RealMatrix mu;      // p x z_M
    RealMatrix sigma2;  // p x M or p x z_M
    RealMatrix lambda;  // p x M
    RealMatrix gamma;   // p x M
};

class FittedModel {
public:
    // Throws ValidationError if any model invariant fails.
    explicit FittedModel(ModelParts parts);

    const ModelParts& parts() const { return parts_; }
    const PartitionSet& partitions() const { return parts_.partitions; }
    VarianceMode variance_mode() const { return parts_.partitions.variance_mode(); }
    int classes() const { return parts_.partitions.classes(); }
    std::size_t features() const { return parts_.mu.rows(); }
    std::size_t samples() const { return parts_.samples; }
    const RealMatrix& gamma() const { return parts_.gamma; }
    const RealMatrix& lambda() const { return parts_.lambda; }

    // Variance column used by group slot `slot` of hypothesis m.
    std::size_t variance_column(int m, int slot) const {
        return variance_mode() == VarianceMode::Equal ? static_cast<std::size_t>(m)
                                                      : static_cast<std::size_t>(slot);
    }

    const std::vector<std::string>& warnings() const { return warnings_; }
    void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

private:
    ModelParts parts_;
    std::vector<std::string> warnings_;
};

struct FitOptions {
    PenaltyKind penalty = PenaltyKind::EBIC;
    double custom_penalty = 0.0;
    PriorTerm prior_term = PriorTerm::Log;
    unsigned threads = 1;
};

FittedModel fit(const Dataset& data, const PartitionSet& parts, const PenaltyConfig& penalty,
                PriorTerm prior_term = PriorTerm::Log, unsigned threads = 1);
FittedModel fit(const Dataset& data, const PartitionSet& parts, const FitOptions& options);

struct Prediction {
    RealMatrix probabilities;          // n* x K
    RealMatrix eta;                    // n* x K
    std::vector<int> classes;          // encoded 1..K
    std::vector<std::string> labels;   // decoded
};

Prediction predict(const FittedModel& model, const RealMatrix& x, unsigned threads = 1);

// In-place softmax with max subtraction; returns index of the first maximum.
std::size_t softmax_inplace(std::span<double> scores);

struct SelectedFeature {
    std::size_t feature = 0;  // 0-based column
    std::string name;
    int hypothesis = 0;       // 1-based column of S
    double weight = 0.0;
};

// Features whose most probable hypothesis is non-null with weight >= threshold,
// heaviest first.
std::vector<SelectedFeature> selected_features(const FittedModel& model, double threshold);

}  // namespace multida
