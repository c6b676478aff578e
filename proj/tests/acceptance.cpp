// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "multida/data_io.hpp"
#include "multida/estimator.hpp"
#include "multida/parallel.hpp"
#include "multida/partitions.hpp"
#include "multida/simlab.hpp"
#include "oracles.hpp"

using namespace multida;

namespace {

// Tolerances and budgets.
constexpr double kPosteriorTol = 1e-10;
constexpr double kPosteriorSeconds = 5.0;
constexpr double kMleTol = 1e-6;
constexpr double kMleSeconds = 30.0;
constexpr double kNullLow = 3.54;
constexpr double kNullHigh = 4.14;
constexpr double kNullSeconds = 60.0;
constexpr double kSweepFinal = 0.01;
constexpr double kSweepInversion = 0.005;
constexpr double kSweepSeconds = 300.0;
constexpr double kOrderMargin = 0.01;
constexpr double kOrderSeconds = 600.0;
constexpr double kPartitionSeconds = 1.0;
constexpr double kPenaltySeconds = 120.0;
constexpr double kFitSeconds = 10.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
    const auto start = Clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("[%s] %d %s: %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(),
                seconds_since(start));
    std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::vector<std::vector<int>> labels_of(const PartitionSet& ps) {
    std::vector<std::vector<int>> out;
    for (const auto& c : ps.columns()) out.push_back(c.labels());
    return out;
}

Outcome posterior_oracle() {
    const auto start = Clock::now();
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> pick_n(8, 20), pick_p(1, 3);
    double worst = 0.0;
    for (int inst = 0; inst < 50; ++inst) {
        const VarianceMode mode = inst % 2 ? VarianceMode::Unequal : VarianceMode::Equal;
        const std::size_t n = pick_n(rng), p = pick_p(rng);
        const Dataset d = oracle::random_dataset(rng, n, p, 3, 2, 1.0);
        const PartitionSet ps = PartitionSet::build(3, Scheme::Exhaustive, mode);
        const PenaltyConfig pen = PenaltyConfig::resolve(PenaltyKind::BIC, n, p);
        const FittedModel model = fit(d, ps, pen);
        for (std::size_t j = 0; j < p; ++j) {
            const auto post = oracle::posterior(d.x().column(j), d.y(), labels_of(ps), mode, pen.C);
            for (int m = 0; m < ps.hypotheses(); ++m) {
                worst = std::max(worst, std::abs(post[m] - model.gamma()(j, m)));
            }
        }
    }
    const double t = seconds_since(start);
    return {worst <= kPosteriorTol && t < kPosteriorSeconds,
            fmt("max |gamma - oracle| = %.3g", worst) + " over 50 instances (tol 1e-10, budget 5s)"};
}

Outcome mle_oracle() {
    const auto start = Clock::now();
    std::mt19937_64 rng(202);
    std::uniform_int_distribution<int> pick_n(9, 20);
    double worst = 0.0;
    for (int inst = 0; inst < 50; ++inst) {
        const VarianceMode mode = inst % 2 ? VarianceMode::Unequal : VarianceMode::Equal;
        const std::size_t n = pick_n(rng);
        const Dataset d = oracle::random_dataset(rng, n, 1, 3, 3, 1.5);
        const PartitionSet ps = PartitionSet::build(3, Scheme::Exhaustive, mode);
        const FittedModel model = fit(d, ps, PenaltyConfig::resolve(PenaltyKind::BIC, n, 1));
        for (int m = 0; m < ps.hypotheses(); ++m) {
            const auto num = oracle::numeric_mle(d.x().column(0), d.y(), ps.column(m).labels(), mode);
            for (int g = 0; g < ps.group_counts()[m]; ++g) {
                const int slot = ps.group_offset(m) + g;
                const double mu = model.parts().mu(0, slot);
                const double var = model.parts().sigma2(0, model.variance_column(m, slot));
                const double num_var = num.sigma2[mode == VarianceMode::Equal ? 0 : g];
                worst = std::max(worst, std::abs(mu - num.mu[g]) / std::max(1.0, std::abs(num.mu[g])));
                worst = std::max(worst, std::abs(var - num_var) / std::max(1.0, num_var));
            }
        }
    }
    const double t = seconds_since(start);
    return {worst <= kMleTol && t < kMleSeconds,
            fmt("max scaled |closed form - numeric| = %.3g", worst) +
                " over 50 instances, both variance modes (tol 1e-6, budget 30s)"};
}

double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Outcome null_calibration() {
    const auto start = Clock::now();
    const PartitionSet ps = PartitionSet::build(3, Scheme::Exhaustive, VarianceMode::Equal);
    int column = -1;
    for (int m = 1; m < ps.hypotheses() && column < 0; ++m) {
        if (ps.degrees_of_freedom()[m] == 1) column = m;
    }
    std::vector<int> y;
    for (int i = 0; i < 150; ++i) y.push_back(1 + i % 3);
    std::vector<double> lambdas;
    std::mt19937_64 rng = make_stream(303, {0});
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int rep = 0; rep < 2000; ++rep) {
        RealMatrix x(150, 1);
        for (double& v : x.data()) v = normal(rng);
        const FittedModel model = fit(Dataset(std::move(x), y), ps, PenaltyConfig::resolve(PenaltyKind::BIC, 150, 1));
        lambdas.push_back(model.lambda()(0, column));
    }
    const double q95 = quantile(lambdas, 0.95);
    const double t = seconds_since(start);
    return {q95 >= kNullLow && q95 <= kNullHigh && t < kNullSeconds,
            fmt("95th percentile of lambda = %.4f", q95) + " for a 1-df column, 2000 replicates (range [3.54, 4.14])"};
}

Outcome consistency() {
    const auto start = Clock::now();
    ConsistencyOptions opt;
    opt.p = 500;
    opt.K = 3;
    opt.n_grid = {50, 100, 200, 500};
    opt.replicates = 20;
    opt.mean_shift = 2.0;
    opt.fit.penalty = PenaltyKind::EBIC;
    opt.seed = 404;
    const auto rows = consistency_sweep(opt);
    std::vector<double> mean(opt.n_grid.size(), 0.0);
    for (const SimReport& r : rows) {
        const auto i = std::find(opt.n_grid.begin(), opt.n_grid.end(), r.n) - opt.n_grid.begin();
        mean[i] += r.selection.normalized / static_cast<double>(opt.replicates);
    }
    int inversions = 0;
    double worst_inversion = 0.0;
    for (std::size_t i = 1; i < mean.size(); ++i) {
        if (mean[i] > mean[i - 1]) {
            ++inversions;
            worst_inversion = std::max(worst_inversion, mean[i] - mean[i - 1]);
        }
    }
    const bool ok = mean.back() <= kSweepFinal && inversions <= 1 && worst_inversion <= kSweepInversion &&
                    seconds_since(start) < kSweepSeconds;
    std::string detail = "mean E/(2p) at n=50,100,200,500:";
    for (double m : mean) detail += fmt(" %.5f", m);
    detail += "; inversions " + std::to_string(inversions) + fmt(" (largest %.5f)", worst_inversion) +
              " (need final <= 0.01, <= 1 inversion <= 0.005)";
    return {ok, detail};
}

Outcome cv_ordering() {
    const auto start = Clock::now();
    double err[2][2];  // [simulation][variance mode]
    const Scenario scenarios[2] = {Scenario::IndEqualVar, Scenario::IndUnequalVar};
    for (int s = 0; s < 2; ++s) {
        SimSpec spec;
        spec.scenario = scenarios[s];
        spec.p = 2000;
        spec.n = 100;
        spec.K = 4;
        spec.seed = 505;
        const SimData sim = generate(spec);
        for (int v = 0; v < 2; ++v) {
            CvOptions opt;
            opt.folds = 5;
            opt.trials = 10;
            opt.variance = v == 0 ? VarianceMode::Equal : VarianceMode::Unequal;
            opt.seed = 506;
            opt.threads = resolve_threads(0);
            err[s][v] = cross_validate(sim.data, opt).mean;
        }
    }
    const bool sim1 = err[0][0] <= err[0][1] - kOrderMargin;
    const bool sim2 = err[1][1] <= err[1][0] - kOrderMargin;
    std::string detail = fmt("sim1 LDA %.4f", err[0][0]) + fmt(" vs QDA %.4f", err[0][1]) +
                         fmt("; sim2 LDA %.4f", err[1][0]) + fmt(" vs QDA %.4f", err[1][1]) +
                         " (need margins >= 0.01 in the expected direction)";
    return {sim1 && sim2 && seconds_since(start) < kOrderSeconds, detail};
}

Outcome partition_algebra() {
    const auto start = Clock::now();
    std::vector<std::string> failed;
    const auto bells = oracle::bell_triangle(8);
    for (int k = 1; k <= 8; ++k) {
        if (PartitionSet::build(k, Scheme::Exhaustive, VarianceMode::Equal).hypotheses() !=
            static_cast<int>(bells[k])) {
            failed.push_back("B_" + std::to_string(k));
        }
    }
    const std::vector<std::vector<int>> reference_s{{1, 1, 1}, {1, 1, 2}, {1, 2, 1}, {2, 1, 1}, {1, 2, 3}};
    std::set<std::vector<int>> want;
    for (const auto& c : reference_s) want.insert(canonicalize(c));
    const PartitionSet k3 = PartitionSet::build(3, Scheme::Exhaustive, VarianceMode::Equal);
    const auto got = labels_of(k3);
    if (std::set<std::vector<int>>(got.begin(), got.end()) != want || got.size() != 5) failed.push_back("S");

    // The reference A indexes columns (111, 121, 112, 211, 123); recompute it from that S.
    const IntMatrix reference_a(3, 5, {1, 2, 4, 7, 8, 1, 3, 4, 6, 9, 1, 2, 5, 6, 10});
    const IntMatrix implied_s(3, 5, {1, 1, 1, 2, 1, 1, 2, 1, 1, 2, 1, 1, 2, 1, 3});
    if (allocation_matrix(implied_s) != reference_a) failed.push_back("A");
    for (std::size_t c = 0; c < 5; ++c) {
        const PartitionColumn target(implied_s.column(c));
        bool found = false;
        for (int m = 0; m < k3.hypotheses(); ++m) {
            if (k3.column(m) == target) {
                found = PartitionColumn(k3.allocation().column(m)) == PartitionColumn(reference_a.column(c));
            }
        }
        if (!found) failed.push_back("A col " + std::to_string(c + 1));
    }
    for (int k = 3; k <= 8; ++k) {
        if (PartitionSet::build(k, Scheme::OneVsRest, VarianceMode::Equal).hypotheses() != k + 1) {
            failed.push_back("onevsrest K=" + std::to_string(k));
        }
        if (PartitionSet::build(k, Scheme::Ordinal, VarianceMode::Equal).hypotheses() != (1 << (k - 1))) {
            failed.push_back("ordinal K=" + std::to_string(k));
        }
    }
    std::string detail = "Bell counts K<=8, S for K=3, A (reference column order), M=K+1 (K>=3), 2^(K-1)";
    if (!failed.empty()) {
        detail += "; mismatched:";
        for (const auto& f : failed) detail += " " + f;
    }
    return {failed.empty() && seconds_since(start) < kPartitionSeconds, detail};
}

Outcome penalty_ordering() {
    const auto start = Clock::now();
    const PartitionSet ps = PartitionSet::build(3, Scheme::Exhaustive, VarianceMode::Equal);
    int wins = 0;
    double worst_gap = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < 20; ++rep) {
        std::mt19937_64 rng = make_stream(707, {static_cast<std::uint64_t>(rep)});
        const Dataset d = oracle::random_dataset(rng, 100, 2000, 3, 20, 0.0);
        TruthAssignment truth;
        truth.partitions = ps;
        truth.hypothesis.assign(2000, 0);
        const double ebic = selection_error(fit(d, ps, PenaltyConfig::resolve(PenaltyKind::EBIC, 100, 2000)), truth).overfit;
        const double bic = selection_error(fit(d, ps, PenaltyConfig::resolve(PenaltyKind::BIC, 100, 2000)), truth).overfit;
        if (ebic < bic) ++wins;
        worst_gap = std::min(worst_gap, bic - ebic);
    }
    return {wins == 20 && seconds_since(start) < kPenaltySeconds,
            "EBIC E_O < BIC E_O on " + std::to_string(wins) + "/20 null replicates" +
                fmt(" (smallest gap %.4g)", worst_gap)};
}

Outcome performance() {
    SimSpec spec;
    spec.scenario = Scenario::IndEqualVar;
    spec.n = 100;
    spec.p = 20000;
    spec.K = 4;
    spec.seed = 808;
    const SimData sim = generate(spec);
    const PartitionSet ps = PartitionSet::build(4, Scheme::Exhaustive, VarianceMode::Equal);
    const PenaltyConfig pen = PenaltyConfig::resolve(PenaltyKind::EBIC, 100, 20000);
    const unsigned threads = std::max(4u, resolve_threads(0));
    auto start = Clock::now();
    const FittedModel multi = fit(sim.data, ps, pen, PriorTerm::Log, threads);
    const double t_multi = seconds_since(start);
    start = Clock::now();
    const FittedModel single = fit(sim.data, ps, pen, PriorTerm::Log, 1);
    const double t_single = seconds_since(start);
    const bool same = model_to_json(multi) == model_to_json(single);
    return {same && t_multi < kFitSeconds,
            fmt("n=100 p=20000 K=4 fit %.3fs", t_multi) + " on " + std::to_string(threads) +
                " threads (" + std::to_string(resolve_threads(0)) + " cores)" + fmt(", %.3fs single-threaded", t_single) +
                (same ? ", outputs identical" : ", OUTPUTS DIFFER") + " (budget 10s)"};
}

Outcome round_trip() {
    const std::filesystem::path dir = std::filesystem::temp_directory_path() / "multida_acceptance";
    std::filesystem::create_directories(dir);
    int identical = 0;
    for (int i = 0; i < 10; ++i) {
        std::mt19937_64 rng = make_stream(909, {static_cast<std::uint64_t>(i)});
        const int k = 2 + i % 4;
        const Dataset d = oracle::random_dataset(rng, 30 + 5 * i, 5 + i, k, 3, 1.0);
        const VarianceMode mode = i % 2 ? VarianceMode::Unequal : VarianceMode::Equal;
        const Scheme scheme = i % 3 == 0 ? Scheme::OneVsRest : Scheme::Exhaustive;
        FitOptions opts;
        opts.penalty = static_cast<PenaltyKind>(i % 3);
        opts.prior_term = i % 2 ? PriorTerm::PLogP : PriorTerm::Log;
        const FittedModel model = fit(d, PartitionSet::build(k, scheme, mode), opts);
        const std::string path = (dir / ("model_" + std::to_string(i) + ".json")).string();
        save_model(model, path);
        const FittedModel back = load_model(path);
        const RealMatrix q = oracle::random_dataset(rng, 25, 5 + i, k, 1, 2.0).x();
        const Prediction a = predict(model, q);
        const Prediction b = predict(back, q);
        if (a.probabilities == b.probabilities && a.eta == b.eta && a.labels == b.labels) ++identical;
    }
    std::filesystem::remove_all(dir);
    return {identical == 10, std::to_string(identical) + "/10 models predict bit-identically after reload"};
}

}  // namespace

int main() {
    report(1, "posterior oracle", posterior_oracle);
    report(2, "MLE oracle", mle_oracle);
    report(3, "null calibration", null_calibration);
    report(4, "selection consistency sweep", consistency);
    report(5, "variance-model CV ordering", cv_ordering);
    report(6, "partition algebra", partition_algebra);
    report(7, "EBIC vs BIC overfitting", penalty_ordering);
    report(8, "performance and thread determinism", performance);
    report(9, "model round trip", round_trip);
    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
