#include "multida/simlab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "multida/errors.hpp"
#include "multida/parallel.hpp"

namespace multida {

std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::FsConsistency: return "fs-consistency";
        case Scenario::IndEqualVar: return "ind-equal-var";
        case Scenario::IndUnequalVar: return "ind-unequal-var";
        case Scenario::DepEqualCov: return "dep-equal-cov";
        case Scenario::DepUnequalCov: return "dep-unequal-cov";
    }
    return "unknown";
}

Scenario parse_scenario(std::string_view text) {
    for (Scenario s : {Scenario::FsConsistency, Scenario::IndEqualVar, Scenario::IndUnequalVar,
                       Scenario::DepEqualCov, Scenario::DepUnequalCov}) {
        if (text == to_string(s)) return s;
    }
    throw ValidationError("unknown scenario '" + std::string(text) + "'");
}

double SimSpec::shift() const {
    if (mean_shift) return *mean_shift;
    return scenario == Scenario::FsConsistency ? 2.0 : 0.5;
}

std::size_t SimSpec::block() const { return block_size == 0 ? std::max<std::size_t>(1, p / 10) : block_size; }

void SimSpec::validate() const {
    if (K < 2) throw ValidationError("simulation needs K >= 2");
    if (n < static_cast<std::size_t>(K)) throw ValidationError("simulation needs n >= K");
    if (p == 0) throw ValidationError("simulation needs p >= 1");
    if (!(discriminative_fraction >= 0.0 && discriminative_fraction <= 1.0)) {
        throw ValidationError("discriminative fraction must lie in [0, 1]");
    }
    if (!(variance_scale >= 0.0)) throw ValidationError("variance scale must be >= 0");
    if (scenario == Scenario::DepEqualCov || scenario == Scenario::DepUnequalCov) {
        if (block() > p) throw ValidationError("block size exceeds p");
        if (p % block() != 0) throw ValidationError("p must be divisible by the block size");
        if (!(block_density >= 0.0 && block_density <= 1.0)) {
            throw ValidationError("block density must lie in [0, 1]");
        }
    }
}

IntMatrix TruthAssignment::gamma0() const {
    IntMatrix g(hypothesis.size(), partitions.hypotheses(), 0);
    for (std::size_t j = 0; j < hypothesis.size(); ++j) g(j, hypothesis[j]) = 1;
    return g;
}

std::vector<int> split_classes(std::size_t n, int classes) {
    std::vector<int> sizes(classes, static_cast<int>(n / classes));
    for (std::size_t k = 0; k < n % classes; ++k) ++sizes[k];
    return sizes;
}

std::mt19937_64 make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed),
                                     static_cast<std::uint32_t>(seed >> 32)};
    for (std::uint64_t k : keys) {
        words.push_back(static_cast<std::uint32_t>(k));
        words.push_back(static_cast<std::uint32_t>(k >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return std::mt19937_64(seq);
}

namespace {

std::vector<int> class_vector(const std::vector<int>& sizes) {
    std::vector<int> y;
    for (std::size_t k = 0; k < sizes.size(); ++k) y.insert(y.end(), sizes[k], static_cast<int>(k) + 1);
    return y;
}

PartitionSet truth_partitions(int classes) {
    return PartitionSet::build(classes, Scheme::Exhaustive, VarianceMode::Equal);
}

}  // namespace

SimData gen_independent(const SimSpec& spec) {
    spec.validate();
    if (spec.scenario != Scenario::FsConsistency && spec.scenario != Scenario::IndEqualVar &&
        spec.scenario != Scenario::IndUnequalVar) {
        throw ValidationError("gen_independent does not handle scenario " + to_string(spec.scenario));
    }
    const bool unequal = spec.scenario == Scenario::IndUnequalVar;
    const double delta = spec.shift();

    SimData out;
    out.class_sizes = split_classes(spec.n, spec.K);
    out.uneven_split = spec.n % spec.K != 0;
    const std::vector<int> y = class_vector(out.class_sizes);

    TruthAssignment& truth = out.truth;
    truth.partitions = truth_partitions(spec.K);
    truth.hypothesis.assign(spec.p, 0);
    truth.group_means.assign(spec.p, {});
    truth.group_sds.assign(spec.p, {});

    std::mt19937_64 design_rng = make_stream(spec.seed, {1});
    const auto informative = static_cast<std::size_t>(
        std::llround(spec.discriminative_fraction * static_cast<double>(spec.p)));
    std::vector<std::size_t> order(spec.p);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), design_rng);
    const int non_null = truth.partitions.hypotheses() - 1;
    std::uniform_int_distribution<int> pick(1, std::max(1, non_null));
    for (std::size_t d = 0; d < informative && non_null > 0; ++d) {
        const std::size_t j = order[d];
        const int m = pick(design_rng);
        truth.hypothesis[j] = m;
        const int groups = truth.partitions.group_counts()[m];
        for (int g = 0; g < groups; ++g) {
            truth.group_means[j].push_back(g * delta);
            truth.group_sds[j].push_back(unequal ? 1.0 + g * spec.variance_scale : 1.0);
        }
    }

    std::mt19937_64 rng = make_stream(spec.seed, {2});
    std::normal_distribution<double> normal(0.0, 1.0);
    RealMatrix x(spec.n, spec.p);
    for (std::size_t i = 0; i < spec.n; ++i) {
        auto row = x.row(i);
        for (std::size_t j = 0; j < spec.p; ++j) {
            const double z = normal(rng);
            const int m = truth.hypothesis[j];
            if (m == 0) {
                row[j] = z;
            } else {
                const int g = truth.partitions.column(m).labels()[y[i] - 1] - 1;
                row[j] = truth.group_means[j][g] + truth.group_sds[j][g] * z;
            }
        }
    }
    out.data = Dataset(std::move(x), y);
    return out;
}

void SparseFactor::transpose_multiply(std::span<const double> z, std::span<double> y) const {
    for (std::size_t c = 0; c < size; ++c) {
        double acc = 0.0;
        for (const auto& [r, v] : columns[c]) acc += v * z[r];
        y[c] = acc;
    }
}

double SparseFactor::gram(std::size_t a, std::size_t b) const {
    // Columns are stored with increasing row index.
    const auto& ca = columns[a];
    const auto& cb = columns[b];
    double acc = 0.0;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < ca.size() && j < cb.size()) {
        if (ca[i].first == cb[j].first) {
            acc += ca[i].second * cb[j].second;
            ++i;
            ++j;
        } else if (ca[i].first < cb[j].first) {
            ++i;
        } else {
            ++j;
        }
    }
    return acc;
}

namespace {

SparseFactor random_factor(std::size_t b, double density, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::bernoulli_distribution keep(density);
    SparseFactor f;
    f.size = b;
    f.columns.resize(b);
    for (std::size_t c = 0; c < b; ++c) {
        for (std::size_t r = 0; r < b; ++r) {
            if (r == c || keep(rng)) f.columns[c].emplace_back(r, normal(rng));
        }
    }
    return f;
}

std::size_t signal_width(const SimSpec& spec) {
    return static_cast<std::size_t>(std::llround(
        spec.discriminative_fraction * static_cast<double>(spec.p) / spec.K));
}

}  // namespace

DependentDesign make_dependent_design(const SimSpec& spec) {
    spec.validate();
    DependentDesign d;
    d.block_size = spec.block();
    const std::size_t blocks = spec.p / d.block_size;
    const std::size_t sets = spec.scenario == Scenario::DepUnequalCov ? spec.K : 1;
    d.factors.resize(sets);
    for (std::size_t c = 0; c < sets; ++c) {
        std::mt19937_64 rng = make_stream(spec.seed, {3, c});
        for (std::size_t l = 0; l < blocks; ++l) {
            d.factors[c].push_back(random_factor(d.block_size, spec.block_density, rng));
        }
    }
    d.permutation.resize(spec.p);
    std::iota(d.permutation.begin(), d.permutation.end(), 0);
    std::mt19937_64 perm_rng = make_stream(spec.seed, {4});
    std::shuffle(d.permutation.begin(), d.permutation.end(), perm_rng);
    d.signal_width.assign(spec.K, signal_width(spec));
    return d;
}

SimData gen_dependent(const SimSpec& spec) {
    if (spec.scenario != Scenario::DepEqualCov && spec.scenario != Scenario::DepUnequalCov) {
        throw ValidationError("gen_dependent does not handle scenario " + to_string(spec.scenario));
    }
    const DependentDesign design = make_dependent_design(spec);
    const std::size_t width = design.signal_width.front();
    if (width * spec.K > spec.p) throw ValidationError("signal sets exceed p");
    const double delta = spec.shift();

    SimData out;
    out.class_sizes = split_classes(spec.n, spec.K);
    out.uneven_split = spec.n % spec.K != 0;
    const std::vector<int> y = class_vector(out.class_sizes);

    TruthAssignment& truth = out.truth;
    truth.partitions = truth_partitions(spec.K);
    truth.hypothesis.assign(spec.p, 0);
    truth.group_means.assign(spec.p, {});
    truth.group_sds.assign(spec.p, {});
    for (int k = 0; k < spec.K; ++k) {
        std::vector<int> labels(spec.K, 1);
        labels[k] = 2;
        const PartitionColumn singleton{std::span<const int>(labels)};
        const auto& cols = truth.partitions.columns();
        const int m = static_cast<int>(std::find(cols.begin(), cols.end(), singleton) - cols.begin());
        for (std::size_t j = k * width; j < (k + 1) * width; ++j) {
            truth.hypothesis[design.permutation[j]] = m;
        }
    }

    std::mt19937_64 rng = make_stream(spec.seed, {5});
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t b = design.block_size;
    std::vector<double> z(spec.p);
    std::vector<double> row_pre(spec.p);
    RealMatrix x(spec.n, spec.p);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const int k = y[i] - 1;
        const auto& factors = design.factors[design.factors.size() == 1 ? 0 : k];
        for (double& v : z) v = normal(rng);
        for (std::size_t l = 0; l < factors.size(); ++l) {
            factors[l].transpose_multiply(std::span<const double>(z).subspan(l * b, b),
                                          std::span<double>(row_pre).subspan(l * b, b));
        }
        for (std::size_t j = k * width; j < (k + 1) * width; ++j) row_pre[j] += delta;
        auto row = x.row(i);
        for (std::size_t j = 0; j < spec.p; ++j) row[design.permutation[j]] = row_pre[j];
    }
    out.data = Dataset(std::move(x), y);
    return out;
}

SimData generate(const SimSpec& spec) {
    if (spec.scenario == Scenario::DepEqualCov || spec.scenario == Scenario::DepUnequalCov) {
        return gen_dependent(spec);
    }
    return gen_independent(spec);
}

SelectionError selection_error(const RealMatrix& gamma_hat, const TruthAssignment& truth) {
    const std::size_t p = truth.features();
    const int m_count = truth.partitions.hypotheses();
    if (gamma_hat.rows() != p || gamma_hat.cols() != static_cast<std::size_t>(m_count)) {
        throw ValidationError("selection_error: gamma is " + std::to_string(gamma_hat.rows()) +
                              "x" + std::to_string(gamma_hat.cols()) + ", truth is " +
                              std::to_string(p) + "x" + std::to_string(m_count));
    }
    // refines[t * M + m]: hypothesis m refines hypothesis t.
    std::vector<char> refines(static_cast<std::size_t>(m_count) * m_count);
    for (int t = 0; t < m_count; ++t) {
        for (int m = 0; m < m_count; ++m) {
            refines[t * m_count + m] = truth.partitions.column(m).refines(truth.partitions.column(t));
        }
    }
    SelectionError e;
    std::size_t misses = 0;
    for (std::size_t j = 0; j < p; ++j) {
        const int t = truth.hypothesis[j];
        auto row = gamma_hat.row(j);
        for (int m = 0; m < m_count; ++m) {
            e.total += std::abs(row[m] - (m == t ? 1.0 : 0.0));
            if (m == t) continue;
            if (refines[t * m_count + m]) {
                e.overfit += 2.0 * row[m];
            } else {
                e.underfit += 2.0 * row[m];
            }
        }
        const auto best = std::max_element(row.begin(), row.end()) - row.begin();
        if (best != t) ++misses;
    }
    e.normalized = e.total / (2.0 * static_cast<double>(p));
    e.per_hypothesis = e.total / static_cast<double>(m_count);
    e.hard_rate = static_cast<double>(misses) / static_cast<double>(p);
    return e;
}

SelectionError selection_error(const FittedModel& model, const TruthAssignment& truth) {
    if (model.partitions().columns() != truth.partitions.columns()) {
        throw ValidationError("selection_error: model and truth use different hypothesis sets");
    }
    return selection_error(model.gamma(), truth);
}

std::vector<std::size_t> stratified_folds(const Dataset& data, std::size_t folds,
                                          std::mt19937_64& rng) {
    if (folds < 2) throw ValidationError("need at least 2 folds");
    const int k_count = data.classes();
    for (int k = 0; k < k_count; ++k) {
        if (static_cast<std::size_t>(data.class_counts()[k]) < folds) {
            throw ValidationError("class '" + data.class_labels()[k] + "' has " +
                                  std::to_string(data.class_counts()[k]) +
                                  " samples, fewer than the " + std::to_string(folds) + " folds");
        }
    }
    std::vector<std::vector<std::size_t>> members(k_count);
    for (std::size_t i = 0; i < data.samples(); ++i) members[data.y()[i] - 1].push_back(i);
    std::vector<std::size_t> fold_of(data.samples());
    std::size_t next = 0;
    for (auto& idx : members) {
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t i : idx) fold_of[i] = next++ % folds;
    }
    return fold_of;
}

CvReport cross_validate(const Dataset& data, const CvOptions& options) {
    if (options.trials < 1) throw ValidationError("need at least 1 trial");
    const PartitionSet parts = PartitionSet::build(data.classes(), options.scheme, options.variance,
                                                   nullptr, options.max_classes);
    std::vector<std::vector<std::size_t>> assignments(options.trials);
    for (std::size_t t = 0; t < options.trials; ++t) {
        std::mt19937_64 rng = make_stream(options.seed, {6, t});
        assignments[t] = stratified_folds(data, options.folds, rng);
    }

    CvReport report;
    report.folds.resize(options.trials * options.folds);
    FitOptions fit_opts = options.fit;
    fit_opts.threads = 1;
    parallel_for(report.folds.size(), options.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t job = begin; job < end; ++job) {
            const std::size_t t = job / options.folds;
            const std::size_t f = job % options.folds;
            std::vector<std::size_t> train;
            std::vector<std::size_t> test;
            for (std::size_t i = 0; i < data.samples(); ++i) {
                (assignments[t][i] == f ? test : train).push_back(i);
            }
            const Dataset train_set = data.select_rows(train);
            const FittedModel model = fit(train_set, parts, fit_opts);
            RealMatrix xq(test.size(), data.features());
            for (std::size_t r = 0; r < test.size(); ++r) {
                auto src = data.x().row(test[r]);
                std::copy(src.begin(), src.end(), xq.row(r).begin());
            }
            const Prediction pred = predict(model, xq);
            std::size_t wrong = 0;
            for (std::size_t r = 0; r < test.size(); ++r) {
                if (pred.classes[r] != data.y()[test[r]]) ++wrong;
            }
            report.folds[job] = {t, f, test.size(), wrong,
                                 static_cast<double>(wrong) / static_cast<double>(test.size())};
        }
    });

    report.trial_error.assign(options.trials, 0.0);
    for (const CvFold& f : report.folds) report.trial_error[f.trial] += f.error;
    for (double& e : report.trial_error) e /= static_cast<double>(options.folds);
    const double count = static_cast<double>(options.trials);
    report.mean = std::accumulate(report.trial_error.begin(), report.trial_error.end(), 0.0) / count;
    if (options.trials > 1) {
        double ss = 0.0;
        for (double e : report.trial_error) ss += (e - report.mean) * (e - report.mean);
        report.sd = std::sqrt(ss / (count - 1.0));
    }
    return report;
}

std::vector<SimReport> consistency_sweep(const ConsistencyOptions& options) {
    std::vector<SimReport> rows;
    const PartitionSet parts = PartitionSet::build(options.K, Scheme::Exhaustive, options.variance);
    for (std::size_t n : options.n_grid) {
        for (std::size_t rep = 0; rep < options.replicates; ++rep) {
            SimSpec spec;
            spec.scenario = Scenario::FsConsistency;
            spec.n = n;
            spec.p = options.p;
            spec.K = options.K;
            spec.discriminative_fraction = options.discriminative_fraction;
            spec.mean_shift = options.mean_shift;
            spec.seed = make_stream(options.seed, {7, n, rep})();
            const SimData sim = gen_independent(spec);

            const auto start = std::chrono::steady_clock::now();
            const FittedModel model = fit(sim.data, parts, options.fit);
            const auto stop = std::chrono::steady_clock::now();

            SimReport r;
            r.n = n;
            r.p = options.p;
            r.K = options.K;
            r.replicate = rep;
            r.seed = spec.seed;
            r.selection = selection_error(model.gamma(), sim.truth);
            r.uneven_split = sim.uneven_split;
            r.fit_seconds = std::chrono::duration<double>(stop - start).count();
            rows.push_back(r);
        }
    }
    return rows;
}

}  // namespace multida
