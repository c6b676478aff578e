#include "multida/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "multida/errors.hpp"
#include "multida/parallel.hpp"

namespace multida {

PenaltyConfig PenaltyConfig::resolve(PenaltyKind kind, std::size_t n, std::size_t p,
                                     double custom_value) {
    PenaltyConfig cfg;
    cfg.kind = kind;
    switch (kind) {
        case PenaltyKind::BIC: cfg.C = std::log(static_cast<double>(n)); break;
        case PenaltyKind::AIC: cfg.C = 2.0; break;
        case PenaltyKind::EBIC:
            cfg.C = std::log(static_cast<double>(n)) + 2.0 * std::log(static_cast<double>(p));
            break;
        case PenaltyKind::Custom: cfg.C = custom_value; break;
    }
    if (!(cfg.C >= 0.0) || !std::isfinite(cfg.C)) {
        throw ValidationError("penalty constant must be finite and >= 0");
    }
    return cfg;
}

std::string to_string(PenaltyKind kind) {
    switch (kind) {
        case PenaltyKind::BIC: return "bic";
        case PenaltyKind::AIC: return "aic";
        case PenaltyKind::EBIC: return "ebic";
        case PenaltyKind::Custom: return "custom";
    }
    return "unknown";
}

PenaltyKind parse_penalty_kind(std::string_view text) {
    if (text == "bic") return PenaltyKind::BIC;
    if (text == "aic") return PenaltyKind::AIC;
    if (text == "ebic") return PenaltyKind::EBIC;
    if (text == "custom") return PenaltyKind::Custom;
    throw ValidationError("unknown penalty '" + std::string(text) + "'");
}

std::string to_string(PriorTerm term) { return term == PriorTerm::Log ? "log" : "plogp"; }

PriorTerm parse_prior_term(std::string_view text) {
    if (text == "log") return PriorTerm::Log;
    if (text == "plogp") return PriorTerm::PLogP;
    throw ValidationError("unknown prior term '" + std::string(text) + "'");
}

double SufficientStats::raw_sum(std::size_t j, std::size_t slot) const {
    return sum(j, slot) + slot_counts[slot] * shift[j];
}

double SufficientStats::raw_sumsq(std::size_t j, std::size_t slot) const {
    const double c = shift[j];
    return sumsq(j, slot) + 2.0 * c * sum(j, slot) + slot_counts[slot] * c * c;
}

SufficientStats accumulate_stats(const Dataset& data, const PartitionSet& parts,
                                 unsigned threads) {
    if (parts.classes() != data.classes()) {
        throw ValidationError("partition set has K=" + std::to_string(parts.classes()) +
                              " but data has " + std::to_string(data.classes()) + " classes");
    }
    const std::size_t n = data.samples();
    const std::size_t p = data.features();
    const int k_count = data.classes();
    const int m_count = parts.hypotheses();
    const std::size_t slots = parts.total_groups();

    SufficientStats st;
    st.samples = n;
    st.features = p;
    st.class_counts = data.class_counts();
    st.slot_counts.assign(slots, 0);
    for (int m = 0; m < m_count; ++m) {
        for (int k = 0; k < k_count; ++k) st.slot_counts[parts.slot(k, m)] += st.class_counts[k];
    }
    st.shift.assign(data.x().row(0).begin(), data.x().row(0).end());
    st.sum = RealMatrix(p, slots);
    st.sumsq = RealMatrix(p, slots);

    const RealMatrix& x = data.x();
    const std::vector<int>& y = data.y();
    parallel_for(p, threads, [&](std::size_t begin, std::size_t end) {
        const std::size_t width = end - begin;
        // Per-class sums for this feature block, then pooled into groups.
        std::vector<double> cs(width * k_count, 0.0);
        std::vector<double> css(width * k_count, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t k = y[i] - 1;
            auto row = x.row(i);
            for (std::size_t j = begin; j < end; ++j) {
                const double d = row[j] - st.shift[j];
                cs[(j - begin) * k_count + k] += d;
                css[(j - begin) * k_count + k] += d * d;
            }
        }
        for (std::size_t j = begin; j < end; ++j) {
            auto sum_row = st.sum.row(j);
            auto sq_row = st.sumsq.row(j);
            for (int m = 0; m < m_count; ++m) {
                for (int k = 0; k < k_count; ++k) {
                    const int s = parts.slot(k, m);
                    sum_row[s] += cs[(j - begin) * k_count + k];
                    sq_row[s] += css[(j - begin) * k_count + k];
                }
            }
        }
    });
    return st;
}

namespace {

// Centered sum of squares of one slot, never negative.
double slot_spread(const SufficientStats& st, std::size_t j, std::size_t slot) {
    const double s = st.sum(j, slot);
    const double ss = st.sumsq(j, slot) - s * s / st.slot_counts[slot];
    return ss > 0.0 ? ss : 0.0;
}

}  // namespace

MleEstimates fit_mles(const SufficientStats& st, const PartitionSet& parts) {
    const std::size_t n = st.samples;
    const std::size_t p = st.features;
    const int m_count = parts.hypotheses();
    const std::size_t slots = parts.total_groups();
    const bool equal = parts.variance_mode() == VarianceMode::Equal;

    MleEstimates out;
    out.pi.resize(st.class_counts.size());
    for (std::size_t k = 0; k < st.class_counts.size(); ++k) {
        out.pi[k] = static_cast<double>(st.class_counts[k]) / static_cast<double>(n);
    }

    out.admissible.assign(m_count, 1);
    int rejected = 0;
    for (int m = 1; m < m_count; ++m) {
        bool ok = true;
        if (equal) {
            ok = static_cast<int>(n) > parts.group_counts()[m];
        } else {
            for (int g = 0; g < parts.group_counts()[m]; ++g) {
                if (st.slot_counts[parts.group_offset(m) + g] < 2) ok = false;
            }
        }
        out.admissible[m] = ok ? 1 : 0;
        if (!ok) ++rejected;
    }
    if (rejected > 0) {
        out.warnings.push_back(std::to_string(rejected) + " of " + std::to_string(m_count - 1) +
                               " non-null hypotheses are inadmissible (too few samples per group)");
    }
    if (m_count > 1 && rejected == m_count - 1) {
        out.warnings.push_back("every non-null hypothesis is inadmissible; the model is null-only");
    }

    out.mu = RealMatrix(p, slots);
    out.sigma2 = RealMatrix(p, equal ? static_cast<std::size_t>(m_count) : slots);
    out.variance_floor.resize(p);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t s = 0; s < slots; ++s) {
            out.mu(j, s) = st.shift[j] + st.sum(j, s) / st.slot_counts[s];
        }
        const double global = slot_spread(st, j, 0) * inv_n;
        const double floor = kVarianceFloorScale * (global > 0.0 ? global : 1.0);
        out.variance_floor[j] = floor;
        for (int m = 0; m < m_count; ++m) {
            const int off = parts.group_offset(m);
            const int g_count = parts.group_counts()[m];
            if (equal) {
                double pooled = 0.0;
                for (int g = 0; g < g_count; ++g) pooled += slot_spread(st, j, off + g);
                out.sigma2(j, m) = std::max(pooled * inv_n, floor);
            } else {
                for (int g = 0; g < g_count; ++g) {
                    const double v = slot_spread(st, j, off + g) / st.slot_counts[off + g];
                    out.sigma2(j, off + g) = std::max(v, floor);
                }
            }
        }
    }
    return out;
}

double lrt(const SufficientStats& st, const MleEstimates& mles, const PartitionSet& parts,
           std::size_t j, int m) {
    if (m == 0) return 0.0;
    if (!mles.admissible[m]) return kNegInf;
    const double log_null = std::log(mles.sigma2(j, 0));
    if (parts.variance_mode() == VarianceMode::Equal) {
        return static_cast<double>(st.samples) * (log_null - std::log(mles.sigma2(j, m)));
    }
    double total = 0.0;
    const int off = parts.group_offset(m);
    for (int g = 0; g < parts.group_counts()[m]; ++g) {
        total += st.slot_counts[off + g] * (log_null - std::log(mles.sigma2(j, off + g)));
    }
    return total;
}

std::vector<double> gamma_weights(std::span<const double> lambda, std::span<const int> nu,
                                  double penalty_c) {
    if (lambda.size() != nu.size()) {
        throw ValidationError("gamma_weights: lambda and nu lengths differ");
    }
    std::vector<double> w(lambda.size());
    double top = kNegInf;
    for (std::size_t m = 0; m < lambda.size(); ++m) {
        w[m] = lambda[m] == kNegInf ? kNegInf : 0.5 * lambda[m] - penalty_c * nu[m];
        if (std::isnan(w[m]) || w[m] == std::numeric_limits<double>::infinity()) {
            throw NumericError("gamma_weights: non-finite hypothesis score");
        }
        top = std::max(top, w[m]);
    }
    double total = 0.0;
    for (double& v : w) {
        v = v == kNegInf ? 0.0 : std::exp(v - top);
        total += v;
    }
    for (double& v : w) v /= total;
    return w;
}

FittedModel::FittedModel(ModelParts parts) : parts_(std::move(parts)) {
    const PartitionSet& ps = parts_.partitions;
    const int k_count = ps.classes();
    const std::size_t m_count = ps.hypotheses();
    const std::size_t slots = ps.total_groups();
    const std::size_t p = parts_.mu.rows();
    const bool equal = ps.variance_mode() == VarianceMode::Equal;
    auto fail = [](const std::string& what) { throw ValidationError("invalid model: " + what); };

    if (m_count == 0) fail("empty partition set");
    if (p == 0) fail("no features");
    if (parts_.mu.cols() != slots) fail("mu has wrong width");
    if (parts_.sigma2.rows() != p || parts_.sigma2.cols() != (equal ? m_count : slots)) {
        fail("sigma2 has wrong shape");
    }
    if (parts_.lambda.rows() != p || parts_.lambda.cols() != m_count) fail("lambda has wrong shape");
    if (parts_.gamma.rows() != p || parts_.gamma.cols() != m_count) fail("gamma has wrong shape");
    if (parts_.variance_floor.size() != p) fail("variance floor has wrong length");
    if (parts_.feature_names.size() != p) fail("feature name count differs from p");
    if (static_cast<int>(parts_.class_labels.size()) != k_count) fail("class label count differs from K");
    if (parts_.admissible.size() != m_count || !parts_.admissible[0]) fail("bad admissibility mask");
    if (parts_.samples == 0) fail("sample count is zero");
    if (!(parts_.penalty.C >= 0.0) || !std::isfinite(parts_.penalty.C)) fail("penalty C must be >= 0");

    if (static_cast<int>(parts_.pi.size()) != k_count) fail("pi has wrong length");
    double pi_total = 0.0;
    for (double v : parts_.pi) {
        if (!(v >= 0.0 && v <= 1.0)) fail("pi entry outside [0,1]");
        pi_total += v;
    }
    if (std::abs(pi_total - 1.0) > 1e-9) fail("pi does not sum to 1");

    for (std::size_t j = 0; j < p; ++j) {
        const double floor = parts_.variance_floor[j];
        if (!(floor > 0.0) || !std::isfinite(floor)) fail("variance floor must be positive");
        for (double v : parts_.mu.row(j)) {
            if (!std::isfinite(v)) fail("non-finite mu at feature " + std::to_string(j + 1));
        }
        for (double v : parts_.sigma2.row(j)) {
            if (!std::isfinite(v) || v < floor) {
                fail("sigma2 below floor at feature " + std::to_string(j + 1));
            }
        }
        if (parts_.lambda(j, 0) != 0.0) fail("lambda_j1 != 0 at feature " + std::to_string(j + 1));
        double total = 0.0;
        for (std::size_t m = 0; m < m_count; ++m) {
            const double g = parts_.gamma(j, m);
            if (!(g >= 0.0 && g <= 1.0)) {
                fail("gamma outside [0,1] at feature " + std::to_string(j + 1));
            }
            if (!parts_.admissible[m] && g != 0.0) fail("inadmissible hypothesis carries weight");
            total += g;
        }
        if (std::abs(total - 1.0) > 1e-9) {
            fail("gamma row " + std::to_string(j + 1) + " sums to " + std::to_string(total));
        }
    }
}

FittedModel fit(const Dataset& data, const PartitionSet& parts, const PenaltyConfig& penalty,
                PriorTerm prior_term, unsigned threads) {
    const std::size_t n = data.samples();
    const int k_count = data.classes();
    if (k_count < 2) throw ValidationError("fewer than 2 classes");
    if (n < static_cast<std::size_t>(k_count) + 1) {
        throw ValidationError("need at least K+1 = " + std::to_string(k_count + 1) +
                              " samples, got " + std::to_string(n));
    }
    if (!(penalty.C >= 0.0) || !std::isfinite(penalty.C)) {
        throw ValidationError("penalty constant must be finite and >= 0");
    }

    const SufficientStats st = accumulate_stats(data, parts, threads);
    MleEstimates mles = fit_mles(st, parts);

    const std::size_t p = data.features();
    const int m_count = parts.hypotheses();
    RealMatrix lambda(p, m_count);
    RealMatrix gamma(p, m_count);
    parallel_for(p, threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> row(m_count);
        for (std::size_t j = begin; j < end; ++j) {
            for (int m = 0; m < m_count; ++m) row[m] = lrt(st, mles, parts, j, m);
            const std::vector<double> w = gamma_weights(row, parts.degrees_of_freedom(), penalty.C);
            std::copy(row.begin(), row.end(), lambda.row(j).begin());
            std::copy(w.begin(), w.end(), gamma.row(j).begin());
        }
    });

    ModelParts mp;
    mp.partitions = parts;
    mp.penalty = penalty;
    mp.prior_term = prior_term;
    mp.samples = n;
    mp.class_labels = data.class_labels();
    mp.feature_names = data.feature_names();
    mp.pi = std::move(mles.pi);
    mp.admissible = std::move(mles.admissible);
    mp.variance_floor = std::move(mles.variance_floor);
    mp.mu = std::move(mles.mu);
    mp.sigma2 = std::move(mles.sigma2);
    mp.lambda = std::move(lambda);
    mp.gamma = std::move(gamma);
    FittedModel model(std::move(mp));
    for (auto& w : mles.warnings) model.add_warning(std::move(w));
    return model;
}

FittedModel fit(const Dataset& data, const PartitionSet& parts, const FitOptions& options) {
    const PenaltyConfig penalty = PenaltyConfig::resolve(options.penalty, data.samples(),
                                                         data.features(), options.custom_penalty);
    return fit(data, parts, penalty, options.prior_term, options.threads);
}

std::size_t softmax_inplace(std::span<double> scores) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < scores.size(); ++k) {
        if (scores[k] > scores[best]) best = k;
    }
    const double top = scores[best];
    double total = 0.0;
    for (double& v : scores) {
        v = std::exp(v - top);
        total += v;
    }
    for (double& v : scores) v /= total;
    return best;
}

Prediction predict(const FittedModel& model, const RealMatrix& x, unsigned threads) {
    const std::size_t p = model.features();
    if (x.cols() != p) {
        throw ValidationError("query has " + std::to_string(x.cols()) +
                              " feature columns, model expects p=" + std::to_string(p));
    }
    require_finite(x, "query");

    const ModelParts& mp = model.parts();
    const PartitionSet& ps = mp.partitions;
    const int k_count = ps.classes();
    const int m_count = ps.hypotheses();
    const std::size_t n_query = x.rows();

    // log(2*pi*sigma^2) and 1/sigma^2 for every variance entry.
    RealMatrix log_norm(mp.sigma2.rows(), mp.sigma2.cols());
    RealMatrix inv_var(mp.sigma2.rows(), mp.sigma2.cols());
    for (std::size_t j = 0; j < mp.sigma2.rows(); ++j) {
        for (std::size_t c = 0; c < mp.sigma2.cols(); ++c) {
            log_norm(j, c) = std::log(2.0 * std::numbers::pi * mp.sigma2(j, c));
            inv_var(j, c) = 1.0 / mp.sigma2(j, c);
        }
    }
    std::vector<double> prior(k_count);
    for (int k = 0; k < k_count; ++k) {
        const double pi = mp.pi[k];
        const double lp = pi > 0.0 ? std::log(pi) : kNegInf;
        prior[k] = mp.prior_term == PriorTerm::Log ? lp : (pi > 0.0 ? pi * lp : 0.0);
    }

    Prediction out;
    out.probabilities = RealMatrix(n_query, k_count);
    out.eta = RealMatrix(n_query, k_count);
    out.classes.resize(n_query);
    out.labels.resize(n_query);

    parallel_for(n_query, threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> eta(k_count);
        std::vector<double> group_logpdf(ps.total_groups());
        for (std::size_t i = begin; i < end; ++i) {
            std::fill(eta.begin(), eta.end(), 0.0);
            auto row = x.row(i);
            for (std::size_t j = 0; j < p; ++j) {
                const double xj = row[j];
                for (int m = 0; m < m_count; ++m) {
                    const double w = mp.gamma(j, m);
                    if (w == 0.0) continue;
                    const int off = ps.group_offset(m);
                    for (int g = 0; g < ps.group_counts()[m]; ++g) {
                        const std::size_t c = model.variance_column(m, off + g);
                        const double d = xj - mp.mu(j, off + g);
                        group_logpdf[off + g] = -0.5 * (log_norm(j, c) + d * d * inv_var(j, c));
                    }
                    for (int k = 0; k < k_count; ++k) eta[k] += w * group_logpdf[ps.slot(k, m)];
                }
            }
            for (int k = 0; k < k_count; ++k) eta[k] += prior[k];
            std::copy(eta.begin(), eta.end(), out.eta.row(i).begin());
            const std::size_t best = softmax_inplace(eta);
            std::copy(eta.begin(), eta.end(), out.probabilities.row(i).begin());
            out.classes[i] = static_cast<int>(best) + 1;
            out.labels[i] = mp.class_labels[best];
        }
    });
    return out;
}

std::vector<SelectedFeature> selected_features(const FittedModel& model, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw ValidationError("threshold must lie in (0, 1]");
    }
    std::vector<SelectedFeature> out;
    const RealMatrix& gamma = model.gamma();
    for (std::size_t j = 0; j < gamma.rows(); ++j) {
        auto row = gamma.row(j);
        const auto best = static_cast<std::size_t>(
            std::max_element(row.begin(), row.end()) - row.begin());
        if (best == 0 || row[best] < threshold) continue;
        out.push_back({j, model.parts().feature_names[j], static_cast<int>(best) + 1, row[best]});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& a, const auto& b) { return a.weight > b.weight; });
    return out;
}

}  // namespace multida
