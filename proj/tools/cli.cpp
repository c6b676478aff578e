#include "cli.hpp"

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "multida/data_io.hpp"
#include "multida/errors.hpp"
#include "multida/estimator.hpp"
#include "multida/partitions.hpp"
#include "multida/simlab.hpp"

namespace multida::cli {

namespace {

using json = nlohmann::json;

struct CommonFlags {
    std::string penalty = "ebic";
    std::string variance = "equal";
    std::string scheme = "exhaustive";
    std::string prior_term = "log";
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    std::string out;
    int max_classes = kDefaultMaxClasses;
    CLI::Option* variance_opt = nullptr;
};

struct InputFlags {
    std::string data;
    std::string label_col = "label";
    bool no_header = false;
    char delimiter = ',';
};

void add_common(CLI::App* app, CommonFlags& c) {
    app->add_option("--penalty", c.penalty, "ebic | bic | aic | custom:<C>")->capture_default_str();
    c.variance_opt = app->add_option("--variance", c.variance, "equal (multiLDA) | unequal (multiQDA)")
                         ->capture_default_str();
    app->add_option("--scheme", c.scheme, "exhaustive | onevsrest | ordinal | user:<csv path>")
        ->capture_default_str();
    app->add_option("--prior-term", c.prior_term, "log | plogp")->capture_default_str();
    app->add_option("--seed", c.seed, "random seed (drawn and logged when omitted)");
    app->add_option("--threads", c.threads, "worker threads, 0 = all cores")->capture_default_str();
    app->add_option("--out", c.out, "output path (stdout when omitted, unless noted)");
    app->add_option("--max-classes", c.max_classes, "largest K allowed for the exhaustive scheme")
        ->capture_default_str();
}

void add_input(CLI::App* app, InputFlags& in, bool required) {
    auto* opt = app->add_option("--data", in.data, "input CSV");
    if (required) opt->required();
    app->add_option("--label-col", in.label_col, "label column name or 1-based index")
        ->capture_default_str();
    app->add_flag("--no-header", in.no_header, "CSV has no header row");
    app->add_option("--delimiter", in.delimiter, "field delimiter")->capture_default_str();
}

CsvSchema schema_of(const InputFlags& in) {
    CsvSchema s;
    s.has_header = !in.no_header;
    s.label_column = in.label_col;
    s.delimiter = in.delimiter;
    return s;
}

struct ResolvedPenalty {
    PenaltyKind kind;
    double custom = 0.0;
};

ResolvedPenalty parse_penalty(const std::string& text) {
    const std::string prefix = "custom:";
    if (text.rfind(prefix, 0) == 0) {
        try {
            std::size_t used = 0;
            const std::string value = text.substr(prefix.size());
            const double c = std::stod(value, &used);
            if (used != value.size()) throw std::invalid_argument("trailing text");
            return {PenaltyKind::Custom, c};
        } catch (const std::logic_error&) {
            throw ValidationError("bad custom penalty '" + text + "'");
        }
    }
    const PenaltyKind kind = parse_penalty_kind(text);
    if (kind == PenaltyKind::Custom) throw ValidationError("custom penalty needs a value: custom:<C>");
    return {kind, 0.0};
}

PartitionSet partitions_for(const CommonFlags& c, int classes) {
    const VarianceMode mode = parse_variance_mode(c.variance);
    const std::string user_prefix = "user:";
    if (c.scheme.rfind(user_prefix, 0) == 0) {
        const IntMatrix s = load_int_matrix(c.scheme.substr(user_prefix.size()));
        return PartitionSet::build(classes, Scheme::User, mode, &s, c.max_classes);
    }
    const Scheme scheme = parse_scheme(c.scheme);
    if (scheme == Scheme::User) throw ValidationError("user scheme needs a path: user:<csv path>");
    return PartitionSet::build(classes, scheme, mode, nullptr, c.max_classes);
}

FitOptions fit_options(const CommonFlags& c) {
    const ResolvedPenalty pen = parse_penalty(c.penalty);
    FitOptions f;
    f.penalty = pen.kind;
    f.custom_penalty = pen.custom;
    f.prior_term = parse_prior_term(c.prior_term);
    f.threads = c.threads;
    return f;
}

std::uint64_t resolve_seed(CommonFlags& c) {
    if (!c.seed) {
        std::random_device rd;
        c.seed = (static_cast<std::uint64_t>(rd()) << 32) | rd();
    }
    return *c.seed;
}

void log_config(std::ostream& err, const std::string& command, const CommonFlags& c,
                json extra) {
    json cfg = {{"command", command},   {"penalty", c.penalty},       {"variance", c.variance},
                {"scheme", c.scheme},     {"prior_term", c.prior_term}, {"threads", c.threads},
                {"out", c.out},           {"max_classes", c.max_classes}};
    if (c.seed) cfg["seed"] = *c.seed;
    for (auto& [k, v] : extra.items()) cfg[k] = v;
    err << "# config " << cfg.dump() << '\n';
}

json input_json(const InputFlags& in) {
    return {{"data", in.data},
            {"label_col", in.label_col},
            {"no_header", in.no_header},
            {"delimiter", std::string(1, in.delimiter)}};
}

// Writes to --out when given, otherwise to `fallback`.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) throw ValidationError("cannot write '" + path + "'");
        }
        stream_ = file_ ? file_.get() : &fallback;
    }
    std::ostream& operator*() { return *stream_; }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* stream_;
};

int cmd_train(CommonFlags& c, const InputFlags& in, const std::string& features_out,
              double threshold, std::ostream& out, std::ostream& err) {
    log_config(err, "train", c, {{"input", input_json(in)}, {"features_out", features_out},
                                 {"threshold", threshold}});
    const Dataset data = load_dataset(in.data, schema_of(in));
    const PartitionSet parts = partitions_for(c, data.classes());
    const FittedModel model = fit(data, parts, fit_options(c));
    for (const auto& w : model.warnings()) err << "warning: " << w << '\n';

    save_model(model, c.out.empty() ? "model.json" : c.out);
    std::size_t non_null = 0;
    for (std::size_t j = 0; j < model.features(); ++j) {
        auto row = model.gamma().row(j);
        if (std::max_element(row.begin(), row.end()) != row.begin()) ++non_null;
    }
    if (!features_out.empty()) {
        std::ofstream f(features_out);
        if (!f) throw ValidationError("cannot write '" + features_out + "'");
        f << "feature,column,hypothesis,weight\n";
        for (const auto& s : selected_features(model, threshold)) {
            f << s.name << ',' << s.feature + 1 << ',' << s.hypothesis << ','
              << format_double(s.weight) << '\n';
        }
    }
    out << "n,p,K,M,penalty,C,selected\n"
        << data.samples() << ',' << data.features() << ',' << data.classes() << ','
        << parts.hypotheses() << ',' << to_string(model.parts().penalty.kind) << ','
        << format_double(model.parts().penalty.C) << ',' << non_null << '\n';
    return kExitOk;
}

int cmd_predict(CommonFlags& c, const InputFlags& in, const std::string& model_path,
                std::ostream& out, std::ostream& err) {
    log_config(err, "predict", c, {{"input", input_json(in)}, {"model", model_path}});
    const FittedModel model = load_model(model_path);
    const QueryMatrix q = load_query(in.data, schema_of(in));
    const Prediction pred = predict(model, q.x, c.threads);
    Sink sink(c.out, out);
    *sink << "label";
    for (const auto& l : model.parts().class_labels) *sink << ",prob_" << l;
    *sink << '\n';
    for (std::size_t i = 0; i < q.x.rows(); ++i) {
        *sink << pred.labels[i];
        for (double v : pred.probabilities.row(i)) *sink << ',' << format_double(v);
        *sink << '\n';
    }
    return kExitOk;
}

int cmd_cv(CommonFlags& c, const InputFlags& in, std::size_t folds, std::size_t trials,
           std::ostream& out, std::ostream& err) {
    const std::uint64_t seed = resolve_seed(c);
    log_config(err, "cv", c, {{"input", input_json(in)}, {"folds", folds}, {"trials", trials}});
    const Dataset data = load_dataset(in.data, schema_of(in));
    CvOptions opts;
    opts.folds = folds;
    opts.trials = trials;
    opts.scheme = parse_scheme(c.scheme);
    if (opts.scheme == Scheme::User) throw ValidationError("cv supports the built-in schemes only");
    opts.variance = parse_variance_mode(c.variance);
    opts.fit = fit_options(c);
    opts.seed = seed;
    opts.threads = c.threads;
    opts.max_classes = c.max_classes;
    const CvReport report = cross_validate(data, opts);
    Sink sink(c.out, out);
    *sink << "trial,fold,tested,wrong,error\n";
    for (const CvFold& f : report.folds) {
        *sink << f.trial + 1 << ',' << f.fold + 1 << ',' << f.tested << ',' << f.wrong << ','
              << format_double(f.error) << '\n';
    }
    err << "# cv mean_error=" << format_double(report.mean)
        << " sd=" << format_double(report.sd) << '\n';
    return kExitOk;
}

struct SimFlags {
    std::string scenario = "fs-consistency";
    std::vector<std::size_t> n_grid;
    std::optional<std::size_t> n;
    std::optional<std::size_t> p;
    std::optional<int> K;
    std::size_t replicates = 20;
    double fraction = 0.10;
    std::optional<double> shift;
    double variance_scale = 1.0;
    std::size_t block_size = 0;
    double block_density = 0.25;
    std::size_t folds = 5;
    std::size_t trials = 50;
    std::string data_out;
};

int cmd_simulate(CommonFlags& c, SimFlags& s, std::ostream& out, std::ostream& err) {
    const std::uint64_t seed = resolve_seed(c);
    const Scenario scenario = parse_scenario(s.scenario);
    const bool fs = scenario == Scenario::FsConsistency;
    if (s.n_grid.empty()) {
        for (std::size_t n = 50; n <= 500; n += 50) s.n_grid.push_back(n);
    }
    const std::size_t p = s.p.value_or(fs ? 500 : 2000);
    const int K = s.K.value_or(fs ? 3 : 4);
    const std::size_t n = s.n.value_or(100);
    log_config(err, "simulate", c,
               {{"scenario", s.scenario}, {"n_grid", s.n_grid}, {"n", n}, {"p", p}, {"K", K},
                {"replicates", s.replicates}, {"fraction", s.fraction},
                {"shift", s.shift ? json(*s.shift) : json(nullptr)},
                {"variance_scale", s.variance_scale}, {"block_size", s.block_size},
                {"block_density", s.block_density}, {"folds", s.folds}, {"trials", s.trials},
                {"data_out", s.data_out}});
    Sink sink(c.out, out);

    if (fs) {
        ConsistencyOptions opts;
        opts.p = p;
        opts.K = K;
        opts.n_grid = s.n_grid;
        opts.replicates = s.replicates;
        opts.discriminative_fraction = s.fraction;
        opts.mean_shift = s.shift.value_or(2.0);
        opts.variance = parse_variance_mode(c.variance);
        opts.fit = fit_options(c);
        opts.seed = seed;
        *sink << "n,p,K,replicate,seed,E,E_O,E_U,E_over_2p,E_over_M,hard_rate,uneven_split,fit_seconds\n";
        for (const SimReport& r : consistency_sweep(opts)) {
            const SelectionError& e = r.selection;
            *sink << r.n << ',' << r.p << ',' << r.K << ',' << r.replicate + 1 << ',' << r.seed << ','
                  << format_double(e.total) << ',' << format_double(e.overfit) << ','
                  << format_double(e.underfit) << ',' << format_double(e.normalized) << ','
                  << format_double(e.per_hypothesis) << ',' << format_double(e.hard_rate) << ','
                  << (r.uneven_split ? 1 : 0) << ',' << format_double(r.fit_seconds) << '\n';
        }
        return kExitOk;
    }

    SimSpec spec;
    spec.scenario = scenario;
    spec.n = n;
    spec.p = p;
    spec.K = K;
    spec.discriminative_fraction = s.fraction;
    spec.mean_shift = s.shift;
    spec.variance_scale = s.variance_scale;
    spec.block_size = s.block_size;
    spec.block_density = s.block_density;
    spec.seed = seed;
    const SimData sim = generate(spec);
    if (sim.uneven_split) err << "# note: n not divisible by K; largest-remainder class sizes\n";
    if (!s.data_out.empty()) save_dataset(s.data_out, sim.data);

    std::vector<VarianceMode> modes{VarianceMode::Equal, VarianceMode::Unequal};
    if (c.variance_opt->count() > 0) modes = {parse_variance_mode(c.variance)};
    *sink << "scenario,variance,trial,fold,tested,wrong,error\n";
    for (VarianceMode mode : modes) {
        CvOptions opts;
        opts.folds = s.folds;
        opts.trials = s.trials;
        opts.scheme = Scheme::Exhaustive;
        opts.variance = mode;
        opts.fit = fit_options(c);
        opts.seed = seed;
        opts.threads = c.threads;
        opts.max_classes = c.max_classes;
        const CvReport report = cross_validate(sim.data, opts);
        for (const CvFold& f : report.folds) {
            *sink << s.scenario << ',' << to_string(mode) << ',' << f.trial + 1 << ','
                  << f.fold + 1 << ',' << f.tested << ',' << f.wrong << ','
                  << format_double(f.error) << '\n';
        }
        err << "# " << to_string(mode) << " mean_error=" << format_double(report.mean)
            << " sd=" << format_double(report.sd) << '\n';
    }
    return kExitOk;
}

void print_row_block(std::ostream& os, const std::string& title, const std::vector<int>& v) {
    os << "# " << title << '\n';
    for (std::size_t m = 0; m < v.size(); ++m) os << (m ? "," : "") << "h" << m + 1;
    os << '\n';
    for (std::size_t m = 0; m < v.size(); ++m) os << (m ? "," : "") << v[m];
    os << '\n';
}

void print_matrix_block(std::ostream& os, const std::string& title, const IntMatrix& a) {
    os << "# " << title << '\n';
    for (std::size_t m = 0; m < a.cols(); ++m) os << (m ? "," : "") << "h" << m + 1;
    os << '\n';
    for (std::size_t k = 0; k < a.rows(); ++k) {
        for (std::size_t m = 0; m < a.cols(); ++m) os << (m ? "," : "") << a(k, m);
        os << '\n';
    }
}

int cmd_partitions(CommonFlags& c, int classes, std::ostream& out, std::ostream& err) {
    log_config(err, "partitions", c, {{"K", classes}});
    const PartitionSet ps = partitions_for(c, classes);
    Sink sink(c.out, out);
    print_matrix_block(*sink, "S", ps.matrix());
    print_row_block(*sink, "G", ps.group_counts());
    print_row_block(*sink, "nu", ps.degrees_of_freedom());
    print_row_block(*sink, "z", ps.cumulative_groups());
    print_matrix_block(*sink, "A", ps.allocation());
    return kExitOk;
}

FilterRule parse_rule(const std::string& text) {
    if (text == "zero-mad") return {FilterRule::Kind::ZeroMad, 0.0};
    const std::string prefix = "class-median-below:";
    if (text.rfind(prefix, 0) == 0) {
        try {
            return {FilterRule::Kind::ClassMedianBelow, std::stod(text.substr(prefix.size()))};
        } catch (const std::logic_error&) {
        }
    }
    throw ValidationError("unknown filter rule '" + text +
                          "' (zero-mad | class-median-below:<t>)");
}

int cmd_filter(CommonFlags& c, const InputFlags& in, const std::string& rule,
               const std::string& kept_out, std::ostream& out, std::ostream& err) {
    log_config(err, "filter", c, {{"input", input_json(in)}, {"rule", rule}, {"kept_out", kept_out}});
    const Dataset data = load_dataset(in.data, schema_of(in));
    const FilterResult res = filter_features(data, parse_rule(rule));
    {
        Sink sink(c.out, out);
        write_dataset(*sink, res.data, in.delimiter);
    }
    if (!kept_out.empty()) {
        std::ofstream f(kept_out);
        if (!f) throw ValidationError("cannot write '" + kept_out + "'");
        f << "column,feature\n";
        for (std::size_t j : res.kept) f << j + 1 << ',' << data.feature_names()[j] << '\n';
    }
    err << "# kept " << res.kept.size() << " of " << data.features() << " features\n";
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"multida: diagonal discriminant analysis with hypothesis-weighted feature selection"};
    app.require_subcommand(1, 1);

    CommonFlags common;
    InputFlags input;

    auto* train = app.add_subcommand("train", "fit a model and write it as JSON");
    add_common(train, common);
    add_input(train, input, true);
    std::string features_out;
    double threshold = 0.5;
    train->add_option("--features-out", features_out, "selected-features CSV");
    train->add_option("--threshold", threshold, "minimum weight for the selected-features table")
        ->capture_default_str();

    auto* pred = app.add_subcommand("predict", "predict class labels and probabilities");
    add_common(pred, common);
    add_input(pred, input, true);
    std::string model_path;
    pred->add_option("--model", model_path, "model JSON from train")->required();

    auto* cv = app.add_subcommand("cv", "repeated stratified k-fold cross-validation");
    add_common(cv, common);
    add_input(cv, input, true);
    std::size_t folds = 5;
    std::size_t trials = 50;
    cv->add_option("--folds", folds, "folds per trial")->capture_default_str();
    cv->add_option("--trials", trials, "repetitions")->capture_default_str();

    auto* sim = app.add_subcommand("simulate", "simulation scenarios and consistency sweeps");
    add_common(sim, common);
    SimFlags sf;
    sim->add_option("--scenario", sf.scenario,
                    "fs-consistency | ind-equal-var | ind-unequal-var | dep-equal-cov | dep-unequal-cov")
        ->capture_default_str();
    sim->add_option("--n-grid", sf.n_grid, "sample sizes for fs-consistency (default 50,100,...,500)")
        ->delimiter(',');
    sim->add_option("--n", sf.n, "samples for prediction scenarios (default 100)");
    sim->add_option("--p", sf.p, "features (default 500 for fs-consistency, 2000 otherwise)");
    sim->add_option("--K", sf.K, "classes (default 3 for fs-consistency, 4 otherwise)");
    sim->add_option("--replicates", sf.replicates, "replicates per grid point")->capture_default_str();
    sim->add_option("--fraction", sf.fraction, "discriminative fraction")->capture_default_str();
    sim->add_option("--shift", sf.shift, "mean shift (default 2 for fs-consistency, 0.5 otherwise)");
    sim->add_option("--variance-scale", sf.variance_scale, "sd step per group (unequal variance)")
        ->capture_default_str();
    sim->add_option("--block-size", sf.block_size, "covariance block size, 0 = p/10")
        ->capture_default_str();
    sim->add_option("--block-density", sf.block_density, "off-diagonal factor density")
        ->capture_default_str();
    sim->add_option("--folds", sf.folds, "CV folds (prediction scenarios)")->capture_default_str();
    sim->add_option("--trials", sf.trials, "CV trials (prediction scenarios)")->capture_default_str();
    sim->add_option("--data-out", sf.data_out, "write the generated dataset as CSV");

    auto* parts = app.add_subcommand("partitions", "print S, G, nu, z and A for a scheme");
    add_common(parts, common);
    int classes = 0;
    parts->add_option("--K", classes, "number of classes")->required();

    auto* filt = app.add_subcommand("filter", "drop features by a preprocessing rule");
    add_common(filt, common);
    add_input(filt, input, true);
    std::string rule = "zero-mad";
    std::string kept_out;
    filt->add_option("--rule", rule, "zero-mad | class-median-below:<t>")->capture_default_str();
    filt->add_option("--kept-out", kept_out, "CSV of kept original column indices");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*train) return cmd_train(common, input, features_out, threshold, out, err);
        if (*pred) return cmd_predict(common, input, model_path, out, err);
        if (*cv) return cmd_cv(common, input, folds, trials, out, err);
        if (*sim) return cmd_simulate(common, sf, out, err);
        if (*parts) return cmd_partitions(common, classes, out, err);
        if (*filt) return cmd_filter(common, input, rule, kept_out, out, err);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::exception& e) {
        err << "internal failure: " << e.what() << '\n';
        return kExitNumeric;
    }
    return kExitUsage;
}

}  // namespace multida::cli
