#include "urbanlens/error.hpp"
#include "urbanlens/learn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

namespace ul::learn {

using nlohmann::json;

namespace {

constexpr std::uint64_t kTreeStream = 0x6474ULL;
constexpr std::uint64_t kForestStream = 0x7266ULL;
constexpr std::uint64_t kBoostStream = 0x676274ULL;

[[noreturn]] void bad_param(const std::string& name, const std::string& why)
{
    fail("InvalidHyperparameter", ApiCode::unprocessable, "hyperparameter '" + name + "': " + why);
}

bool is_none(const json& v)
{
    return v.is_null() || (v.is_string() && (v.get<std::string>() == "None" || v.get<std::string>() == "none"));
}

void check_names(const json& hp, const std::set<std::string>& allowed, const char* model)
{
    if (!hp.is_object()) {
        fail("InvalidHyperparameter", ApiCode::unprocessable, "hyperparameters must be a JSON object");
    }
    for (const auto& [name, value] : hp.items()) {
        if (!allowed.count(name)) {
            bad_param(name, std::string("not a ") + model + " hyperparameter");
        }
    }
}

double number(const std::string& name, const json& v)
{
    if (!v.is_number()) {
        bad_param(name, "expected a number");
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) {
        bad_param(name, "must be finite");
    }
    return d;
}

long integer(const std::string& name, const json& v, long min)
{
    const double d = number(name, v);
    if (d != std::floor(d)) {
        bad_param(name, "expected an integer");
    }
    if (d < static_cast<double>(min)) {
        bad_param(name, "must be at least " + std::to_string(min));
    }
    return static_cast<long>(d);
}

std::string text(const std::string& name, const json& v)
{
    if (!v.is_string()) {
        bad_param(name, "expected a string");
    }
    return v.get<std::string>();
}

SampleCount sample_count(const std::string& name, const json& v, long min_count)
{
    const double d = number(name, v);
    if (v.is_number_integer() || (d == std::floor(d) && d >= static_cast<double>(min_count))) {
        if (d < static_cast<double>(min_count)) {
            bad_param(name, "count must be at least " + std::to_string(min_count));
        }
        return {false, d};
    }
    if (!(d > 0.0 && d <= 1.0)) {
        bad_param(name, "fraction must lie in (0, 1]");
    }
    return {true, d};
}

MaxFeatures max_features(const std::string& name, const json& v)
{
    if (is_none(v)) {
        return {MaxFeaturesRule::all, 0.0};
    }
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "sqrt" || s == "auto") {
            return {MaxFeaturesRule::sqrt, 0.0};
        }
        if (s == "log2") {
            return {MaxFeaturesRule::log2, 0.0};
        }
        bad_param(name, "expected sqrt, log2, None, a count or a fraction");
    }
    const double d = number(name, v);
    if (v.is_number_integer()) {
        if (d < 1.0) {
            bad_param(name, "count must be at least 1");
        }
        return {MaxFeaturesRule::count, d};
    }
    if (!(d > 0.0 && d <= 1.0)) {
        bad_param(name, "fraction must lie in (0, 1]");
    }
    return {MaxFeaturesRule::fraction, d};
}

ClassWeight class_weight(const std::string& name, const json& v, bool allow_subsample)
{
    if (is_none(v)) {
        return ClassWeight::none;
    }
    const auto s = text(name, v);
    if (s == "balanced") {
        return ClassWeight::balanced;
    }
    if (s == "balanced_subsample" && allow_subsample) {
        return ClassWeight::balanced_subsample;
    }
    bad_param(name, "unsupported value '" + s + "'");
}

bool boolean(const std::string& name, const json& v)
{
    if (v.is_boolean()) {
        return v.get<bool>();
    }
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "True" || s == "true") {
            return true;
        }
        if (s == "False" || s == "false") {
            return false;
        }
    }
    bad_param(name, "expected a boolean");
}

TreeParams tree_params(const json& hp, bool allow_subsample)
{
    TreeParams p;
    for (const auto& [name, v] : hp.items()) {
        if (name == "criterion") {
            const auto s = text(name, v);
            if (s == "gini") {
                p.criterion = Criterion::gini;
            } else if (s == "entropy") {
                p.criterion = Criterion::entropy;
            } else {
                bad_param(name, "expected gini or entropy");
            }
        } else if (name == "max_depth") {
            if (is_none(v)) {
                p.max_depth.reset();
            } else {
                p.max_depth = static_cast<int>(integer(name, v, 1));
            }
        } else if (name == "min_samples_split") {
            p.min_samples_split = sample_count(name, v, 2);
        } else if (name == "min_samples_leaf") {
            p.min_samples_leaf = sample_count(name, v, 1);
        } else if (name == "max_features") {
            p.max_features = max_features(name, v);
        } else if (name == "class_weight") {
            p.class_weight = class_weight(name, v, allow_subsample);
        }
    }
    return p;
}

} // namespace

std::size_t SampleCount::resolve(std::size_t n) const
{
    if (!fraction) {
        return static_cast<std::size_t>(value);
    }
    return static_cast<std::size_t>(std::ceil(value * static_cast<double>(n)));
}

std::size_t MaxFeatures::resolve(std::size_t n) const
{
    const auto nd = static_cast<double>(n);
    switch (rule) {
    case MaxFeaturesRule::all: return 0;
    case MaxFeaturesRule::sqrt: return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(nd)));
    case MaxFeaturesRule::log2: return std::max<std::size_t>(1, static_cast<std::size_t>(std::log2(nd)));
    case MaxFeaturesRule::count: return std::min(n, static_cast<std::size_t>(value));
    case MaxFeaturesRule::fraction: return std::max<std::size_t>(1, static_cast<std::size_t>(value * nd));
    }
    return 0;
}

TreeParams parse_tree_params(const json& hp)
{
    check_names(hp, {"criterion", "max_depth", "min_samples_split", "min_samples_leaf", "max_features", "class_weight"},
                "decision_tree");
    return tree_params(hp, false);
}

ForestParams parse_forest_params(const json& hp)
{
    check_names(hp,
                {"criterion", "max_depth", "min_samples_split", "min_samples_leaf", "max_features", "class_weight",
                 "n_estimators", "bootstrap"},
                "random_forest");
    ForestParams p;
    p.tree = tree_params(hp, true);
    if (!hp.contains("max_features")) {
        p.tree.max_features = {MaxFeaturesRule::sqrt, 0.0};
    }
    if (hp.contains("n_estimators")) {
        p.n_estimators = static_cast<std::size_t>(integer("n_estimators", hp["n_estimators"], 1));
    }
    if (hp.contains("bootstrap")) {
        p.bootstrap = boolean("bootstrap", hp["bootstrap"]);
    }
    return p;
}

BoostParams parse_boost_params(const json& hp)
{
    check_names(hp,
                {"n_estimators", "learning_rate", "subsample", "max_depth", "min_samples_split", "min_samples_leaf",
                 "max_features"},
                "gradient_boosted_tree");
    BoostParams p;
    for (const auto& [name, v] : hp.items()) {
        if (name == "n_estimators") {
            p.n_estimators = static_cast<std::size_t>(integer(name, v, 1));
        } else if (name == "learning_rate") {
            p.learning_rate = number(name, v);
            if (p.learning_rate < 0.0) {
                bad_param(name, "must be non-negative");
            }
        } else if (name == "subsample") {
            p.subsample = number(name, v);
            if (!(p.subsample > 0.0 && p.subsample <= 1.0)) {
                bad_param(name, "must lie in (0, 1]");
            }
        } else if (name == "max_depth") {
            p.max_depth = is_none(v) ? -1 : static_cast<int>(integer(name, v, 1));
        } else if (name == "min_samples_split") {
            p.min_samples_split = sample_count(name, v, 2);
        } else if (name == "min_samples_leaf") {
            p.min_samples_leaf = sample_count(name, v, 1);
        } else if (name == "max_features") {
            p.max_features = max_features(name, v);
        }
    }
    return p;
}

LogisticParams parse_logistic_params(const json& hp)
{
    check_names(hp, {"C", "penalty", "solver", "class_weight", "max_iter", "tol"}, "logistic_regression");
    LogisticParams p;
    for (const auto& [name, v] : hp.items()) {
        if (name == "C") {
            p.C = number(name, v);
            if (!(p.C > 0.0)) {
                bad_param(name, "must be positive");
            }
        } else if (name == "penalty") {
            const auto s = text(name, v);
            if (s == "l1") {
                p.penalty = Penalty::l1;
            } else if (s == "l2") {
                p.penalty = Penalty::l2;
            } else {
                bad_param(name, "expected l1 or l2");
            }
        } else if (name == "solver") {
            const auto s = text(name, v);
            if (s == "liblinear") {
                p.solver = Solver::liblinear;
            } else if (s == "saga") {
                p.solver = Solver::saga;
            } else {
                bad_param(name, "expected liblinear or saga");
            }
        } else if (name == "class_weight") {
            p.class_weight = class_weight(name, v, false);
        } else if (name == "max_iter") {
            p.max_iter = static_cast<std::size_t>(integer(name, v, 1));
        } else if (name == "tol") {
            p.tol = number(name, v);
            if (!(p.tol > 0.0)) {
                bad_param(name, "must be positive");
            }
        }
    }
    return p;
}

BayesParams parse_bayes_params(const json& hp)
{
    check_names(hp, {"priors", "var_smoothing"}, "naive_bayes");
    BayesParams p;
    for (const auto& [name, v] : hp.items()) {
        if (name == "priors") {
            if (is_none(v)) {
                p.priors.reset();
                continue;
            }
            if (!v.is_array() || v.size() != 2) {
                bad_param(name, "expected two class priors");
            }
            std::array<double, 2> pr{number(name, v[0]), number(name, v[1])};
            if (pr[0] < 0.0 || pr[1] < 0.0 || std::abs(pr[0] + pr[1] - 1.0) > 1e-9) {
                bad_param(name, "priors must be non-negative and sum to 1");
            }
            p.priors = pr;
        } else if (name == "var_smoothing") {
            p.var_smoothing = number(name, v);
            if (p.var_smoothing < 0.0) {
                bad_param(name, "must be non-negative");
            }
        }
    }
    return p;
}

void validate(const ModelSpec& spec)
{
    switch (spec.kind) {
    case ModelKind::decision_tree: parse_tree_params(spec.hyperparameters); break;
    case ModelKind::naive_bayes: parse_bayes_params(spec.hyperparameters); break;
    case ModelKind::logistic_regression: parse_logistic_params(spec.hyperparameters); break;
    case ModelKind::gradient_boosted_tree: parse_boost_params(spec.hyperparameters); break;
    case ModelKind::random_forest: parse_forest_params(spec.hyperparameters); break;
    }
}

std::vector<double> class_weights(const std::vector<int>& y, ClassWeight mode)
{
    std::vector<double> w(y.size(), 1.0);
    if (mode == ClassWeight::none) {
        return w;
    }
    std::array<double, 2> count{0.0, 0.0};
    for (int v : y) {
        count[static_cast<std::size_t>(v)] += 1.0;
    }
    const auto n = static_cast<double>(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        w[i] = n / (2.0 * count[static_cast<std::size_t>(y[i])]);
    }
    return w;
}

namespace {

double sigmoid(double z)
{
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

TreeSettings settings_for(const TreeParams& p, std::size_t n, std::size_t features)
{
    TreeSettings s;
    s.criterion = p.criterion;
    s.max_depth = p.max_depth ? *p.max_depth : -1;
    s.min_samples_split = std::max<std::size_t>(2, p.min_samples_split.resolve(n));
    s.min_samples_leaf = std::max<std::size_t>(1, p.min_samples_leaf.resolve(n));
    s.max_features = p.max_features.resolve(features);
    return s;
}

std::vector<double> labels_as_target(const LabeledSet& d)
{
    return {d.y.begin(), d.y.end()};
}

DecisionTreeModel fit_tree(const TreeParams& p, const LabeledSet& d, std::uint64_t seed)
{
    TreeData data(d.X.data(), d.rows(), d.features());
    const auto target = labels_as_target(d);
    const auto weight = class_weights(d.y, p.class_weight);
    auto rng = derive_rng(seed, kTreeStream);
    return {grow_tree(data, target, weight, settings_for(p, d.rows(), d.features()), rng)};
}

ForestModel fit_forest(const ForestParams& p, const LabeledSet& d, std::uint64_t seed)
{
    TreeData data(d.X.data(), d.rows(), d.features());
    const auto target = labels_as_target(d);
    const std::size_t n = d.rows();
    const auto base_weight =
        class_weights(d.y, p.tree.class_weight == ClassWeight::none ? ClassWeight::none : ClassWeight::balanced);
    const auto settings = settings_for(p.tree, n, d.features());
    ForestModel model;
    model.trees.reserve(p.n_estimators);
    std::vector<double> weight(n);
    for (std::size_t t = 0; t < p.n_estimators; ++t) {
        auto rng = derive_rng(seed, kForestStream, t);
        std::vector<double> count(n, 1.0);
        if (p.bootstrap) {
            std::fill(count.begin(), count.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                count[uniform_index(rng, n)] += 1.0;
            }
        }
        if (p.tree.class_weight == ClassWeight::balanced_subsample) {
            std::array<double, 2> drawn{0.0, 0.0};
            for (std::size_t i = 0; i < n; ++i) {
                drawn[static_cast<std::size_t>(d.y[i])] += count[i];
            }
            const double total = drawn[0] + drawn[1];
            for (std::size_t i = 0; i < n; ++i) {
                const double c = drawn[static_cast<std::size_t>(d.y[i])];
                weight[i] = c > 0.0 ? count[i] * total / (2.0 * c) : 0.0;
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                weight[i] = count[i] * base_weight[i];
            }
        }
        model.trees.push_back(grow_tree(data, target, weight, settings, rng));
    }
    return model;
}

BoostModel fit_boost(const BoostParams& p, const LabeledSet& d, std::uint64_t seed)
{
    const std::size_t n = d.rows();
    TreeData data(d.X.data(), n, d.features());
    const auto [c0, c1] = d.counts();
    const double prior = static_cast<double>(c1) / static_cast<double>(n);
    BoostModel model;
    model.base_score = std::log(prior / (1.0 - prior));
    model.learning_rate = p.learning_rate;
    model.trees.reserve(p.n_estimators);

    const std::size_t n_stage =
        p.subsample < 1.0 ? std::max<std::size_t>(1, static_cast<std::size_t>(p.subsample * static_cast<double>(n))) : n;
    TreeParams tp;
    tp.criterion = Criterion::mse;
    tp.max_depth = p.max_depth >= 0 ? std::optional<int>(p.max_depth) : std::nullopt;
    tp.min_samples_split = p.min_samples_split;
    tp.min_samples_leaf = p.min_samples_leaf;
    tp.max_features = p.max_features;
    const auto settings = settings_for(tp, n_stage, d.features());

    std::vector<double> raw(n, model.base_score), residual(n), weight(n);
    std::vector<std::size_t> perm(n);
    for (std::size_t m = 0; m < p.n_estimators; ++m) {
        auto rng = derive_rng(seed, kBoostStream, m);
        if (n_stage < n) {
            std::fill(weight.begin(), weight.end(), 0.0);
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            for (std::size_t i = 0; i < n_stage; ++i) {
                std::swap(perm[i], perm[i + uniform_index(rng, n - i)]);
                weight[perm[i]] = 1.0;
            }
        } else {
            std::fill(weight.begin(), weight.end(), 1.0);
        }
        for (std::size_t i = 0; i < n; ++i) {
            residual[i] = static_cast<double>(d.y[i]) - sigmoid(raw[i]);
        }
        Tree tree = grow_tree(data, residual, weight, settings, rng);
        // Newton step per leaf on the in-bag rows
        std::vector<double> num(tree.nodes.size(), 0.0), den(tree.nodes.size(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (weight[i] > 0.0) {
                const auto leaf = tree.leaf_index(d.row(i));
                const double pr = static_cast<double>(d.y[i]) - residual[i];
                num[leaf] += residual[i];
                den[leaf] += pr * (1.0 - pr);
            }
        }
        for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
            if (tree.nodes[k].feature < 0) {
                tree.nodes[k].value = std::abs(den[k]) < 1e-150 ? 0.0 : num[k] / den[k];
            }
        }
        if (p.learning_rate != 0.0) {
            for (std::size_t i = 0; i < n; ++i) {
                raw[i] += p.learning_rate * tree.predict(d.row(i));
            }
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

double logistic_objective(const std::vector<double>& margin, const LabeledSet& d, const std::vector<double>& s,
                          const std::vector<double>& w, const LogisticParams& p)
{
    double loss = 0.0;
    for (std::size_t i = 0; i < margin.size(); ++i) {
        const double m = d.y[i] ? margin[i] : -margin[i];
        loss += s[i] * (std::log1p(std::exp(-std::abs(m))) + std::max(-m, 0.0));
    }
    double reg = 0.0;
    for (double v : w) {
        reg += p.penalty == Penalty::l1 ? std::abs(v) : 0.5 * v * v;
    }
    return loss + reg / p.C;
}

double soft_threshold(double z, double t)
{
    if (z > t) {
        return z - t;
    }
    if (z < -t) {
        return z + t;
    }
    return 0.0;
}

LogisticModel fit_coordinate_descent(const LogisticParams& p, const LabeledSet& d, const std::vector<double>& s)
{
    const std::size_t n = d.rows(), F = d.features();
    const double lambda = 1.0 / p.C;
    std::vector<double> cols(n * F); // column-major
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < F; ++j) {
            cols[j * n + i] = d.X[i * F + j];
        }
    }
    std::vector<double> h(F, 0.0);
    double h0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        h0 += 0.25 * s[i];
    }
    for (std::size_t j = 0; j < F; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            h[j] += 0.25 * s[i] * cols[j * n + i] * cols[j * n + i];
        }
    }
    LogisticModel model;
    model.w.assign(F, 0.0);
    std::vector<double> margin(n, 0.0);
    auto gradient = [&](const double* x) {
        double g = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            g += s[i] * (sigmoid(margin[i]) - d.y[i]) * (x ? x[i] : 1.0);
        }
        return g;
    };
    auto shift = [&](const double* x, double delta) {
        for (std::size_t i = 0; i < n; ++i) {
            margin[i] += delta * (x ? x[i] : 1.0);
        }
    };
    for (std::size_t it = 0; it < p.max_iter; ++it) {
        double max_step = 0.0;
        for (std::size_t j = 0; j < F; ++j) {
            const double* x = cols.data() + j * n;
            double next;
            if (h[j] == 0.0) {
                next = 0.0;
            } else {
                const double g = gradient(x);
                next = p.penalty == Penalty::l2 ? model.w[j] - (g + lambda * model.w[j]) / (h[j] + lambda)
                                                : soft_threshold(model.w[j] - g / h[j], lambda / h[j]);
            }
            const double delta = next - model.w[j];
            if (delta != 0.0) {
                model.w[j] = next;
                shift(x, delta);
            }
            max_step = std::max(max_step, std::abs(delta));
        }
        const double db = -gradient(nullptr) / h0;
        model.b += db;
        shift(nullptr, db);
        max_step = std::max(max_step, std::abs(db));
        model.loss_trace.push_back(logistic_objective(margin, d, s, model.w, p));
        model.iterations = it + 1;
        if (max_step <= p.tol) {
            break;
        }
    }
    return model;
}

LogisticModel fit_proximal_gradient(const LogisticParams& p, const LabeledSet& d, const std::vector<double>& s)
{
    const std::size_t n = d.rows(), F = d.features();
    const double lambda = 1.0 / p.C;
    auto margins = [&](const std::vector<double>& w, double b) {
        std::vector<double> m(n, b);
        for (std::size_t i = 0; i < n; ++i) {
            const double* x = d.row(i);
            for (std::size_t j = 0; j < F; ++j) {
                m[i] += w[j] * x[j];
            }
        }
        return m;
    };
    auto smooth = [&](const std::vector<double>& m) {
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double mm = d.y[i] ? m[i] : -m[i];
            loss += s[i] * (std::log1p(std::exp(-std::abs(mm))) + std::max(-mm, 0.0));
        }
        return loss;
    };

    // Lipschitz estimate of the smooth part via power iteration on 0.25 X~' S X~
    std::vector<double> v(F + 1, 1.0), tmp(F + 1);
    double L = 1.0;
    for (int k = 0; k < 30; ++k) {
        std::fill(tmp.begin(), tmp.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* x = d.row(i);
            double xv = v[F];
            for (std::size_t j = 0; j < F; ++j) {
                xv += x[j] * v[j];
            }
            xv *= 0.25 * s[i];
            for (std::size_t j = 0; j < F; ++j) {
                tmp[j] += xv * x[j];
            }
            tmp[F] += xv;
        }
        double norm = 0.0;
        for (double t : tmp) {
            norm += t * t;
        }
        norm = std::sqrt(norm);
        if (norm == 0.0) {
            break;
        }
        L = norm;
        for (std::size_t j = 0; j <= F; ++j) {
            v[j] = tmp[j] / norm;
        }
    }

    LogisticModel model;
    model.w.assign(F, 0.0);
    auto margin = margins(model.w, model.b);
    double f = smooth(margin);
    std::vector<double> grad(F), wn(F);
    for (std::size_t it = 0; it < p.max_iter; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double gb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = s[i] * (sigmoid(margin[i]) - d.y[i]);
            const double* x = d.row(i);
            for (std::size_t j = 0; j < F; ++j) {
                grad[j] += r * x[j];
            }
            gb += r;
        }
        L *= 0.9;
        double bn = 0.0, fn = 0.0;
        std::vector<double> mn;
        for (;;) {
            const double t = 1.0 / L;
            for (std::size_t j = 0; j < F; ++j) {
                const double z = model.w[j] - t * grad[j];
                wn[j] = p.penalty == Penalty::l2 ? z / (1.0 + t * lambda) : soft_threshold(z, t * lambda);
            }
            bn = model.b - t * gb;
            mn = margins(wn, bn);
            fn = smooth(mn);
            double lin = gb * (bn - model.b), quad = (bn - model.b) * (bn - model.b);
            for (std::size_t j = 0; j < F; ++j) {
                const double dj = wn[j] - model.w[j];
                lin += grad[j] * dj;
                quad += dj * dj;
            }
            if (fn <= f + lin + 0.5 * L * quad + 1e-12 * std::abs(f)) {
                break;
            }
            L *= 2.0;
        }
        double max_step = std::abs(bn - model.b);
        for (std::size_t j = 0; j < F; ++j) {
            max_step = std::max(max_step, std::abs(wn[j] - model.w[j]));
        }
        model.w = wn;
        model.b = bn;
        margin = std::move(mn);
        f = fn;
        model.loss_trace.push_back(logistic_objective(margin, d, s, model.w, p));
        model.iterations = it + 1;
        if (max_step <= p.tol) {
            break;
        }
    }
    return model;
}

BayesModel fit_bayes(const BayesParams& p, const LabeledSet& d)
{
    const std::size_t n = d.rows(), F = d.features();
    BayesModel m;
    std::array<double, 2> count{0.0, 0.0};
    for (int c = 0; c < 2; ++c) {
        m.mean[c].assign(F, 0.0);
        m.var[c].assign(F, 0.0);
    }
    std::vector<double> all_mean(F, 0.0), all_var(F, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(d.y[i]);
        count[c] += 1.0;
        for (std::size_t j = 0; j < F; ++j) {
            m.mean[c][j] += d.row(i)[j];
            all_mean[j] += d.row(i)[j];
        }
    }
    for (std::size_t j = 0; j < F; ++j) {
        all_mean[j] /= static_cast<double>(n);
        for (int c = 0; c < 2; ++c) {
            m.mean[c][j] /= count[c];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(d.y[i]);
        for (std::size_t j = 0; j < F; ++j) {
            const double x = d.row(i)[j];
            m.var[c][j] += (x - m.mean[c][j]) * (x - m.mean[c][j]);
            all_var[j] += (x - all_mean[j]) * (x - all_mean[j]);
        }
    }
    double max_var = 0.0;
    for (std::size_t j = 0; j < F; ++j) {
        max_var = std::max(max_var, all_var[j] / static_cast<double>(n));
    }
    m.epsilon = p.var_smoothing * max_var;
    for (int c = 0; c < 2; ++c) {
        for (std::size_t j = 0; j < F; ++j) {
            m.var[c][j] = std::max(m.var[c][j] / count[c] + m.epsilon, std::numeric_limits<double>::min());
        }
    }
    m.priors = p.priors ? *p.priors : std::array<double, 2>{count[0] / static_cast<double>(n), count[1] / static_cast<double>(n)};
    return m;
}

double predict_one(const FittedState& state, const double* x)
{
    return std::visit(
        [x](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, DecisionTreeModel>) {
                return m.tree.predict(x);
            } else if constexpr (std::is_same_v<T, ForestModel>) {
                // mean as offset from the first tree: identical trees give the exact leaf value
                const double first = m.trees.front().predict(x);
                double offset = 0.0;
                for (std::size_t t = 1; t < m.trees.size(); ++t) {
                    offset += m.trees[t].predict(x) - first;
                }
                return first + offset / static_cast<double>(m.trees.size());
            } else if constexpr (std::is_same_v<T, BoostModel>) {
                double raw = m.base_score;
                for (const auto& t : m.trees) {
                    raw += m.learning_rate * t.predict(x);
                }
                return sigmoid(raw);
            } else if constexpr (std::is_same_v<T, LogisticModel>) {
                double z = m.b;
                for (std::size_t j = 0; j < m.w.size(); ++j) {
                    z += m.w[j] * x[j];
                }
                return sigmoid(z);
            } else {
                std::array<double, 2> jll{};
                for (std::size_t c = 0; c < 2; ++c) {
                    double s = std::log(m.priors[c]);
                    for (std::size_t j = 0; j < m.mean[c].size(); ++j) {
                        const double dx = x[j] - m.mean[c][j];
                        s -= 0.5 * std::log(2.0 * std::numbers::pi * m.var[c][j]) + 0.5 * dx * dx / m.var[c][j];
                    }
                    jll[c] = s;
                }
                if (jll[1] == -std::numeric_limits<double>::infinity()) {
                    return 0.0;
                }
                if (jll[0] == -std::numeric_limits<double>::infinity()) {
                    return 1.0;
                }
                return sigmoid(jll[1] - jll[0]);
            }
        },
        state);
}

} // namespace

std::vector<double> TrainedModel::predict_p1(const double* X, std::size_t rows, std::size_t features) const
{
    if (features != this->features()) {
        fail("DimensionMismatch", ApiCode::unprocessable,
             "model expects " + std::to_string(this->features()) + " features, got " + std::to_string(features));
    }
    std::vector<double> out(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        out[i] = predict_one(state, X + i * features);
    }
    return out;
}

std::vector<double> TrainedModel::predict_p1(const LabeledSet& data) const
{
    return predict_p1(data.X.data(), data.rows(), data.features());
}

std::vector<std::array<double, 2>> TrainedModel::predict_proba(const LabeledSet& data) const
{
    const auto p1 = predict_p1(data);
    std::vector<std::array<double, 2>> out(p1.size());
    for (std::size_t i = 0; i < p1.size(); ++i) {
        out[i] = {1.0 - p1[i], p1[i]};
    }
    return out;
}

TrainedModel train(const ModelSpec& spec, const LabeledSet& data, std::uint64_t seed)
{
    data.validate();
    const auto [c0, c1] = data.counts();
    if (c0 == 0 || c1 == 0) {
        fail("SingleClass", ApiCode::unprocessable, "training data must contain both classes");
    }
    TrainedModel model;
    model.spec = spec;
    model.feature_names = data.feature_names;
    model.seed = seed;
    model.train_rows = data.rows();
    const auto start = std::chrono::steady_clock::now();
    switch (spec.kind) {
    case ModelKind::decision_tree: model.state = fit_tree(parse_tree_params(spec.hyperparameters), data, seed); break;
    case ModelKind::random_forest: model.state = fit_forest(parse_forest_params(spec.hyperparameters), data, seed); break;
    case ModelKind::gradient_boosted_tree:
        model.state = fit_boost(parse_boost_params(spec.hyperparameters), data, seed);
        break;
    case ModelKind::logistic_regression: {
        const auto p = parse_logistic_params(spec.hyperparameters);
        const auto s = class_weights(data.y, p.class_weight);
        model.state = p.solver == Solver::liblinear ? fit_coordinate_descent(p, data, s) : fit_proximal_gradient(p, data, s);
        break;
    }
    case ModelKind::naive_bayes: model.state = fit_bayes(parse_bayes_params(spec.hyperparameters), data); break;
    }
    model.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return model;
}

} // namespace ul::learn
