#include "urbanlens/learn.hpp"

#include "urbanlens/error.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <numeric>

namespace ul::learn {

using nlohmann::json;

const char* to_string(ModelKind kind)
{
    switch (kind) {
    case ModelKind::decision_tree: return "decision_tree";
    case ModelKind::naive_bayes: return "naive_bayes";
    case ModelKind::logistic_regression: return "logistic_regression";
    case ModelKind::gradient_boosted_tree: return "gradient_boosted_tree";
    case ModelKind::random_forest: return "random_forest";
    }
    return "decision_tree";
}

const char* short_name(ModelKind kind)
{
    switch (kind) {
    case ModelKind::decision_tree: return "dt";
    case ModelKind::naive_bayes: return "nb";
    case ModelKind::logistic_regression: return "lr";
    case ModelKind::gradient_boosted_tree: return "gbt";
    case ModelKind::random_forest: return "rf";
    }
    return "dt";
}

const std::vector<ModelKind>& all_model_kinds()
{
    static const std::vector<ModelKind> kinds{ModelKind::decision_tree, ModelKind::gradient_boosted_tree,
                                              ModelKind::logistic_regression, ModelKind::naive_bayes,
                                              ModelKind::random_forest};
    return kinds;
}

ModelKind parse_model_kind(std::string_view text)
{
    for (auto k : all_model_kinds()) {
        if (text == to_string(k) || text == short_name(k)) {
            return k;
        }
    }
    fail("UnknownModel", ApiCode::bad_request, "unknown model kind '" + std::string(text) + "'");
}

json ModelSpec::to_json() const
{
    return {{"kind", to_string(kind)}, {"hyperparameters", hyperparameters}};
}

ModelSpec ModelSpec::from_json(const json& doc)
{
    if (!doc.is_object() || !doc.contains("kind") || !doc["kind"].is_string()) {
        fail("InvalidHyperparameter", ApiCode::bad_request, "model spec needs a 'kind' string");
    }
    ModelSpec spec;
    spec.kind = parse_model_kind(doc["kind"].get<std::string>());
    if (doc.contains("hyperparameters")) {
        spec.hyperparameters = doc["hyperparameters"];
    }
    validate(spec);
    return spec;
}

// ---------------------------------------------------------------- serialization

namespace {

constexpr char kMagic[8] = {'U', 'L', 'M', 'O', 'D', 'E', 'L', '\0'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
public:
    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i) {
            out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
        }
    }
    void u64(std::uint64_t v)
    {
        for (int i = 0; i < 8; ++i) {
            out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
        }
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(std::string_view s) { out_.append(s); }
    void doubles(const std::vector<double>& v)
    {
        u32(static_cast<std::uint32_t>(v.size()));
        for (double d : v) {
            f64(d);
        }
    }
    void tree(const Tree& t)
    {
        u32(static_cast<std::uint32_t>(t.nodes.size()));
        for (const auto& n : t.nodes) {
            i32(n.feature);
            f64(n.threshold);
            i32(n.left);
            i32(n.right);
            f64(n.value);
        }
    }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

[[noreturn]] void corrupt(const std::string& why)
{
    fail("CorruptModel", ApiCode::unprocessable, "model file is corrupt: " + why);
}

class Reader {
public:
    explicit Reader(std::string_view in) : in_(in) {}

    std::uint64_t bytes_le(int n)
    {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
        }
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(bytes_le(4)); }
    std::uint64_t u64() { return bytes_le(8); }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string_view take(std::size_t n)
    {
        need(n);
        auto s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::vector<double> doubles()
    {
        const auto n = u32();
        need(static_cast<std::size_t>(n) * 8);
        std::vector<double> v(n);
        for (auto& d : v) {
            d = f64();
        }
        return v;
    }
    Tree tree()
    {
        const auto n = u32();
        need(static_cast<std::size_t>(n) * 24);
        Tree t;
        t.nodes.resize(n);
        for (std::uint32_t k = 0; k < n; ++k) {
            auto& node = t.nodes[k];
            node.feature = i32();
            node.threshold = f64();
            node.left = i32();
            node.right = i32();
            node.value = f64();
            if (node.feature >= 0 && (node.left <= static_cast<std::int32_t>(k) || node.right <= static_cast<std::int32_t>(k) ||
                                      node.left >= static_cast<std::int32_t>(n) || node.right >= static_cast<std::int32_t>(n))) {
                corrupt("tree links out of range");
            }
        }
        if (n == 0) {
            corrupt("empty tree");
        }
        return t;
    }
    bool done() const { return pos_ == in_.size(); }

private:
    void need(std::size_t n) const
    {
        if (in_.size() - pos_ < n) {
            corrupt("truncated payload");
        }
    }

    std::string_view in_;
    std::size_t pos_ = 0;
};

} // namespace

std::string serialize(const TrainedModel& model)
{
    json header = {{"format", kFormatVersion},
                   {"spec", model.spec.to_json()},
                   {"feature_names", model.feature_names},
                   {"seed", model.seed},
                   {"fit_seconds", model.fit_seconds},
                   {"train_rows", model.train_rows}};
    const auto text = header.dump();
    Writer w;
    w.bytes(std::string_view(kMagic, sizeof kMagic));
    w.u32(kFormatVersion);
    w.u32(static_cast<std::uint32_t>(text.size()));
    w.bytes(text);
    std::visit(
        [&w](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, DecisionTreeModel>) {
                w.tree(m.tree);
            } else if constexpr (std::is_same_v<T, ForestModel>) {
                w.u32(static_cast<std::uint32_t>(m.trees.size()));
                for (const auto& t : m.trees) {
                    w.tree(t);
                }
            } else if constexpr (std::is_same_v<T, BoostModel>) {
                w.f64(m.base_score);
                w.f64(m.learning_rate);
                w.u32(static_cast<std::uint32_t>(m.trees.size()));
                for (const auto& t : m.trees) {
                    w.tree(t);
                }
            } else if constexpr (std::is_same_v<T, LogisticModel>) {
                w.doubles(m.w);
                w.f64(m.b);
                w.u64(m.iterations);
                w.doubles(m.loss_trace);
            } else {
                w.f64(m.priors[0]);
                w.f64(m.priors[1]);
                w.f64(m.epsilon);
                for (int c = 0; c < 2; ++c) {
                    w.doubles(m.mean[c]);
                    w.doubles(m.var[c]);
                }
            }
        },
        model.state);
    return w.take();
}

TrainedModel deserialize(std::string_view bytes)
{
    Reader r(bytes);
    if (r.take(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) {
        corrupt("bad magic");
    }
    const auto version = r.u32();
    if (version != kFormatVersion) {
        fail("UnsupportedModelVersion", ApiCode::unprocessable, "model format version " + std::to_string(version));
    }
    const auto header_len = r.u32();
    json header;
    try {
        header = json::parse(r.take(header_len));
    } catch (const json::exception&) {
        corrupt("header is not JSON");
    }
    TrainedModel model;
    try {
        model.spec = ModelSpec::from_json(header.at("spec"));
        model.feature_names = header.at("feature_names").get<std::vector<std::string>>();
        model.seed = header.at("seed").get<std::uint64_t>();
        model.fit_seconds = header.at("fit_seconds").get<double>();
        model.train_rows = header.at("train_rows").get<std::size_t>();
    } catch (const json::exception&) {
        corrupt("header misses fields");
    }
    const std::size_t F = model.features();
    switch (model.spec.kind) {
    case ModelKind::decision_tree: model.state = DecisionTreeModel{r.tree()}; break;
    case ModelKind::random_forest: {
        ForestModel m;
        const auto n = r.u32();
        if (n == 0) {
            corrupt("forest without trees");
        }
        for (std::uint32_t t = 0; t < n; ++t) {
            m.trees.push_back(r.tree());
        }
        model.state = std::move(m);
        break;
    }
    case ModelKind::gradient_boosted_tree: {
        BoostModel m;
        m.base_score = r.f64();
        m.learning_rate = r.f64();
        const auto n = r.u32();
        for (std::uint32_t t = 0; t < n; ++t) {
            m.trees.push_back(r.tree());
        }
        model.state = std::move(m);
        break;
    }
    case ModelKind::logistic_regression: {
        LogisticModel m;
        m.w = r.doubles();
        m.b = r.f64();
        m.iterations = r.u64();
        m.loss_trace = r.doubles();
        if (m.w.size() != F) {
            corrupt("coefficient count does not match features");
        }
        model.state = std::move(m);
        break;
    }
    case ModelKind::naive_bayes: {
        BayesModel m;
        m.priors = {r.f64(), r.f64()};
        m.epsilon = r.f64();
        for (int c = 0; c < 2; ++c) {
            m.mean[c] = r.doubles();
            m.var[c] = r.doubles();
            if (m.mean[c].size() != F || m.var[c].size() != F) {
                corrupt("class statistics do not match features");
            }
        }
        model.state = std::move(m);
        break;
    }
    }
    // split features must exist
    auto check_tree = [F](const Tree& t) {
        for (const auto& n : t.nodes) {
            if (n.feature >= 0 && static_cast<std::size_t>(n.feature) >= F) {
                corrupt("split feature out of range");
            }
        }
    };
    if (auto* m = std::get_if<DecisionTreeModel>(&model.state)) {
        check_tree(m->tree);
    } else if (auto* f = std::get_if<ForestModel>(&model.state)) {
        std::for_each(f->trees.begin(), f->trees.end(), check_tree);
    } else if (auto* g = std::get_if<BoostModel>(&model.state)) {
        std::for_each(g->trees.begin(), g->trees.end(), check_tree);
    }
    if (!r.done()) {
        corrupt("trailing bytes");
    }
    return model;
}

// ---------------------------------------------------------------- metrics

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels)
{
    if (scores.size() != labels.size()) {
        fail("LengthMismatch", ApiCode::unprocessable, "scores and labels differ in length");
    }
    const std::size_t n = scores.size();
    double n1 = 0.0;
    for (int l : labels) {
        n1 += l == 1;
    }
    const double n0 = static_cast<double>(n) - n1;
    if (n1 == 0.0 || n0 == 0.0) {
        fail("SingleClass", ApiCode::unprocessable, "AUC needs both classes");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) {
            ++j;
        }
        const double midrank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[order[k]] == 1) {
                rank_sum += midrank;
            }
        }
        i = j + 1;
    }
    return (rank_sum - n1 * (n1 + 1.0) / 2.0) / (n1 * n0);
}

EvalReport score_predictions(const std::vector<double>& p1, const std::vector<int>& labels, const std::string& split)
{
    if (p1.size() != labels.size() || p1.empty()) {
        fail("LengthMismatch", ApiCode::unprocessable, "predictions and labels differ in length or are empty");
    }
    double tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < p1.size(); ++i) {
        const bool pred = p1[i] > 0.5;
        if (labels[i] == 1) {
            (pred ? tp : fn) += 1;
        } else {
            (pred ? fp : tn) += 1;
        }
    }
    auto ratio = [](double a, double b) { return b > 0.0 ? a / b : 0.0; };
    auto f1 = [](double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; };
    const double n = tp + fp + tn + fn;
    const double s1 = tp + fn, s0 = tn + fp;
    const double prec1 = ratio(tp, tp + fp), rec1 = ratio(tp, tp + fn);
    const double prec0 = ratio(tn, tn + fn), rec0 = ratio(tn, tn + fp);
    EvalReport r;
    r.split = split;
    r.rows = p1.size();
    r.accuracy = (tp + tn) / n;
    r.error = 1.0 - r.accuracy;
    r.weighted_precision = (s0 * prec0 + s1 * prec1) / n;
    // support-weighted recall is (tn + tp) / n; summing the counts avoids the rounding of s_c * (x / s_c)
    r.weighted_recall = r.accuracy;
    r.weighted_f1 = (s0 * f1(prec0, rec0) + s1 * f1(prec1, rec1)) / n;
    r.auc = roc_auc(p1, labels);
    return r;
}

EvalReport evaluate(const TrainedModel& model, const LabeledSet& data, const std::string& split)
{
    if (data.rows() == 0) {
        fail("EmptyData", ApiCode::unprocessable, "nothing to evaluate");
    }
    const auto start = std::chrono::steady_clock::now();
    const auto p1 = model.predict_p1(data);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    auto report = score_predictions(p1, data.y, split);
    report.time_s = std::round(elapsed * 1000.0) / 1000.0;
    return report;
}

json EvalReport::to_json() const
{
    return {{"split", split},
            {"time_s", std::round(time_s * 1000.0) / 1000.0},
            {"accuracy", sig6(accuracy)},
            {"precision", sig6(weighted_precision)},
            {"recall", sig6(weighted_recall)},
            {"f1", sig6(weighted_f1)},
            {"auc", sig6(auc)},
            {"error", sig6(error)},
            {"rows", rows}};
}

// ---------------------------------------------------------------- search

json SearchSpace::sample(Rng& rng) const
{
    json hp = json::object();
    for (const auto& p : params) {
        switch (p.kind) {
        case ParamDist::Kind::choice: hp[p.name] = p.choices[uniform_index(rng, p.choices.size())]; break;
        case ParamDist::Kind::int_range: {
            const auto lo = static_cast<long>(p.lo), hi = static_cast<long>(p.hi);
            const auto steps = static_cast<std::size_t>((hi - lo) / p.step + 1);
            hp[p.name] = lo + static_cast<long>(uniform_index(rng, steps)) * p.step;
            break;
        }
        case ParamDist::Kind::uniform: hp[p.name] = p.lo + (p.hi - p.lo) * uniform01(rng); break;
        case ParamDist::Kind::log_uniform:
            hp[p.name] = std::exp(std::log(p.lo) + (std::log(p.hi) - std::log(p.lo)) * uniform01(rng));
            break;
        }
    }
    return hp;
}

json SearchSpace::to_json() const
{
    json out = json::object();
    for (const auto& p : params) {
        switch (p.kind) {
        case ParamDist::Kind::choice: out[p.name] = {{"choice", p.choices}}; break;
        case ParamDist::Kind::int_range: out[p.name] = {{"int_range", {p.lo, p.hi}}, {"step", p.step}}; break;
        case ParamDist::Kind::uniform: out[p.name] = {{"uniform", {p.lo, p.hi}}}; break;
        case ParamDist::Kind::log_uniform: out[p.name] = {{"log_uniform", {p.lo, p.hi}}}; break;
        }
    }
    return {{"kind", to_string(kind)}, {"params", out}};
}

namespace {

ParamDist choice(std::string name, std::vector<json> values)
{
    ParamDist p;
    p.name = std::move(name);
    p.kind = ParamDist::Kind::choice;
    p.choices = std::move(values);
    return p;
}

ParamDist int_range(std::string name, long lo, long hi, long step = 1)
{
    ParamDist p;
    p.name = std::move(name);
    p.kind = ParamDist::Kind::int_range;
    p.lo = static_cast<double>(lo);
    p.hi = static_cast<double>(hi);
    p.step = step;
    return p;
}

ParamDist real_range(std::string name, ParamDist::Kind kind, double lo, double hi)
{
    ParamDist p;
    p.name = std::move(name);
    p.kind = kind;
    p.lo = lo;
    p.hi = hi;
    return p;
}

} // namespace

SearchSpace default_search_space(ModelKind kind)
{
    using K = ParamDist::Kind;
    SearchSpace s;
    s.kind = kind;
    switch (kind) {
    case ModelKind::decision_tree:
        s.params = {choice("criterion", {"gini", "entropy"}), int_range("max_depth", 1, 20),
                    int_range("min_samples_split", 2, 20), int_range("min_samples_leaf", 2, 20),
                    choice("max_features", {"sqrt", "log2", nullptr}), choice("class_weight", {nullptr, "balanced"})};
        break;
    case ModelKind::gradient_boosted_tree:
        s.params = {int_range("n_estimators", 100, 1000, 50), int_range("max_depth", 1, 10),
                    real_range("learning_rate", K::log_uniform, 1e-5, 1.0), real_range("subsample", K::uniform, 0.5, 1.0),
                    real_range("min_samples_split", K::uniform, 0.01, 0.5),
                    real_range("min_samples_leaf", K::uniform, 0.01, 0.5),
                    choice("max_features", {"sqrt", "log2", nullptr})};
        break;
    case ModelKind::logistic_regression:
        s.params = {real_range("C", K::log_uniform, 1e-5, 100.0), choice("penalty", {"l1", "l2"}),
                    choice("solver", {"liblinear", "saga"}), choice("class_weight", {nullptr, "balanced"}),
                    int_range("max_iter", 10000, 10500)};
        break;
    case ModelKind::naive_bayes:
        s.params = {choice("priors", {nullptr, json::array({0.5, 0.5}), json::array({0.3, 0.7})}),
                    real_range("var_smoothing", K::log_uniform, 1e-20, 1.0)};
        break;
    case ModelKind::random_forest:
        s.params = {int_range("n_estimators", 100, 1000, 50), int_range("max_depth", 80, 150),
                    int_range("min_samples_split", 2, 20), int_range("min_samples_leaf", 2, 20),
                    choice("max_features", {"sqrt", "log2"}), choice("bootstrap", {true, false}),
                    choice("class_weight", {nullptr, "balanced", "balanced_subsample"})};
        break;
    }
    return s;
}

namespace {
constexpr std::uint64_t kFoldStream = 0x666f6c64ULL;
constexpr std::uint64_t kSearchStream = 0x736561726368ULL;
} // namespace

std::vector<std::vector<std::size_t>> stratified_folds(const std::vector<int>& y, std::size_t folds, std::uint64_t seed)
{
    if (folds < 2) {
        fail("InvalidFolds", ApiCode::bad_request, "cross-validation needs at least 2 folds");
    }
    std::vector<std::vector<std::size_t>> out(folds);
    for (int label : {0, 1}) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (y[i] == label) {
                rows.push_back(i);
            }
        }
        if (rows.size() < folds) {
            fail("ClassTooSmall", ApiCode::unprocessable,
                 "class " + std::to_string(label) + " has fewer samples than folds");
        }
        auto rng = derive_rng(seed, kFoldStream, static_cast<std::uint64_t>(label));
        shuffle(rows, rng);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            out[i % folds].push_back(rows[i]);
        }
    }
    for (auto& f : out) {
        std::sort(f.begin(), f.end());
    }
    return out;
}

SearchResult random_search(const SearchSpace& space, const LabeledSet& train, std::uint64_t seed, std::size_t budget,
                           std::size_t folds)
{
    if (budget < 1) {
        fail("InvalidBudget", ApiCode::bad_request, "search budget must be at least 1");
    }
    const auto parts = stratified_folds(train.y, folds, seed);
    std::vector<LabeledSet> fit_sets, val_sets;
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<bool> in_val(train.rows(), false);
        for (auto i : parts[f]) {
            in_val[i] = true;
        }
        std::vector<std::size_t> fit_idx;
        for (std::size_t i = 0; i < train.rows(); ++i) {
            if (!in_val[i]) {
                fit_idx.push_back(i);
            }
        }
        fit_sets.push_back(train.select(fit_idx));
        val_sets.push_back(train.select(parts[f]));
    }
    SearchResult result;
    result.best.kind = space.kind;
    double best_objective = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < budget; ++t) {
        auto rng = derive_rng(seed, kSearchStream, t);
        SearchTrial trial;
        trial.hyperparameters = space.sample(rng);
        const ModelSpec spec{space.kind, trial.hyperparameters};
        for (std::size_t f = 0; f < folds; ++f) {
            const auto model = learn::train(spec, fit_sets[f], seed);
            trial.fold_auc.push_back(roc_auc(model.predict_p1(val_sets[f]), val_sets[f].y));
        }
        trial.mean_auc = std::accumulate(trial.fold_auc.begin(), trial.fold_auc.end(), 0.0) / static_cast<double>(folds);
        trial.objective = -trial.mean_auc;
        if (trial.objective < best_objective) {
            best_objective = trial.objective;
            result.best = spec;
            result.best_auc = trial.mean_auc;
        }
        result.trace.push_back(std::move(trial));
    }
    return result;
}

// ---------------------------------------------------------------- experiment

Scaler Scaler::fit(const LabeledSet& data)
{
    const std::size_t F = data.features(), n = data.rows();
    Scaler s;
    s.mean.assign(F, 0.0);
    s.scale.assign(F, 1.0);
    if (n == 0) {
        return s;
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < F; ++j) {
            s.mean[j] += data.row(i)[j];
        }
    }
    for (auto& m : s.mean) {
        m /= static_cast<double>(n);
    }
    std::vector<double> ss(F, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < F; ++j) {
            const double d = data.row(i)[j] - s.mean[j];
            ss[j] += d * d;
        }
    }
    for (std::size_t j = 0; j < F; ++j) {
        const double sd = std::sqrt(ss[j] / static_cast<double>(n));
        s.scale[j] = sd > 0.0 ? sd : 1.0;
    }
    return s;
}

LabeledSet Scaler::apply(const LabeledSet& data) const
{
    if (data.features() != mean.size()) {
        fail("DimensionMismatch", ApiCode::unprocessable, "scaler fitted on a different feature count");
    }
    LabeledSet out = data;
    const std::size_t F = data.features();
    for (std::size_t i = 0; i < data.rows(); ++i) {
        for (std::size_t j = 0; j < F; ++j) {
            out.X[i * F + j] = (data.X[i * F + j] - mean[j]) / scale[j];
        }
    }
    return out;
}

ExperimentResult run_experiment(const Pipeline& pipeline, const resample::SplitPair& split, std::uint64_t seed)
{
    ExperimentResult r;
    r.pipeline = pipeline;
    r.counts_before = split.train.counts();
    auto train_set = resample::apply(pipeline.method, split.train, seed, pipeline.resample_params);
    r.counts_after = train_set.counts();
    auto test_set = split.test;
    if (pipeline.scale) {
        const auto scaler = Scaler::fit(train_set);
        train_set = scaler.apply(train_set);
        test_set = scaler.apply(test_set);
    }
    if (pipeline.tune_budget > 0) {
        r.search = random_search(default_search_space(pipeline.kind), train_set, seed, pipeline.tune_budget, pipeline.folds);
        r.spec = r.search->best;
    } else {
        r.spec = {pipeline.kind, pipeline.hyperparameters};
        validate(r.spec);
    }
    r.model = train(r.spec, train_set, seed);
    r.train = score_predictions(r.model.predict_p1(train_set), train_set.y, "train");
    r.train.time_s = std::round(r.model.fit_seconds * 1000.0) / 1000.0;
    r.test = evaluate(r.model, test_set, "test");
    return r;
}

} // namespace ul::learn
