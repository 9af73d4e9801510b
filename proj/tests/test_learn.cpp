#include "support.hpp"
#include "tuned.hpp"

#include "urbanlens/learn.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

using namespace ul;
using namespace ul::learn;
using nlohmann::json;

namespace {

double pair_count_auc(const std::vector<double>& s, const std::vector<int>& y)
{
    double wins = 0, pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (y[i] != 1) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[j] != 0) continue;
            pairs += 1;
            wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
    }
    return wins / pairs;
}

// Labels that are a deterministic function of distinct feature rows.
LabeledSet consistent_set(std::size_t n, std::uint64_t seed)
{
    LabeledSet d;
    d.feature_names = {"a", "b", "c"};
    Rng rng = derive_rng(seed, 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double x[3] = {normal(rng), normal(rng), static_cast<double>(i)};
        d.push_row(x, (std::sin(3 * x[0]) + x[1] * x[1] > 0.6) ? 1 : 0, static_cast<std::int64_t>(i));
    }
    return d;
}

ModelSpec spec(ModelKind kind, json hp = json::object())
{
    return {kind, std::move(hp)};
}

} // namespace

TEST_CASE("decision tree memorizes consistent data")
{
    const auto d = consistent_set(300, 1);
    const auto m = train(spec(ModelKind::decision_tree), d, 1);
    CHECK(evaluate(m, d, "train").accuracy == 1.0);
}

TEST_CASE("forest without bootstrap or feature sampling equals one tree")
{
    const auto d = test::blobs(200, 60, 3, 2, 0.8);
    const auto dt = train(spec(ModelKind::decision_tree, {{"max_depth", 6}}), d, 3);
    const auto rf = train(spec(ModelKind::random_forest,
                                {{"bootstrap", false}, {"max_features", nullptr}, {"n_estimators", 7}, {"max_depth", 6}}),
                          d, 3);
    const auto& forest = std::get<ForestModel>(rf.state);
    for (const auto& t : forest.trees) CHECK(t == std::get<DecisionTreeModel>(dt.state).tree);
    CHECK(rf.predict_p1(d) == dt.predict_p1(d));
}

TEST_CASE("boosting with a zero learning rate predicts the prior")
{
    const auto d = test::blobs(150, 50, 2, 4);
    const auto m = train(spec(ModelKind::gradient_boosted_tree, {{"learning_rate", 0.0}, {"n_estimators", 20}}), d, 1);
    for (double p : m.predict_p1(d)) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("logistic regression objective never increases")
{
    const auto d = test::blobs(300, 80, 4, 5, 0.7);
    for (const char* solver : {"liblinear", "saga"}) {
        for (const char* penalty : {"l1", "l2"}) {
            for (double C : {0.01, 1.0, 100.0}) {
                const auto m = train(
                    spec(ModelKind::logistic_regression, {{"solver", solver}, {"penalty", penalty}, {"C", C}}), d, 1);
                const auto& lr = std::get<LogisticModel>(m.state);
                REQUIRE(lr.loss_trace.size() >= 2);
                for (std::size_t i = 1; i < lr.loss_trace.size(); ++i) {
                    CHECK(lr.loss_trace[i] <= lr.loss_trace[i - 1] * (1 + 1e-12));
                }
            }
        }
    }
}

TEST_CASE("naive Bayes matches a hand computation")
{
    LabeledSet d;
    d.feature_names = {"x"};
    const double xs[] = {1, 2, 3, 6, 8};
    const int ys[] = {0, 0, 0, 1, 1};
    for (int i = 0; i < 5; ++i) d.push_row(std::span<const double>(&xs[i], 1), ys[i], i);
    const auto m = train(spec(ModelKind::naive_bayes, {{"var_smoothing", 0.0}}), d, 1);
    // class 0: mean 2, var 2/3; class 1: mean 7, var 1; priors 3/5 and 2/5
    auto logpdf = [](double x, double mu, double var) {
        return -0.5 * std::log(2 * std::numbers::pi * var) - 0.5 * (x - mu) * (x - mu) / var;
    };
    for (double x : {0.0, 4.0, 4.5, 5.0, 9.0}) {
        const double j0 = std::log(0.6) + logpdf(x, 2, 2.0 / 3), j1 = std::log(0.4) + logpdf(x, 7, 1);
        const double expected = 1 / (1 + std::exp(j0 - j1));
        CHECK(m.predict_p1(&x, 1, 1)[0] == doctest::Approx(expected).epsilon(1e-12));
    }
    const auto fixed = train(spec(ModelKind::naive_bayes, {{"priors", {0.3, 0.7}}}), d, 1);
    CHECK(std::get<BayesModel>(fixed.state).priors[1] == 0.7);
}

TEST_CASE("every tuned hyperparameter vector validates and trains")
{
    const auto d = test::blobs(120, 40, 3, 6);
    for (const auto& set : test::tuned_sets()) {
        CAPTURE(set.method);
        const std::pair<ModelKind, json> cases[] = {{ModelKind::decision_tree, set.dt},
                                                    {ModelKind::gradient_boosted_tree, set.gbt},
                                                    {ModelKind::logistic_regression, set.lr},
                                                    {ModelKind::naive_bayes, set.nb},
                                                    {ModelKind::random_forest, set.rf}};
        for (const auto& [kind, hp] : cases) {
            CAPTURE(to_string(kind));
            CHECK(test::error_kind([&] { validate(spec(kind, hp)); }) == "<none>");
        }
    }
    // training cost is dominated by the large ensembles, so fit one set
    const auto sets = test::tuned_sets();
    const auto& s = sets.front();
    for (const auto& [kind, hp] : {std::pair{ModelKind::decision_tree, s.dt}, {ModelKind::logistic_regression, s.lr},
                                   {ModelKind::naive_bayes, s.nb}}) {
        CHECK(train(spec(kind, hp), d, 1).predict_p1(d).size() == d.rows());
    }
}

TEST_CASE("hyperparameter validation rejects bad input")
{
    CHECK(test::error_kind([] { validate(spec(ModelKind::decision_tree, {{"depth", 3}})); }) == "InvalidHyperparameter");
    CHECK(test::error_kind([] { validate(spec(ModelKind::decision_tree, {{"criterion", "mse"}})); }) ==
          "InvalidHyperparameter");
    CHECK(test::error_kind([] { validate(spec(ModelKind::gradient_boosted_tree, {{"subsample", 1.5}})); }) ==
          "InvalidHyperparameter");
    CHECK(test::error_kind([] { validate(spec(ModelKind::logistic_regression, {{"C", -1.0}})); }) ==
          "InvalidHyperparameter");
    CHECK(test::error_kind([] { validate(spec(ModelKind::naive_bayes, {{"priors", {0.5, 0.6}}})); }) ==
          "InvalidHyperparameter");
    CHECK(test::error_kind([] { validate(spec(ModelKind::decision_tree, {{"class_weight", "balanced_subsample"}})); }) ==
          "InvalidHyperparameter");
    CHECK(test::error_kind([] { parse_model_kind("svm"); }) != "<none>");
    CHECK(parse_model_kind("gbt") == ModelKind::gradient_boosted_tree);
}

TEST_CASE("training input errors")
{
    CHECK(test::error_kind([] { train(spec(ModelKind::decision_tree), test::blobs(20, 0, 2, 1), 1); }) == "SingleClass");
    auto d = test::blobs(20, 5, 2, 1);
    d.X[3] = std::nan("");
    CHECK(test::error_kind([&] { train(spec(ModelKind::naive_bayes), d, 1); }) == "NonFiniteFeature");
    const auto m = train(spec(ModelKind::naive_bayes), test::blobs(20, 5, 2, 1), 1);
    CHECK(test::error_kind([&] { m.predict_p1(test::blobs(5, 5, 3, 1)); }) == "DimensionMismatch");
}

TEST_CASE("AUC equals pair counting, ties included")
{
    Rng rng = derive_rng(7, 7);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 20 + uniform_index(rng, 480);
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = uniform01(rng) < 0.3 ? 1 : 0;
            s[i] = trial % 2 ? std::round(uniform01(rng) * 10) / 10 : uniform01(rng) + 0.3 * y[i];
        }
        y[0] = 0;
        y[1] = 1;
        CHECK(roc_auc(s, y) == pair_count_auc(s, y));
    }
    CHECK(roc_auc({0.1, 0.9}, {0, 1}) == 1.0);
    CHECK(roc_auc({0.5, 0.5}, {0, 1}) == 0.5);
    CHECK(test::error_kind([] { roc_auc({0.1, 0.2}, {1, 1}); }) == "SingleClass");
}

TEST_CASE("metric identities hold exactly")
{
    Rng rng = derive_rng(8, 8);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 3 + uniform_index(rng, 500);
        std::vector<double> p(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = uniform01(rng) < 0.2 ? 1 : 0;
            p[i] = uniform01(rng);
        }
        y[0] = 1;
        y[1] = 0;
        const auto r = score_predictions(p, y, "test");
        CHECK(r.error == 1.0 - r.accuracy);
        CHECK(r.weighted_recall == r.accuracy);
        CHECK(r.weighted_f1 >= 0.0);
        CHECK(r.weighted_f1 <= 1.0);
    }
}

TEST_CASE("serialization round-trips every model kind")
{
    const auto d = test::blobs(80, 30, 3, 9);
    for (auto kind : all_model_kinds()) {
        json hp = json::object();
        if (kind == ModelKind::random_forest || kind == ModelKind::gradient_boosted_tree) hp["n_estimators"] = 10;
        const auto m = train(spec(kind, hp), d, 4);
        const auto blob = serialize(m);
        const auto back = deserialize(blob);
        CHECK(back.predict_p1(d) == m.predict_p1(d));
        CHECK(back.feature_names == m.feature_names);
        CHECK(back.spec.to_json() == m.spec.to_json());
        CHECK(serialize(back) == blob);

        CHECK(test::error_kind([&] { deserialize(blob.substr(0, blob.size() / 2)); }) == "CorruptModel");
        auto bad_magic = blob;
        bad_magic[0] = 'X';
        CHECK(test::error_kind([&] { deserialize(bad_magic); }) == "CorruptModel");
        auto future = blob;
        future[8] = 9; // little-endian format version follows the 8-byte magic
        CHECK(test::error_kind([&] { deserialize(future); }) == "UnsupportedModelVersion");
    }
}

TEST_CASE("stratified folds partition each class evenly")
{
    Rng rng = derive_rng(10, 10);
    std::vector<int> y(203);
    for (auto& v : y) v = uniform01(rng) < 0.25 ? 1 : 0;
    const auto folds = stratified_folds(y, 3, 5);
    REQUIRE(folds.size() == 3);
    std::set<std::size_t> seen;
    std::size_t ones = 0;
    for (int v : y) ones += v;
    for (const auto& f : folds) {
        std::size_t f1 = 0;
        for (auto i : f) {
            CHECK(seen.insert(i).second);
            f1 += y[i];
        }
        CHECK(std::abs(static_cast<double>(f1) - static_cast<double>(ones) / 3) <= 1.0);
    }
    CHECK(seen.size() == y.size());
    CHECK(stratified_folds(y, 3, 5) == folds);
    CHECK(test::error_kind([&] { stratified_folds(y, 1, 5); }) == "InvalidFolds");
}

TEST_CASE("random search honours the budget and keeps the best trial")
{
    const auto d = test::blobs(150, 50, 2, 11, 1.0);
    for (auto kind : {ModelKind::decision_tree, ModelKind::naive_bayes, ModelKind::logistic_regression}) {
        const auto space = default_search_space(kind);
        const auto one = random_search(space, d, 3, 1);
        CHECK(one.trace.size() == 1);
        const auto r = random_search(space, d, 3, 4);
        REQUIRE(r.trace.size() == 4);
        double best = -1;
        for (const auto& t : r.trace) {
            CHECK(t.fold_auc.size() == 3);
            CHECK(t.objective == -t.mean_auc);
            best = std::max(best, t.mean_auc);
            CHECK(test::error_kind([&] { validate(spec(kind, t.hyperparameters)); }) == "<none>");
        }
        CHECK(r.best_auc == best);
        CHECK(random_search(space, d, 3, 4).best.to_json() == r.best.to_json());
    }
    CHECK(test::error_kind([&] { random_search(default_search_space(ModelKind::naive_bayes), d, 1, 0); }) ==
          "InvalidBudget");
}

TEST_CASE("scaler standardizes the fitted data")
{
    const auto d = test::blobs(100, 40, 3, 12, 2.0);
    const auto s = Scaler::fit(d);
    const auto z = s.apply(d);
    for (std::size_t f = 0; f < d.features(); ++f) {
        double mean = 0, sq = 0;
        for (std::size_t i = 0; i < z.rows(); ++i) mean += z.row(i)[f];
        mean /= static_cast<double>(z.rows());
        for (std::size_t i = 0; i < z.rows(); ++i) sq += (z.row(i)[f] - mean) * (z.row(i)[f] - mean);
        CHECK(std::abs(mean) < 1e-12);
        CHECK(sq / static_cast<double>(z.rows()) == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK(test::error_kind([&] { s.apply(test::blobs(5, 5, 2, 1)); }) == "DimensionMismatch");
}

TEST_CASE("run_experiment reports before and after counts")
{
    const auto d = test::blobs(300, 60, 3, 13, 1.0);
    const auto split = resample::stratified_split(d, 0.2, 7);
    Pipeline p;
    p.method = resample::Method::random_us;
    p.kind = ModelKind::naive_bayes;
    const auto r = run_experiment(p, split, 7);
    CHECK(r.counts_before == split.train.counts());
    CHECK(r.counts_after == std::pair<std::size_t, std::size_t>{48, 48});
    CHECK(r.test.rows == split.test.rows());
    CHECK(r.train.rows == 96); // train metrics are on the resampled set
    CHECK(r.test.auc > 0.8);
}
