#pragma once

#include "urbanlens/resample.hpp"
#include "urbanlens/tree.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace ul::learn {

using resample::LabeledSet;

enum class ModelKind { decision_tree, naive_bayes, logistic_regression, gradient_boosted_tree, random_forest };

const char* to_string(ModelKind kind);
const char* short_name(ModelKind kind); // dt, nb, lr, gbt, rf
// Accepts the full names and the short forms.
ModelKind parse_model_kind(std::string_view text);
const std::vector<ModelKind>& all_model_kinds();

struct ModelSpec {
    ModelKind kind = ModelKind::decision_tree;
    nlohmann::json hyperparameters = nlohmann::json::object();

    nlohmann::json to_json() const;
    static ModelSpec from_json(const nlohmann::json& doc);
};

// Either an absolute count or a fraction of the node/stage sample count.
struct SampleCount {
    bool fraction = false;
    double value = 0.0;

    std::size_t resolve(std::size_t n) const;
};

enum class MaxFeaturesRule { all, sqrt, log2, count, fraction };
struct MaxFeatures {
    MaxFeaturesRule rule = MaxFeaturesRule::all;
    double value = 0.0;

    std::size_t resolve(std::size_t n_features) const; // 0 means all
};

enum class ClassWeight { none, balanced, balanced_subsample };

struct TreeParams {
    Criterion criterion = Criterion::gini;
    std::optional<int> max_depth;
    SampleCount min_samples_split{false, 2.0};
    SampleCount min_samples_leaf{false, 1.0};
    MaxFeatures max_features;
    ClassWeight class_weight = ClassWeight::none;
};

struct ForestParams {
    TreeParams tree;
    std::size_t n_estimators = 100;
    bool bootstrap = true;
};

struct BoostParams {
    std::size_t n_estimators = 100;
    double learning_rate = 0.1;
    double subsample = 1.0;
    int max_depth = 3;
    SampleCount min_samples_split{false, 2.0};
    SampleCount min_samples_leaf{false, 1.0};
    MaxFeatures max_features;
};

enum class Penalty { l1, l2 };
enum class Solver { liblinear, saga };

struct LogisticParams {
    double C = 1.0;
    Penalty penalty = Penalty::l2;
    Solver solver = Solver::liblinear;
    ClassWeight class_weight = ClassWeight::none;
    std::size_t max_iter = 100;
    double tol = 1e-4;
};

struct BayesParams {
    std::optional<std::array<double, 2>> priors;
    double var_smoothing = 1e-9;
};

// Each parser throws InvalidHyperparameter for unknown names or values
// outside the admissible domain.
TreeParams parse_tree_params(const nlohmann::json& hp);
ForestParams parse_forest_params(const nlohmann::json& hp);
BoostParams parse_boost_params(const nlohmann::json& hp);
LogisticParams parse_logistic_params(const nlohmann::json& hp);
BayesParams parse_bayes_params(const nlohmann::json& hp);
void validate(const ModelSpec& spec);

// Per-sample weights n / (2 n_c) for balanced, ones otherwise.
std::vector<double> class_weights(const std::vector<int>& y, ClassWeight mode);

struct DecisionTreeModel {
    Tree tree;
};

struct ForestModel {
    std::vector<Tree> trees;
};

struct BoostModel {
    double base_score = 0.0; // prior log-odds
    double learning_rate = 0.0;
    std::vector<Tree> trees;
};

struct LogisticModel {
    std::vector<double> w;
    double b = 0.0;
    std::size_t iterations = 0;
    std::vector<double> loss_trace; // objective after each pass
};

struct BayesModel {
    std::array<double, 2> priors{};
    std::array<std::vector<double>, 2> mean;
    std::array<std::vector<double>, 2> var;
    double epsilon = 0.0;
};

using FittedState = std::variant<DecisionTreeModel, BayesModel, LogisticModel, BoostModel, ForestModel>;

struct TrainedModel {
    ModelSpec spec;
    std::vector<std::string> feature_names;
    std::uint64_t seed = 0;
    double fit_seconds = 0.0;
    std::size_t train_rows = 0;
    FittedState state;

    std::size_t features() const { return feature_names.size(); }
    // P(class 1) per row; throws DimensionMismatch.
    std::vector<double> predict_p1(const LabeledSet& data) const;
    std::vector<double> predict_p1(const double* X, std::size_t rows, std::size_t features) const;
    std::vector<std::array<double, 2>> predict_proba(const LabeledSet& data) const;
};

// Throws SingleClass, InvalidHyperparameter, NonFiniteFeature.
TrainedModel train(const ModelSpec& spec, const LabeledSet& data, std::uint64_t seed);

// Versioned binary blob: magic, format version, JSON header, payload.
std::string serialize(const TrainedModel& model);
TrainedModel deserialize(std::string_view bytes);

// Mann-Whitney statistic with midranks for ties.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct EvalReport {
    std::string split; // "train" or "test"
    double time_s = 0.0;
    double accuracy = 0.0;
    double weighted_f1 = 0.0;
    double weighted_precision = 0.0;
    double weighted_recall = 0.0;
    double auc = 0.0;
    double error = 0.0;
    std::size_t rows = 0;

    nlohmann::json to_json() const;
};

// Metrics from hard labels (threshold 0.5 on p1) and the p1 scores.
EvalReport score_predictions(const std::vector<double>& p1, const std::vector<int>& labels, const std::string& split);
EvalReport evaluate(const TrainedModel& model, const LabeledSet& data, const std::string& split = "test");

struct ParamDist {
    enum class Kind { choice, int_range, uniform, log_uniform };
    std::string name;
    Kind kind = Kind::choice;
    std::vector<nlohmann::json> choices;
    double lo = 0.0;
    double hi = 0.0;
    long step = 1;
};

struct SearchSpace {
    ModelKind kind = ModelKind::decision_tree;
    std::vector<ParamDist> params;

    nlohmann::json sample(Rng& rng) const;
    nlohmann::json to_json() const;
};

SearchSpace default_search_space(ModelKind kind);

struct SearchTrial {
    nlohmann::json hyperparameters;
    std::vector<double> fold_auc;
    double mean_auc = 0.0;
    double objective = 0.0; // -mean_auc, minimized
};

struct SearchResult {
    ModelSpec best;
    double best_auc = 0.0;
    std::vector<SearchTrial> trace;
};

// Indices of the k stratified folds (validation part), deterministic in seed.
std::vector<std::vector<std::size_t>> stratified_folds(const std::vector<int>& y, std::size_t folds, std::uint64_t seed);

SearchResult random_search(const SearchSpace& space, const LabeledSet& train, std::uint64_t seed, std::size_t budget,
                           std::size_t folds = 3);

struct Scaler {
    std::vector<double> mean;
    std::vector<double> scale;

    static Scaler fit(const LabeledSet& data);
    LabeledSet apply(const LabeledSet& data) const;
};

struct Pipeline {
    resample::Method method = resample::Method::original;
    ModelKind kind = ModelKind::decision_tree;
    bool scale = false;
    std::size_t tune_budget = 0;  // 0: train the fixed/default hyperparameters
    std::size_t folds = 3;
    nlohmann::json hyperparameters = nlohmann::json::object();
    resample::Params resample_params;
};

struct ExperimentResult {
    Pipeline pipeline;
    std::pair<std::size_t, std::size_t> counts_before;
    std::pair<std::size_t, std::size_t> counts_after;
    ModelSpec spec;
    std::optional<SearchResult> search;
    EvalReport train;
    EvalReport test;
    TrainedModel model;
};

ExperimentResult run_experiment(const Pipeline& pipeline, const resample::SplitPair& split, std::uint64_t seed);

} // namespace ul::learn
