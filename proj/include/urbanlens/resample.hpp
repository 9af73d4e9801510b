#pragma once

#include "urbanlens/ingest.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ul::resample {

// Feature matrix plus binary labels. row_ids carry provenance through every
// sampler; synthetic rows get -1.
struct LabeledSet {
    std::vector<std::string> feature_names;
    std::vector<double> X; // row-major, rows() x features()
    std::vector<int> y;
    std::vector<std::int64_t> row_ids;

    std::size_t rows() const { return y.size(); }
    std::size_t features() const { return feature_names.size(); }
    const double* row(std::size_t i) const { return X.data() + i * features(); }
    std::span<const double> row_span(std::size_t i) const { return {row(i), features()}; }
    std::pair<std::size_t, std::size_t> counts() const; // (class 0, class 1)

    void push_row(std::span<const double> x, int label, std::int64_t id);
    LabeledSet select(const std::vector<std::size_t>& indices) const;
    LabeledSet empty_like() const;
    // Throws InvalidLabeledSet (shape, labels outside {0,1}, non-finite values).
    void validate() const;
};

// One row per feature-table row: the joined features followed by day_of_week.
LabeledSet from_feature_table(const ingest::FeatureTable& table);

// Columns: row_id (optional on input), features..., label.
LabeledSet read_csv(std::string_view text);
std::string write_csv(const LabeledSet& data);

struct SplitPair {
    LabeledSet train;
    LabeledSet test;
    double ratio = 0.0;
    std::uint64_t seed = 0;
};

// round(class_count * test_fraction) rows of each class go to the test side.
SplitPair stratified_split(const LabeledSet& data, double test_fraction, std::uint64_t seed);

LabeledSet random_undersample(const LabeledSet& train, std::uint64_t seed);
// NearMiss-1.
LabeledSet nearmiss(const LabeledSet& train, std::size_t k = 3);

enum class EnnScope { majority_only, all_classes };
// Removes samples whose k-NN mode vote disagrees with their label; with
// repeat, passes continue until nothing changes or max_iter passes ran.
LabeledSet edited_nearest_neighbours(const LabeledSet& train, std::size_t k = 3, bool repeat = false,
                                     std::size_t max_iter = 100, EnnScope scope = EnnScope::majority_only);
LabeledSet tomek_links(const LabeledSet& train);

// parents, when given, receives the two minority rows (input indices) behind each synthetic row.
LabeledSet smote(const LabeledSet& train, std::size_t k, std::uint64_t seed,
                 std::vector<std::pair<std::size_t, std::size_t>>* parents = nullptr);

struct AdasynPlan {
    std::vector<std::size_t> minority_rows;
    std::vector<double> ratio;          // r_i
    std::vector<std::size_t> generated; // g_i
};
LabeledSet adasyn(const LabeledSet& train, std::size_t k, std::uint64_t seed, AdasynPlan* plan = nullptr);

enum class Method { original, random_us, nearmiss, enn, renn, smote, adasyn, smote_enn, smote_tomek };
const char* to_string(Method m);
Method parse_method(std::string_view text);
const std::vector<Method>& all_methods();

struct Params {
    std::size_t nearmiss_k = 3;
    std::size_t enn_k = 3;
    std::size_t renn_max_iter = 100;
    std::size_t smote_k = 5;
    std::size_t adasyn_k = 5;
};

LabeledSet apply(Method method, const LabeledSet& train, std::uint64_t seed, const Params& params = {});

} // namespace ul::resample
