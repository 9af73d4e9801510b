#include "urbanlens/resample.hpp"

#include "urbanlens/csv.hpp"
#include "urbanlens/error.hpp"
#include "urbanlens/knn.hpp"
#include "urbanlens/util.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

namespace ul::resample {

std::pair<std::size_t, std::size_t> LabeledSet::counts() const
{
    std::size_t ones = 0;
    for (int v : y) {
        ones += v == 1;
    }
    return {y.size() - ones, ones};
}

void LabeledSet::push_row(std::span<const double> x, int label, std::int64_t id)
{
    X.insert(X.end(), x.begin(), x.end());
    y.push_back(label);
    row_ids.push_back(id);
}

LabeledSet LabeledSet::empty_like() const
{
    LabeledSet out;
    out.feature_names = feature_names;
    return out;
}

LabeledSet LabeledSet::select(const std::vector<std::size_t>& indices) const
{
    LabeledSet out = empty_like();
    out.X.reserve(indices.size() * features());
    out.y.reserve(indices.size());
    out.row_ids.reserve(indices.size());
    for (auto i : indices) {
        out.push_row(row_span(i), y[i], row_ids[i]);
    }
    return out;
}

void LabeledSet::validate() const
{
    if (features() == 0) {
        fail("InvalidLabeledSet", ApiCode::unprocessable, "labeled set has no features");
    }
    if (X.size() != y.size() * features() || row_ids.size() != y.size()) {
        fail("InvalidLabeledSet", ApiCode::unprocessable, "feature matrix and labels disagree in size");
    }
    for (int v : y) {
        if (v != 0 && v != 1) {
            fail("InvalidLabeledSet", ApiCode::unprocessable, "labels must be 0 or 1");
        }
    }
    for (double v : X) {
        if (!std::isfinite(v)) {
            fail("NonFiniteFeature", ApiCode::unprocessable, "feature matrix contains a non-finite value");
        }
    }
}

LabeledSet from_feature_table(const ingest::FeatureTable& table)
{
    LabeledSet out;
    out.feature_names = table.feature_names;
    out.feature_names.push_back("day_of_week");
    std::vector<double> buf;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& r = table.rows[i];
        buf.assign(r.features.begin(), r.features.end());
        buf.push_back(r.day_of_week);
        out.push_row(buf, r.label, static_cast<std::int64_t>(i));
    }
    return out;
}

LabeledSet read_csv(std::string_view text)
{
    const auto records = csv::parse(text);
    if (records.empty()) {
        fail("MissingColumn", ApiCode::unprocessable, "labeled CSV has no header");
    }
    const auto& header = records.front();
    long label_col = -1, id_col = -1;
    std::vector<std::size_t> feature_cols;
    LabeledSet out;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const auto name = trim(header[c]);
        if (name == "label") {
            label_col = static_cast<long>(c);
        } else if (name == "row_id") {
            id_col = static_cast<long>(c);
        } else {
            feature_cols.push_back(c);
            out.feature_names.push_back(name);
        }
    }
    if (label_col < 0) {
        fail("MissingColumn", ApiCode::unprocessable, "labeled CSV needs a 'label' column");
    }
    std::vector<double> buf(feature_cols.size());
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.size() != header.size()) {
            fail("MalformedCsv", ApiCode::bad_request, "row " + std::to_string(r + 1) + " has the wrong field count");
        }
        for (std::size_t f = 0; f < feature_cols.size(); ++f) {
            auto v = parse_double(trim(rec[feature_cols[f]]));
            if (!v) {
                fail("TypeMismatch", ApiCode::unprocessable,
                     "row " + std::to_string(r + 1) + ", column '" + out.feature_names[f] + "' is not a finite number");
            }
            buf[f] = *v;
        }
        const auto label = trim(rec[static_cast<std::size_t>(label_col)]);
        if (label != "0" && label != "1") {
            fail("InvalidLabeledSet", ApiCode::unprocessable, "row " + std::to_string(r + 1) + " has a label outside {0,1}");
        }
        std::int64_t id = static_cast<std::int64_t>(r - 1);
        if (id_col >= 0) {
            const auto field = trim(rec[static_cast<std::size_t>(id_col)]);
            auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), id);
            if (ec != std::errc{} || p != field.data() + field.size()) {
                fail("TypeMismatch", ApiCode::unprocessable, "row " + std::to_string(r + 1) + " has a bad row_id");
            }
        }
        out.push_row(buf, label == "1" ? 1 : 0, id);
    }
    out.validate();
    return out;
}

std::string write_csv(const LabeledSet& data)
{
    csv::Record header{"row_id"};
    header.insert(header.end(), data.feature_names.begin(), data.feature_names.end());
    header.push_back("label");
    std::string out = csv::format_record(header);
    char buf[64];
    for (std::size_t i = 0; i < data.rows(); ++i) {
        out += std::to_string(data.row_ids[i]);
        for (double v : data.row_span(i)) {
            auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
            out += ',';
            out.append(buf, p);
        }
        out += data.y[i] ? ",1\n" : ",0\n";
    }
    return out;
}

namespace {

constexpr std::uint64_t kSplitStream = 0x73706c6974ULL;
constexpr std::uint64_t kUndersampleStream = 0x727573ULL;
constexpr std::uint64_t kSmoteStream = 0x736d6f7465ULL;
constexpr std::uint64_t kAdasynStream = 0x616461ULL;

struct Classes {
    int majority = 0;
    int minority = 1;
    std::size_t n_major = 0;
    std::size_t n_minor = 0;
};

Classes classes_of(const LabeledSet& d)
{
    const auto [c0, c1] = d.counts();
    if (c0 == 0 || c1 == 0) {
        fail("SingleClass", ApiCode::unprocessable, "resampling needs both classes present");
    }
    // on a tie class 1 plays the minority role
    if (c1 <= c0) {
        return {0, 1, c0, c1};
    }
    return {1, 0, c1, c0};
}

std::vector<std::size_t> rows_of(const LabeledSet& d, int label)
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < d.rows(); ++i) {
        if (d.y[i] == label) {
            out.push_back(i);
        }
    }
    return out;
}

std::vector<std::size_t> all_rows(const LabeledSet& d)
{
    std::vector<std::size_t> out(d.rows());
    std::iota(out.begin(), out.end(), 0);
    return out;
}

} // namespace

SplitPair stratified_split(const LabeledSet& data, double test_fraction, std::uint64_t seed)
{
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        fail("InvalidFraction", ApiCode::bad_request, "test fraction must lie in (0, 1)");
    }
    data.validate();
    std::vector<std::size_t> train_idx, test_idx;
    for (int label : {0, 1}) {
        auto rows = rows_of(data, label);
        if (rows.size() < 2) {
            fail("ClassTooSmall", ApiCode::unprocessable, "class " + std::to_string(label) + " has fewer than 2 samples");
        }
        const auto n_test = static_cast<std::size_t>(std::lround(static_cast<double>(rows.size()) * test_fraction));
        auto rng = derive_rng(seed, kSplitStream, static_cast<std::uint64_t>(label));
        shuffle(rows, rng);
        test_idx.insert(test_idx.end(), rows.begin(), rows.begin() + static_cast<long>(n_test));
        train_idx.insert(train_idx.end(), rows.begin() + static_cast<long>(n_test), rows.end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    return {data.select(train_idx), data.select(test_idx), test_fraction, seed};
}

LabeledSet random_undersample(const LabeledSet& train, std::uint64_t seed)
{
    const auto cls = classes_of(train);
    auto major = rows_of(train, cls.majority);
    auto rng = derive_rng(seed, kUndersampleStream);
    shuffle(major, rng);
    major.resize(cls.n_minor);
    auto keep = rows_of(train, cls.minority);
    keep.insert(keep.end(), major.begin(), major.end());
    std::sort(keep.begin(), keep.end());
    return train.select(keep);
}

LabeledSet nearmiss(const LabeledSet& train, std::size_t k)
{
    const auto cls = classes_of(train);
    if (k < 1 || cls.n_minor < k) {
        fail("TooFewMinority", ApiCode::unprocessable, "NearMiss needs at least k minority samples");
    }
    const auto minor = rows_of(train, cls.minority);
    const auto major = rows_of(train, cls.majority);
    KdTree tree(train.X.data(), train.features(), minor);
    std::vector<std::pair<double, std::size_t>> ranked;
    ranked.reserve(major.size());
    for (auto i : major) {
        const auto nn = tree.query(train.row(i), k);
        double s = 0.0;
        for (const auto& n : nn) {
            s += std::sqrt(n.dist2);
        }
        ranked.emplace_back(s / static_cast<double>(nn.size()), i);
    }
    std::sort(ranked.begin(), ranked.end());
    auto keep = minor;
    for (std::size_t r = 0; r < cls.n_minor; ++r) {
        keep.push_back(ranked[r].second);
    }
    std::sort(keep.begin(), keep.end());
    return train.select(keep);
}

namespace {

// One ENN pass over `rows` of d; returns the surviving rows.
std::vector<std::size_t> enn_pass(const LabeledSet& d, const std::vector<std::size_t>& rows, std::size_t k,
                                  int protected_label, bool protect)
{
    KdTree tree(d.X.data(), d.features(), rows);
    std::vector<std::size_t> keep;
    keep.reserve(rows.size());
    for (auto i : rows) {
        if (protect && d.y[i] == protected_label) {
            keep.push_back(i);
            continue;
        }
        const auto nn = tree.query(d.row(i), k, i);
        std::size_t same = 0;
        for (const auto& n : nn) {
            same += d.y[n.row] == d.y[i];
        }
        // mode vote; a tied vote keeps the sample
        if (2 * same >= nn.size()) {
            keep.push_back(i);
        }
    }
    return keep;
}

} // namespace

LabeledSet edited_nearest_neighbours(const LabeledSet& train, std::size_t k, bool repeat, std::size_t max_iter,
                                     EnnScope scope)
{
    if (k < 1) {
        fail("InvalidHyperparameter", ApiCode::bad_request, "ENN needs k >= 1");
    }
    const auto cls = classes_of(train);
    const bool protect = scope == EnnScope::majority_only;
    auto rows = all_rows(train);
    const std::size_t passes = repeat ? std::max<std::size_t>(max_iter, 1) : 1;
    for (std::size_t it = 0; it < passes; ++it) {
        if (rows.size() <= k) {
            break;
        }
        auto next = enn_pass(train, rows, k, cls.minority, protect);
        const bool changed = next.size() != rows.size();
        rows = std::move(next);
        if (!changed) {
            break;
        }
    }
    return train.select(rows);
}

LabeledSet tomek_links(const LabeledSet& train)
{
    classes_of(train);
    const auto rows = all_rows(train);
    KdTree tree(train.X.data(), train.features(), rows);
    std::vector<std::size_t> nearest(train.rows());
    for (auto i : rows) {
        nearest[i] = tree.query(train.row(i), 1, i).front().row;
    }
    std::vector<bool> drop(train.rows(), false);
    for (auto i : rows) {
        const auto j = nearest[i];
        if (nearest[j] == i && train.y[i] != train.y[j]) {
            drop[i] = drop[j] = true;
        }
    }
    std::vector<std::size_t> keep;
    for (auto i : rows) {
        if (!drop[i]) {
            keep.push_back(i);
        }
    }
    return train.select(keep);
}

namespace {

void interpolate(const LabeledSet& d, std::size_t a, std::size_t b, double u, std::vector<double>& out)
{
    out.resize(d.features());
    const double* xa = d.row(a);
    const double* xb = d.row(b);
    for (std::size_t f = 0; f < d.features(); ++f) {
        out[f] = xa[f] + u * (xb[f] - xa[f]);
    }
}

} // namespace

LabeledSet smote(const LabeledSet& train, std::size_t k, std::uint64_t seed,
                 std::vector<std::pair<std::size_t, std::size_t>>* parents)
{
    const auto cls = classes_of(train);
    if (k < 1 || cls.n_minor <= k) {
        fail("TooFewMinority", ApiCode::unprocessable, "SMOTE needs more than k minority samples");
    }
    const auto minor = rows_of(train, cls.minority);
    KdTree tree(train.X.data(), train.features(), minor);
    std::vector<std::vector<Neighbor>> nn(minor.size());
    for (std::size_t m = 0; m < minor.size(); ++m) {
        nn[m] = tree.query(train.row(minor[m]), k, minor[m]);
    }
    LabeledSet out = train;
    const std::size_t n_new = cls.n_major - cls.n_minor;
    out.X.reserve(out.X.size() + n_new * train.features());
    auto rng = derive_rng(seed, kSmoteStream);
    std::vector<double> buf;
    for (std::size_t s = 0; s < n_new; ++s) {
        const std::size_t m = uniform_index(rng, minor.size());
        const std::size_t other = nn[m][uniform_index(rng, nn[m].size())].row;
        const double u = uniform01(rng);
        interpolate(train, minor[m], other, u, buf);
        out.push_row(buf, cls.minority, -1);
        if (parents) {
            parents->emplace_back(minor[m], other);
        }
    }
    return out;
}

LabeledSet adasyn(const LabeledSet& train, std::size_t k, std::uint64_t seed, AdasynPlan* plan)
{
    const auto cls = classes_of(train);
    if (k < 1 || cls.n_minor <= k) {
        fail("TooFewMinority", ApiCode::unprocessable, "ADASYN needs more than k minority samples");
    }
    const auto minor = rows_of(train, cls.minority);
    KdTree all(train.X.data(), train.features(), all_rows(train));
    std::vector<double> ratio(minor.size());
    double total = 0.0;
    for (std::size_t m = 0; m < minor.size(); ++m) {
        std::size_t hostile = 0;
        for (const auto& n : all.query(train.row(minor[m]), k, minor[m])) {
            hostile += train.y[n.row] == cls.majority;
        }
        ratio[m] = static_cast<double>(hostile) / static_cast<double>(k);
        total += ratio[m];
    }
    std::vector<std::size_t> generated(minor.size(), 0);
    if (plan) {
        plan->minority_rows = minor;
        plan->ratio = ratio;
    }
    if (total == 0.0) {
        warn("ADASYN: no minority sample has majority neighbors (AllSafe); nothing generated");
        if (plan) {
            plan->generated = generated;
        }
        return train;
    }
    const auto G = static_cast<double>(cls.n_major - cls.n_minor);
    for (std::size_t m = 0; m < minor.size(); ++m) {
        generated[m] = static_cast<std::size_t>(std::nearbyint(ratio[m] / total * G));
    }
    if (plan) {
        plan->generated = generated;
    }
    KdTree tree(train.X.data(), train.features(), minor);
    LabeledSet out = train;
    auto rng = derive_rng(seed, kAdasynStream);
    std::vector<double> buf;
    for (std::size_t m = 0; m < minor.size(); ++m) {
        if (generated[m] == 0) {
            continue;
        }
        const auto nn = tree.query(train.row(minor[m]), k, minor[m]);
        for (std::size_t g = 0; g < generated[m]; ++g) {
            const std::size_t other = nn[uniform_index(rng, nn.size())].row;
            interpolate(train, minor[m], other, uniform01(rng), buf);
            out.push_row(buf, cls.minority, -1);
        }
    }
    return out;
}

const char* to_string(Method m)
{
    switch (m) {
    case Method::original: return "original";
    case Method::random_us: return "random_us";
    case Method::nearmiss: return "nearmiss";
    case Method::enn: return "enn";
    case Method::renn: return "renn";
    case Method::smote: return "smote";
    case Method::adasyn: return "adasyn";
    case Method::smote_enn: return "smote_enn";
    case Method::smote_tomek: return "smote_tomek";
    }
    return "original";
}

const std::vector<Method>& all_methods()
{
    static const std::vector<Method> methods{Method::original, Method::random_us, Method::nearmiss,
                                             Method::enn,      Method::renn,      Method::smote,
                                             Method::adasyn,   Method::smote_enn, Method::smote_tomek};
    return methods;
}

Method parse_method(std::string_view text)
{
    for (auto m : all_methods()) {
        if (text == to_string(m)) {
            return m;
        }
    }
    if (text == "none") {
        return Method::original;
    }
    fail("UnknownMethod", ApiCode::bad_request, "unknown resampling method '" + std::string(text) + "'");
}

LabeledSet apply(Method method, const LabeledSet& train, std::uint64_t seed, const Params& params)
{
    train.validate();
    switch (method) {
    case Method::original: return train;
    case Method::random_us: return random_undersample(train, seed);
    case Method::nearmiss: return nearmiss(train, params.nearmiss_k);
    case Method::enn: return edited_nearest_neighbours(train, params.enn_k, false);
    case Method::renn: return edited_nearest_neighbours(train, params.enn_k, true, params.renn_max_iter);
    case Method::smote: return smote(train, params.smote_k, seed);
    case Method::adasyn: return adasyn(train, params.adasyn_k, seed);
    case Method::smote_enn:
        return edited_nearest_neighbours(smote(train, params.smote_k, seed), params.enn_k, false, 1, EnnScope::all_classes);
    case Method::smote_tomek: return tomek_links(smote(train, params.smote_k, seed));
    }
    return train;
}

} // namespace ul::resample
