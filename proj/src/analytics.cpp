#include "urbanlens/analytics.hpp"

#include "urbanlens/error.hpp"
#include "urbanlens/insight.hpp"
#include "urbanlens/spatial.hpp"
#include "urbanlens/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace ul::service {

using nlohmann::json;

namespace {

[[noreturn]] void bad_param(const std::string& key, const std::string& why)
{
    fail("BadParameter", ApiCode::bad_request, "parameter '" + key + "': " + why);
}

class Args {
public:
    Args(const Params& params, std::initializer_list<const char*> allowed) : p_(params)
    {
        if (p_.is_null()) {
            p_ = json::object();
        }
        if (!p_.is_object()) {
            fail("BadParameter", ApiCode::bad_request, "parameters must be an object");
        }
        for (const auto& [key, value] : p_.items()) {
            if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
                fail("UnknownParameter", ApiCode::bad_request, "unknown parameter '" + key + "'");
            }
        }
    }

    std::optional<std::string> str(const char* key) const
    {
        if (!p_.contains(key) || p_[key].is_null()) {
            return std::nullopt;
        }
        const auto& v = p_[key];
        if (v.is_string()) {
            return v.get<std::string>();
        }
        if (v.is_number() || v.is_boolean()) {
            return v.dump();
        }
        bad_param(key, "expected a scalar");
    }

    std::optional<double> num(const char* key) const
    {
        if (!p_.contains(key) || p_[key].is_null()) {
            return std::nullopt;
        }
        const auto& v = p_[key];
        if (v.is_number()) {
            return v.get<double>();
        }
        if (v.is_string()) {
            if (auto d = parse_double(v.get<std::string>())) {
                return *d;
            }
        }
        bad_param(key, "expected a number");
    }

    std::optional<std::uint64_t> count(const char* key) const
    {
        const auto d = num(key);
        if (!d) {
            return std::nullopt;
        }
        if (!(*d >= 0.0) || *d != std::floor(*d) || *d > 1e15) {
            bad_param(key, "expected a non-negative integer");
        }
        return static_cast<std::uint64_t>(*d);
    }

    std::optional<bool> flag(const char* key) const
    {
        if (!p_.contains(key) || p_[key].is_null()) {
            return std::nullopt;
        }
        const auto& v = p_[key];
        if (v.is_boolean()) {
            return v.get<bool>();
        }
        const auto s = str(key);
        if (s == "true" || s == "1") return true;
        if (s == "false" || s == "0") return false;
        bad_param(key, "expected true or false");
    }

    std::optional<Date> date(const char* key) const
    {
        auto s = str(key);
        if (!s || s->empty()) {
            return std::nullopt;
        }
        return parse_date_arg(*s, key);
    }

private:
    Params p_;
};

double s6(double v)
{
    return sig6(v);
}

// Earliest and latest row dates across the store.
std::pair<Date, Date> data_span(const Snapshot& snap)
{
    bool any = false;
    Date lo{}, hi{};
    for (const auto& d : snap.datasets) {
        for (const auto& row : d.table->rows) {
            if (!any) {
                lo = hi = row.ts.date;
                any = true;
            } else {
                lo = std::min(lo, row.ts.date);
                hi = std::max(hi, row.ts.date);
            }
        }
    }
    return {lo, hi};
}

std::pair<Date, Date> timeframe(const Snapshot& snap, const Args& a)
{
    const auto f = a.date("from"), t = a.date("to");
    if (f && t) {
        return {*f, *t};
    }
    const auto span = data_span(snap);
    return {f.value_or(span.first), t.value_or(span.second)};
}

json datasets_body(const Snapshot& snap)
{
    json list = json::array();
    for (const auto& d : snap.datasets) {
        list.push_back(d.summary());
    }
    return json{{"datasets", list}, {"regions", snap.regions.size()}};
}

json rank_body(const Snapshot& snap, const Params& params)
{
    Args a(params, {"categories", "from", "to", "order"});
    const auto cats = a.str("categories");
    if (!cats || trim(*cats).empty()) {
        fail("UnknownCategory", ApiCode::not_found, "no categories given");
    }
    std::vector<std::string> tokens;
    for (auto& t : split(*cats, ',')) {
        if (auto s = trim(t); !s.empty()) {
            tokens.push_back(s);
        }
    }
    const std::string order_text = a.str("order").value_or("desc");
    insight::Order order;
    if (order_text == "desc") {
        order = insight::Order::desc;
    } else if (order_text == "asc") {
        order = insight::Order::asc;
    } else {
        bad_param("order", "expected desc or asc");
    }
    const auto [from, to] = timeframe(snap, a);
    const auto r = insight::rank_regions(snap.tables(), snap.regions, tokens, from, to, order);
    json entries = json::array();
    for (const auto& [id, v] : r.entries) {
        entries.push_back({{"region_id", id}, {"value", s6(v)}});
    }
    return json{{"categories", tokens}, {"columns", r.columns}, {"from", from.iso()},
                {"to", to.iso()},       {"order", order_text},  {"entries", entries}};
}

json column_json(const insight::ColumnRef& c)
{
    json out{{"id", c.id()}, {"dataset", c.dataset}, {"column", c.column}, {"category", c.category}};
    if (!c.level.empty()) {
        out["level"] = c.level;
    }
    return out;
}

json insights_body(const Snapshot& snap, const Params& params)
{
    Args a(params, {"bbox", "from", "to", "k", "penalty", "threshold", "bins"});
    insight::MiningOptions opt;
    if (auto b = a.str("bbox"); b && !b->empty()) {
        opt.bbox = geo::BBox::parse(*b);
    }
    std::tie(opt.from, opt.to) = timeframe(snap, a);
    opt.k = a.count("k").value_or(5);
    opt.penalty = a.num("penalty").value_or(insight::kSameCategoryPenalty);
    opt.threshold = a.num("threshold").value_or(insight::kStrongThreshold);
    opt.bins = static_cast<int>(a.count("bins").value_or(5));
    if (!(opt.penalty > 0.0 && opt.penalty <= 1.0)) {
        fail("InvalidPenalty", ApiCode::bad_request, "penalty must lie in (0, 1]");
    }
    const auto r = insight::mine_top_k(snap.tables(), snap.regions, opt);

    json list = json::array();
    for (const auto& mi : r.top) {
        const auto& in = mi.insight;
        json a_series = json::array(), b_series = json::array();
        for (double v : mi.series_a) a_series.push_back(s6(v));
        for (double v : mi.series_b) b_series.push_back(s6(v));
        list.push_back({{"a", column_json(in.a)},
                        {"b", column_json(in.b)},
                        {"rho", s6(in.corr.rho)},
                        {"p_value", s6(in.corr.p_value)},
                        {"n", in.corr.n},
                        {"impact_a", s6(in.impact_a)},
                        {"impact_b", s6(in.impact_b)},
                        {"penalized", in.penalized},
                        {"score", s6(in.score)},
                        {"granularity", ingest::to_string(mi.granularity)},
                        {"per_region", mi.per_region},
                        {"series", {{"keys", mi.keys}, {"a", a_series}, {"b", b_series}}}});
    }
    json bbox = nullptr;
    if (opt.bbox) {
        bbox = {s6(opt.bbox->lon_min), s6(opt.bbox->lat_min), s6(opt.bbox->lon_max), s6(opt.bbox->lat_max)};
    }
    return json{{"bbox", bbox},
                {"from", opt.from.iso()},
                {"to", opt.to.iso()},
                {"k", opt.k},
                {"penalty", s6(opt.penalty)},
                {"threshold", s6(opt.threshold)},
                {"columns", r.columns.size()},
                {"pairs_evaluated", r.pairs_evaluated},
                {"strong_pairs", r.strong_pairs},
                {"insights", list}};
}

struct SpatialInput {
    std::string variable;
    Date from, to;
    spatial::WeightMode mode = spatial::WeightMode::row_standardized;
    spatial::Contiguity contiguity = spatial::Contiguity::queen;
    std::size_t permutations = spatial::kDefaultPermutations;
    std::uint64_t seed = spatial::kDefaultSeed;
    spatial::SpatialWeights weights;
    std::vector<double> values;
    std::vector<std::string> missing; // registered regions without data

    json header() const
    {
        return json{{"variable", variable},
                    {"from", from.iso()},
                    {"to", to.iso()},
                    {"weights", mode == spatial::WeightMode::binary ? "binary" : "row"},
                    {"contiguity", contiguity == spatial::Contiguity::rook ? "rook" : "queen"},
                    {"permutations", permutations},
                    {"seed", seed},
                    {"n", values.size()},
                    {"missing_regions", missing},
                    {"isolated_regions", weights.isolated_regions()}};
    }
};

SpatialInput spatial_input(const Snapshot& snap, const Args& a)
{
    SpatialInput in;
    const auto var = a.str("variable");
    if (!var || var->empty()) {
        bad_param("variable", "required (dataset.column)");
    }
    in.variable = *var;
    std::tie(in.from, in.to) = timeframe(snap, a);
    if (auto w = a.str("weights")) {
        if (*w == "binary") {
            in.mode = spatial::WeightMode::binary;
        } else if (*w != "row") {
            bad_param("weights", "expected row or binary");
        }
    }
    if (auto c = a.str("contiguity")) {
        if (*c == "rook") {
            in.contiguity = spatial::Contiguity::rook;
        } else if (*c != "queen") {
            bad_param("contiguity", "expected queen or rook");
        }
    }
    in.permutations = a.count("permutations").value_or(spatial::kDefaultPermutations);
    in.seed = a.count("seed").value_or(spatial::kDefaultSeed);

    const auto field = region_field(snap, in.variable, in.from, in.to);
    std::vector<std::string> ids;
    std::set<std::string> have;
    for (const auto& [id, v] : field) {
        ids.push_back(id);
        in.values.push_back(v);
        have.insert(id);
    }
    for (const auto& u : snap.regions.units()) {
        if (!have.count(u.region_id)) {
            in.missing.push_back(u.region_id);
        }
    }
    if (ids.size() < 3) {
        fail("TooFewRegions", ApiCode::unprocessable,
             "variable '" + in.variable + "' has data for " + std::to_string(ids.size()) + " regions; need at least 3");
    }
    in.weights = spatial::build_contiguity_weights(snap.regions, in.mode, in.contiguity).subset(ids);
    return in;
}

json global_body(const Snapshot& snap, const Params& params)
{
    Args a(params, {"variable", "from", "to", "permutations", "seed", "weights", "contiguity"});
    auto in = spatial_input(snap, a);
    const auto g = spatial::global_moran(in.weights, in.values, in.permutations, in.seed);
    json out = in.header();
    out["I"] = s6(g.I);
    out["expected_I"] = s6(g.expected_I);
    out["pseudo_p"] = s6(g.pseudo_p);
    out["permutation_mean"] = s6(g.permutation_mean);
    out["permutation_sd"] = s6(g.permutation_sd);
    return out;
}

json lisa_body(const Snapshot& snap, const Params& params)
{
    Args a(params, {"variable", "from", "to", "permutations", "alpha", "seed", "weights", "contiguity"});
    auto in = spatial_input(snap, a);
    const double alpha = a.num("alpha").value_or(spatial::kDefaultAlpha);
    const auto r = spatial::lisa_classify(in.weights, in.values, in.permutations, alpha, in.seed);
    json regions = json::array(), scatter = json::array();
    std::map<std::string, std::size_t> counts{{"HH", 0}, {"LL", 0}, {"LH", 0}, {"HL", 0}, {"ns", 0}};
    for (std::size_t i = 0; i < r.regions.size(); ++i) {
        const auto& reg = r.regions[i];
        ++counts[reg.cluster()];
        regions.push_back({{"region_id", reg.region_id},
                           {"value", s6(in.values[i])},
                           {"z", s6(reg.z)},
                           {"lag_z", s6(reg.lag_z)},
                           {"local_I", s6(reg.local_I)},
                           {"pseudo_p", s6(reg.pseudo_p)},
                           {"quadrant", spatial::to_string(reg.quadrant)},
                           {"cluster", reg.cluster()},
                           {"significant", reg.significant},
                           {"isolated", reg.isolated}});
        scatter.push_back({s6(reg.z), s6(reg.lag_z)});
    }
    json out = in.header();
    out["alpha"] = s6(r.alpha);
    out["counts"] = counts;
    out["regions"] = regions;
    out["scatter"] = scatter;
    return out;
}

json models_body(const Snapshot& snap)
{
    json list = json::array();
    for (const auto& m : snap.models) {
        list.push_back(m.record);
    }
    return json{{"models", list}};
}

std::vector<ingest::FeatureRef> parse_feature_list(const json& list)
{
    std::vector<ingest::FeatureRef> out;
    for (const auto& f : list) {
        if (!f.is_string()) {
            fail("BadParameter", ApiCode::bad_request, "features must be 'dataset.column' strings");
        }
        const auto s = f.get<std::string>();
        const auto dot = s.find('.');
        if (dot == std::string::npos || dot == 0 || dot + 1 == s.size()) {
            fail("BadParameter", ApiCode::bad_request, "feature '" + s + "' is not of the form dataset.column");
        }
        out.push_back({s.substr(0, dot), s.substr(dot + 1)});
    }
    if (out.empty()) {
        fail("EmptyFeatureSpec", ApiCode::bad_request, "feature list is empty");
    }
    return out;
}

} // namespace

std::string render(const json& body)
{
    return body.dump(2) + "\n";
}

json query(const Snapshot& snap, std::string_view endpoint, const Params& params)
{
    if (endpoint == "datasets") {
        Args(params, {});
        return datasets_body(snap);
    }
    if (endpoint == "regions") {
        Args(params, {});
        return json::parse(geo::to_geojson(snap.regions));
    }
    if (endpoint == "rank") return rank_body(snap, params);
    if (endpoint == "insights") return insights_body(snap, params);
    if (endpoint == "spatial/global") return global_body(snap, params);
    if (endpoint == "spatial/lisa") return lisa_body(snap, params);
    if (endpoint == "models") {
        Args(params, {});
        return models_body(snap);
    }
    fail("NotFound", ApiCode::not_found, "unknown endpoint '" + std::string(endpoint) + "'");
}

std::vector<std::pair<std::string, double>> region_field(const Snapshot& snap, std::string_view variable, Date from,
                                                         Date to)
{
    const auto dot = variable.find('.');
    const std::string dataset(variable.substr(0, dot));
    std::string column, level;
    if (dot != std::string_view::npos) {
        column = std::string(variable.substr(dot + 1));
        if (const auto eq = column.find('='); eq != std::string::npos) {
            level = column.substr(eq + 1);
            column.resize(eq);
        }
    }
    const auto* entry = snap.find_dataset(dataset);
    if (!entry) {
        fail("UnknownVariable", ApiCode::not_found, "no dataset '" + dataset + "'");
    }
    const auto& table = *entry->table;
    std::optional<std::size_t> col;
    double level_code = -1.0;
    if (!column.empty()) {
        col = table.manifest.column_index(column);
        if (!col || !table.manifest.columns[*col].data()) {
            fail("UnknownVariable", ApiCode::not_found, "no data column '" + column + "' in '" + dataset + "'");
        }
        const bool categorical = table.manifest.columns[*col].type == ingest::SemanticType::categorical;
        if (!categorical && !level.empty()) {
            fail("UnknownVariable", ApiCode::not_found, "level selector applies to categorical columns only");
        }
        if (categorical && !level.empty()) {
            const auto& lv = table.levels[*col];
            const auto it = std::find(lv.begin(), lv.end(), level);
            if (it == lv.end()) {
                fail("UnknownVariable", ApiCode::not_found, "no level '" + level + "' in '" + dataset + "." + column + "'");
            }
            level_code = static_cast<double>(it - lv.begin());
        }
    }
    const bool counting = !col || table.manifest.columns[*col].type == ingest::SemanticType::categorical;

    std::map<std::string, std::vector<double>> cells;
    std::map<std::string, double> counts;
    if (counting) {
        for (const auto& u : snap.regions.units()) {
            counts[u.region_id] = 0.0;
        }
    }
    for (const auto& row : table.rows) {
        if (row.ts.date < from || row.ts.date > to || !snap.regions.contains(row.region_id)) {
            continue;
        }
        if (counting) {
            if (level_code < 0.0 || row.values[*col] == level_code) {
                counts[row.region_id] += 1.0;
            }
        } else if (!std::isnan(row.values[*col])) {
            cells[row.region_id].push_back(row.values[*col]);
        }
    }
    std::vector<std::pair<std::string, double>> out;
    if (counting) {
        out.assign(counts.begin(), counts.end());
    } else {
        const auto agg = table.manifest.columns[*col].aggregation;
        for (const auto& [id, values] : cells) {
            out.emplace_back(id, ingest::aggregate(values, agg));
        }
    }
    return out;
}

json TrainRequest::to_json() const
{
    json feats = json::array();
    for (const auto& f : features) {
        feats.push_back(f.dataset + "." + f.column);
    }
    return json{{"name", name},
                {"model", learn::short_name(pipeline.kind)},
                {"resample", resample::to_string(pipeline.method)},
                {"scale", pipeline.scale},
                {"tune_budget", pipeline.tune_budget},
                {"folds", pipeline.folds},
                {"hyperparameters", pipeline.hyperparameters},
                {"seed", seed},
                {"test_fraction", test_fraction},
                {"features", feats},
                {"incidents", incidents}};
}

TrainRequest TrainRequest::from_json(const json& doc)
{
    if (!doc.is_object()) {
        fail("MalformedRequest", ApiCode::bad_request, "training request must be a JSON object");
    }
    static const std::set<std::string> known{"name",     "model",         "resample",        "scale",
                                             "tune_budget", "folds",      "hyperparameters", "seed",
                                             "test_fraction", "features", "incidents"};
    for (const auto& [key, value] : doc.items()) {
        if (!known.count(key)) {
            fail("UnknownParameter", ApiCode::bad_request, "unknown training field '" + key + "'");
        }
    }
    TrainRequest r;
    try {
        r.pipeline.kind = learn::parse_model_kind(doc.value("model", std::string("dt")));
        r.pipeline.method = resample::parse_method(doc.value("resample", std::string("original")));
        r.pipeline.scale = doc.value("scale", false);
        r.pipeline.tune_budget = doc.value("tune_budget", std::size_t{0});
        r.pipeline.folds = doc.value("folds", std::size_t{3});
        r.pipeline.hyperparameters = doc.value("hyperparameters", json::object());
        r.seed = doc.value("seed", std::uint64_t{7});
        r.test_fraction = doc.value("test_fraction", 0.2);
        r.incidents = doc.value("incidents", std::string(synth::kIncidentsDataset));
        r.features = doc.contains("features") ? parse_feature_list(doc["features"]) : synth::default_risk_features();
        r.name = doc.value("name", std::string(learn::short_name(r.pipeline.kind)) + "-" +
                                       resample::to_string(r.pipeline.method));
    } catch (const json::exception& e) {
        fail("MalformedRequest", ApiCode::bad_request, std::string("bad training request: ") + e.what());
    }
    if (!(r.test_fraction > 0.0 && r.test_fraction < 1.0)) {
        fail("InvalidFraction", ApiCode::bad_request, "test_fraction must lie in (0, 1)");
    }
    if (r.pipeline.folds < 2) {
        fail("InvalidFolds", ApiCode::bad_request, "cross-validation needs at least 2 folds");
    }
    if (r.name.empty()) {
        fail("MalformedRequest", ApiCode::bad_request, "name must not be empty");
    }
    if (r.pipeline.tune_budget == 0) {
        learn::validate(learn::ModelSpec{r.pipeline.kind, r.pipeline.hyperparameters});
    }
    return r;
}

resample::LabeledSet risk_dataset(const Snapshot& snap, const std::vector<ingest::FeatureRef>& features,
                                  const std::string& incidents)
{
    std::vector<const ingest::DatasetTable*> tables;
    for (const auto& f : features) {
        const auto* d = snap.find_dataset(f.dataset);
        if (!d) {
            fail("UnknownDataset", ApiCode::not_found, "no dataset '" + f.dataset + "'");
        }
        if (std::find(tables.begin(), tables.end(), d->table.get()) == tables.end()) {
            tables.push_back(d->table.get());
        }
    }
    const auto* inc = snap.find_dataset(incidents);
    if (!inc) {
        fail("UnknownDataset", ApiCode::not_found, "no incidents dataset '" + incidents + "'");
    }
    const auto table = ingest::assemble_feature_table(tables, features, inc->table.get(), snap.regions);
    return resample::from_feature_table(table);
}

void check_train_inputs(const Snapshot& snap, const TrainRequest& request)
{
    for (const auto& f : request.features) {
        if (!snap.find_dataset(f.dataset)) {
            fail("UnknownDataset", ApiCode::not_found, "no dataset '" + f.dataset + "'");
        }
    }
    if (!snap.find_dataset(request.incidents)) {
        fail("UnknownDataset", ApiCode::not_found, "no incidents dataset '" + request.incidents + "'");
    }
}

json model_record(const learn::ExperimentResult& result, const TrainRequest& request)
{
    json search = nullptr;
    if (result.search) {
        json trials = json::array();
        for (const auto& t : result.search->trace) {
            trials.push_back({{"hyperparameters", t.hyperparameters}, {"mean_auc", s6(t.mean_auc)}});
        }
        search = {{"budget", request.pipeline.tune_budget},
                  {"folds", request.pipeline.folds},
                  {"best_auc", s6(result.search->best_auc)},
                  {"trials", trials}};
    }
    return json{{"pipeline", request.to_json()},
                {"spec", result.spec.to_json()},
                {"feature_names", result.model.feature_names},
                {"counts_before", {result.counts_before.first, result.counts_before.second}},
                {"counts_after", {result.counts_after.first, result.counts_after.second}},
                {"search", search},
                {"train", result.train.to_json()},
                {"test", result.test.to_json()}};
}

json train(Store& store, const TrainRequest& request)
{
    const auto snap = store.snapshot();
    const auto data = risk_dataset(*snap, request.features, request.incidents);
    const auto split = resample::stratified_split(data, request.test_fraction, request.seed);
    auto result = learn::run_experiment(request.pipeline, split, request.seed);
    json record = model_record(result, request);
    const auto id = store.add_model(request.name, record, std::move(result.model));
    record["id"] = id;
    record["name"] = request.name;
    return record;
}

json predict(const Snapshot& snap, const json& request)
{
    if (!request.is_object() || !request.contains("model_id") || !request["model_id"].is_string()) {
        fail("MalformedRequest", ApiCode::bad_request, "predict needs a 'model_id' string");
    }
    if (!request.contains("rows") || !request["rows"].is_array()) {
        fail("MalformedRequest", ApiCode::bad_request, "predict needs a 'rows' array");
    }
    const auto id = request["model_id"].get<std::string>();
    const auto* entry = snap.find_model(id);
    if (!entry) {
        fail("UnknownModel", ApiCode::not_found, "no model '" + id + "'");
    }
    const auto& model = *entry->model;
    const std::size_t F = model.features();
    std::vector<double> X;
    std::size_t rows = 0;
    for (const auto& row : request["rows"]) {
        if (row.is_array()) {
            if (row.size() != F) {
                fail("DimensionMismatch", ApiCode::unprocessable,
                     "row " + std::to_string(rows) + " has " + std::to_string(row.size()) + " features; model expects " +
                         std::to_string(F));
            }
            for (const auto& v : row) {
                if (!v.is_number()) {
                    fail("MalformedRequest", ApiCode::bad_request, "feature values must be numbers");
                }
                X.push_back(v.get<double>());
            }
        } else if (row.is_object()) {
            if (row.size() != F) {
                fail("DimensionMismatch", ApiCode::unprocessable,
                     "row " + std::to_string(rows) + " names " + std::to_string(row.size()) + " features; model expects " +
                         std::to_string(F));
            }
            for (const auto& name : model.feature_names) {
                if (!row.contains(name) || !row[name].is_number()) {
                    fail("DimensionMismatch", ApiCode::unprocessable,
                         "row " + std::to_string(rows) + " lacks numeric feature '" + name + "'");
                }
                X.push_back(row[name].get<double>());
            }
        } else {
            fail("MalformedRequest", ApiCode::bad_request, "rows must be arrays or objects");
        }
        ++rows;
    }
    for (double v : X) {
        if (!std::isfinite(v)) {
            fail("NonFiniteFeature", ApiCode::unprocessable, "feature values must be finite");
        }
    }
    const auto p1 = rows ? model.predict_p1(X.data(), rows, F) : std::vector<double>{};
    json preds = json::array();
    for (double p : p1) {
        preds.push_back({{"p1", p}, {"label", p > 0.5 ? 1 : 0}});
    }
    return json{{"model_id", id}, {"feature_names", model.feature_names}, {"predictions", preds}};
}

FeatureExport export_features(const Snapshot& snap, const Params& params)
{
    Args a(params, {"features", "incidents", "test_fraction", "seed"});
    std::vector<ingest::FeatureRef> features = synth::default_risk_features();
    if (auto f = a.str("features"); f && !f->empty()) {
        json list = json::array();
        for (auto& t : split(*f, ',')) {
            list.push_back(trim(t));
        }
        features = parse_feature_list(list);
    }
    const auto data = risk_dataset(snap, features, a.str("incidents").value_or(synth::kIncidentsDataset));
    const double fraction = a.num("test_fraction").value_or(0.0);
    if (fraction == 0.0) {
        return {resample::write_csv(data), {}};
    }
    const auto sp = resample::stratified_split(data, fraction, a.count("seed").value_or(7));
    return {resample::write_csv(sp.train), resample::write_csv(sp.test)};
}

json openapi()
{
    auto param = [](const char* name, const char* type, const char* description, bool required = false) {
        return json{{"name", name},
                    {"in", "query"},
                    {"required", required},
                    {"description", description},
                    {"schema", {{"type", type}}}};
    };
    auto get = [](const char* summary, json parameters) {
        return json{{"get",
                     {{"summary", summary},
                      {"parameters", std::move(parameters)},
                      {"responses", {{"200", {{"description", "JSON body"}}}, {"default", {{"$ref", "#/components/responses/Error"}}}}}}}};
    };
    const json timeframe_from = param("from", "string", "first date (YYYY-MM-DD), default: earliest data");
    const json timeframe_to = param("to", "string", "last date (YYYY-MM-DD), default: latest data");
    json spatial_params = {param("variable", "string", "dataset.column, dataset.column=level or dataset", true),
                           timeframe_from,
                           timeframe_to,
                           param("permutations", "integer", "permutation count (default 999)"),
                           param("seed", "integer", "permutation seed (default 12345)"),
                           param("weights", "string", "row or binary"),
                           param("contiguity", "string", "queen or rook")};
    json lisa_params = spatial_params;
    lisa_params.push_back(param("alpha", "number", "significance level (default 0.05)"));

    json paths;
    paths["/datasets"] = get("List ingested datasets", json::array());
    paths["/datasets"]["post"] = {
        {"summary", "Ingest a dataset"},
        {"requestBody",
         {{"content",
           {{"multipart/form-data",
             {{"schema",
               {{"type", "object"},
                {"required", {"manifest", "csv"}},
                {"properties",
                 {{"manifest", {{"type", "string"}}}, {"csv", {{"type", "string"}}}, {"geojson", {{"type", "string"}}}}}}}}}}}}},
        {"responses",
         {{"201", {{"description", "dataset summary with provenance"}}},
          {"400", {{"$ref", "#/components/responses/Error"}}},
          {"409", {{"$ref", "#/components/responses/Error"}}},
          {"422", {{"$ref", "#/components/responses/Error"}}}}}};
    paths["/regions"] = get("Region registry as GeoJSON", json::array());
    paths["/rank"] = get("Rank regions by summed category aggregates",
                         {param("categories", "string", "comma-separated categories or dataset.column", true),
                          timeframe_from, timeframe_to, param("order", "string", "desc or asc")});
    paths["/insights"] = get("Top-k correlation insights",
                             {param("bbox", "string", "lonmin,latmin,lonmax,latmax"), timeframe_from, timeframe_to,
                              param("k", "integer", "insight count (default 5)"),
                              param("penalty", "number", "same-category penalty (default 0.5)")});
    paths["/spatial/global"] = get("Global Moran's I", spatial_params);
    paths["/spatial/lisa"] = get("Local Moran's I cluster map", lisa_params);
    paths["/risk/models"] = get("Trained model registry", json::array());
    paths["/risk/train"] = {
        {"post",
         {{"summary", "Queue a training job"},
          {"requestBody", {{"content", {{"application/json", {{"schema", {{"$ref", "#/components/schemas/TrainRequest"}}}}}}}}},
          {"responses",
           {{"202", {{"description", "job accepted"}}}, {"409", {{"$ref", "#/components/responses/Error"}}}}}}}};
    paths["/risk/jobs/{id}"] = {
        {"get",
         {{"summary", "Training job status"},
          {"parameters", {{{"name", "id"}, {"in", "path"}, {"required", true}, {"schema", {{"type", "string"}}}}}},
          {"responses", {{"200", {{"description", "job"}}}, {"404", {{"$ref", "#/components/responses/Error"}}}}}}}};
    paths["/risk/predict"] = {
        {"post",
         {{"summary", "Risk probabilities for feature rows"},
          {"requestBody",
           {{"content",
             {{"application/json",
               {{"schema",
                 {{"type", "object"},
                  {"properties", {{"model_id", {{"type", "string"}}}, {"rows", {{"type", "array"}}}}}}}}}}}}},
          {"responses",
           {{"200", {{"description", "predictions"}}},
            {"404", {{"$ref", "#/components/responses/Error"}}},
            {"422", {{"$ref", "#/components/responses/Error"}}}}}}}};
    paths["/spec"] = get("This document", json::array());

    json train_schema = {{"type", "object"},
                         {"properties",
                          {{"name", {{"type", "string"}}},
                           {"model", {{"type", "string"}, {"enum", {"dt", "nb", "lr", "gbt", "rf"}}}},
                           {"resample", {{"type", "string"}}},
                           {"scale", {{"type", "boolean"}}},
                           {"tune_budget", {{"type", "integer"}}},
                           {"folds", {{"type", "integer"}}},
                           {"hyperparameters", {{"type", "object"}}},
                           {"seed", {{"type", "integer"}}},
                           {"test_fraction", {{"type", "number"}}},
                           {"features", {{"type", "array"}, {"items", {{"type", "string"}}}}},
                           {"incidents", {{"type", "string"}}}}}};
    json error_schema = {{"type", "object"},
                         {"properties",
                          {{"code",
                            {{"type", "string"},
                             {"enum", {"bad_request", "not_found", "conflict", "unprocessable", "internal"}}}},
                           {"message", {{"type", "string"}}},
                           {"detail", {{"type", "string"}}}}}};
    return json{{"openapi", "3.0.3"},
                {"info", {{"title", "urbanlens"}, {"version", "1.0.0"}}},
                {"paths", paths},
                {"components",
                 {{"schemas", {{"TrainRequest", train_schema}, {"Error", error_schema}}},
                  {"responses",
                   {{"Error",
                     {{"description", "error envelope"},
                      {"content", {{"application/json", {{"schema", {{"$ref", "#/components/schemas/Error"}}}}}}}}}}}}}};
}

} // namespace ul::service
