#pragma once

#include "urbanlens/learn.hpp"
#include "urbanlens/store.hpp"

#include <json.hpp>

#include <string>
#include <string_view>

namespace ul::service {

// Request parameters are a flat JSON object whose values are strings (as they
// arrive in a query string) or numbers. The CLI and the HTTP handlers build
// the same object for the same flags, so both print the same bytes.
using Params = nlohmann::json;

// Canonical response body: two-space indented JSON plus a trailing newline.
std::string render(const nlohmann::json& body);

// Read-only endpoints: "datasets", "regions", "rank", "insights",
// "spatial/global", "spatial/lisa", "models". Throws NotFound for others.
nlohmann::json query(const Snapshot& snap, std::string_view endpoint, const Params& params);

// Per-region values of "dataset.column", "dataset.column=level" (row counts
// of one level) or "dataset" (row counts) over [from, to]. Regions without
// data are absent for measurements and zero for counts.
std::vector<std::pair<std::string, double>> region_field(const Snapshot& snap, std::string_view variable, Date from,
                                                         Date to);

struct TrainRequest {
    std::string name;
    learn::Pipeline pipeline;
    std::uint64_t seed = 7;
    double test_fraction = 0.2;
    std::vector<ingest::FeatureRef> features;
    std::string incidents = "incidents";

    nlohmann::json to_json() const;
    // Throws BadRequest-class errors for malformed or unknown fields.
    static TrainRequest from_json(const nlohmann::json& doc);
};

// Joined feature table with risk labels, as a labeled set.
resample::LabeledSet risk_dataset(const Snapshot& snap, const std::vector<ingest::FeatureRef>& features,
                                  const std::string& incidents);

// Throws NotFound when a referenced dataset is missing.
void check_train_inputs(const Snapshot& snap, const TrainRequest& request);

// Runs the experiment synchronously and registers the model; returns its record.
nlohmann::json train(Store& store, const TrainRequest& request);

// {"model_id": ..., "rows": [[...], ...] or [{"feature": value, ...}, ...]}
nlohmann::json predict(const Snapshot& snap, const nlohmann::json& request);

// Labeled CSV export; with test_fraction > 0 the split is stratified.
struct FeatureExport {
    std::string train_csv;
    std::string test_csv;
};
FeatureExport export_features(const Snapshot& snap, const Params& params);

nlohmann::json model_record(const learn::ExperimentResult& result, const TrainRequest& request);
nlohmann::json openapi();

} // namespace ul::service
