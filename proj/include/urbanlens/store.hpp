#pragma once

#include "urbanlens/geo.hpp"
#include "urbanlens/ingest.hpp"
#include "urbanlens/learn.hpp"

#include <json.hpp>

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace ul::service {

struct DatasetEntry {
    std::shared_ptr<const ingest::DatasetTable> table;
    std::string file; // relative to the store directory

    const ingest::DatasetManifest& manifest() const { return table->manifest; }
    nlohmann::json summary() const;
};

struct ModelEntry {
    std::string id;
    std::string name;
    std::string file;
    nlohmann::json record; // pipeline, spec, reports; what GET /risk/models lists
    std::shared_ptr<const learn::TrainedModel> model;
};

// Immutable view of the store. Readers hold a shared_ptr for as long as they
// need it; writers build a new snapshot and swap it in.
struct Snapshot {
    geo::RegionSet regions;
    std::vector<DatasetEntry> datasets; // sorted by name
    std::vector<ModelEntry> models;     // sorted by id
    std::vector<nlohmann::json> ingest_log;
    std::uint64_t next_model = 1;

    const DatasetEntry* find_dataset(std::string_view name) const;
    const ModelEntry* find_model(std::string_view id) const;
    std::vector<const ingest::DatasetTable*> tables() const;
};

// Directory layout: catalog.json, regions.geojson, datasets/<name>.csv
// (normalized form), models/<id>.bin. The catalog is rewritten through a
// temporary file and rename after the data files are in place, so a crash
// leaves either the old or the new state.
class Store {
public:
    explicit Store(std::string directory);

    const std::string& directory() const { return dir_; }
    std::shared_ptr<const Snapshot> snapshot() const;

    // Merges the regions into the registry. Throws DuplicateRegion.
    nlohmann::json register_regions(std::string_view geojson);

    // Runs the ingest pipeline and publishes the table. Re-uploading an
    // existing name+version throws DuplicateDataset (conflict); a new version
    // replaces the previous table of that name.
    nlohmann::json ingest(std::string_view manifest_json, std::string_view csv,
                          std::optional<std::string_view> geojson = std::nullopt);

    // Persists a trained model and its record; returns the assigned id.
    std::string add_model(const std::string& name, nlohmann::json record, learn::TrainedModel model);

private:
    void load();
    void persist_catalog(const Snapshot& snap) const;
    void publish(std::shared_ptr<const Snapshot> snap);

    std::string dir_;
    mutable std::mutex snap_mu_;
    std::shared_ptr<const Snapshot> snap_;
    std::mutex write_mu_; // single writer
};

} // namespace ul::service
