#include "urbanlens/store.hpp"

#include "urbanlens/error.hpp"
#include "urbanlens/util.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>

namespace ul::service {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kCatalog = "catalog.json";
constexpr const char* kRegions = "regions.geojson";

void write_atomic(const fs::path& path, std::string_view content)
{
    const fs::path tmp = path.string() + ".tmp";
    write_file(tmp.string(), content);
    fs::rename(tmp, path);
}

bool safe_name(std::string_view s)
{
    if (s.empty() || s.size() > 128 || s.front() == '.') {
        return false;
    }
    return std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
               c == '.';
    });
}

ingest::Provenance provenance_from_json(const json& doc)
{
    ingest::Provenance p;
    p.rows_read = doc.value("rows_read", std::size_t{0});
    p.rows_kept = doc.value("rows_kept", std::size_t{0});
    p.dropped_type_mismatch = doc.value("dropped_type_mismatch", std::size_t{0});
    p.dropped_unresolved = doc.value("dropped_unresolved", std::size_t{0});
    p.dedup_removed = doc.value("dedup_removed", std::size_t{0});
    if (doc.contains("issues")) {
        p.issues = doc["issues"].get<std::vector<std::string>>();
    }
    return p;
}

json parse_json(std::string_view text, const char* what)
{
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        fail("MalformedRequest", ApiCode::bad_request, std::string("malformed ") + what + ": " + e.what());
    }
}

} // namespace

json DatasetEntry::summary() const
{
    const auto& m = manifest();
    json cols = json::array();
    for (const auto& c : m.columns) {
        if (c.data()) {
            cols.push_back(c.name);
        }
    }
    return json{{"name", m.name},
                {"version", m.version},
                {"category", m.category},
                {"granularity", ingest::to_string(m.granularity)},
                {"geometry", ingest::to_string(m.geometry)},
                {"columns", cols},
                {"rows", table->rows.size()},
                {"provenance", table->provenance.to_json()}};
}

const DatasetEntry* Snapshot::find_dataset(std::string_view name) const
{
    for (const auto& d : datasets) {
        if (d.manifest().name == name) {
            return &d;
        }
    }
    return nullptr;
}

const ModelEntry* Snapshot::find_model(std::string_view id) const
{
    for (const auto& m : models) {
        if (m.id == id) {
            return &m;
        }
    }
    return nullptr;
}

std::vector<const ingest::DatasetTable*> Snapshot::tables() const
{
    std::vector<const ingest::DatasetTable*> out;
    for (const auto& d : datasets) {
        out.push_back(d.table.get());
    }
    return out;
}

Store::Store(std::string directory) : dir_(std::move(directory))
{
    if (dir_.empty()) {
        fail("InvalidArgument", ApiCode::bad_request, "store directory is empty");
    }
    std::error_code ec;
    fs::create_directories(fs::path(dir_) / "datasets", ec);
    fs::create_directories(fs::path(dir_) / "models", ec);
    if (ec) {
        fail("StoreUnavailable", ApiCode::internal, "cannot create store directory '" + dir_ + "': " + ec.message());
    }
    load();
}

std::shared_ptr<const Snapshot> Store::snapshot() const
{
    std::lock_guard lock(snap_mu_);
    return snap_;
}

void Store::publish(std::shared_ptr<const Snapshot> snap)
{
    std::lock_guard lock(snap_mu_);
    snap_ = std::move(snap);
}

void Store::load()
{
    auto snap = std::make_shared<Snapshot>();
    const fs::path root(dir_);
    if (fs::exists(root / kRegions)) {
        snap->regions = geo::RegionSet(geo::parse_geojson(read_file((root / kRegions).string())));
    }
    if (fs::exists(root / kCatalog)) {
        json catalog;
        try {
            catalog = json::parse(read_file((root / kCatalog).string()));
            snap->next_model = catalog.value("next_model", std::uint64_t{1});
            for (const auto& d : catalog.at("datasets")) {
                const auto manifest = ingest::DatasetManifest::from_json(d.at("manifest"));
                const std::string file = d.at("file").get<std::string>();
                auto table = std::make_shared<ingest::DatasetTable>(ingest::read_normalized(
                    manifest, read_file((root / file).string()), provenance_from_json(d.at("provenance"))));
                snap->datasets.push_back({std::move(table), file});
            }
            for (const auto& m : catalog.at("models")) {
                ModelEntry e;
                e.id = m.at("id").get<std::string>();
                e.name = m.at("name").get<std::string>();
                e.file = m.at("file").get<std::string>();
                e.record = m.at("record");
                e.model = std::make_shared<learn::TrainedModel>(learn::deserialize(read_file((root / e.file).string())));
                snap->models.push_back(std::move(e));
            }
            for (const auto& entry : catalog.value("ingest_log", json::array())) {
                snap->ingest_log.push_back(entry);
            }
        } catch (const json::exception& e) {
            fail("CorruptStore", ApiCode::internal, std::string("unreadable catalog: ") + e.what());
        }
    }
    publish(std::move(snap));
}

void Store::persist_catalog(const Snapshot& snap) const
{
    json datasets = json::array();
    for (const auto& d : snap.datasets) {
        datasets.push_back(
            {{"manifest", d.manifest().to_json()}, {"file", d.file}, {"provenance", d.table->provenance.to_json()}});
    }
    json models = json::array();
    for (const auto& m : snap.models) {
        models.push_back({{"id", m.id}, {"name", m.name}, {"file", m.file}, {"record", m.record}});
    }
    const json catalog{{"format", "urbanlens-store"},
                       {"version", 1},
                       {"next_model", snap.next_model},
                       {"datasets", datasets},
                       {"models", models},
                       {"ingest_log", snap.ingest_log}};
    write_atomic(fs::path(dir_) / kCatalog, catalog.dump(1) + "\n");
}

json Store::register_regions(std::string_view geojson)
{
    geo::RegionSet incoming(geo::parse_geojson(geojson));
    std::lock_guard lock(write_mu_);
    auto next = std::make_shared<Snapshot>(*snapshot());
    const std::size_t before = next->regions.size();
    next->regions = next->regions.merged(incoming);
    if (next->regions.size() != before) {
        write_atomic(fs::path(dir_) / kRegions, geo::to_geojson(next->regions));
    }
    persist_catalog(*next);
    json out{{"regions", next->regions.size()}, {"added", next->regions.size() - before}};
    publish(std::move(next));
    return out;
}

json Store::ingest(std::string_view manifest_json, std::string_view csv, std::optional<std::string_view> geojson)
{
    const auto manifest = ingest::DatasetManifest::from_json(parse_json(manifest_json, "manifest"));
    if (!safe_name(manifest.name) || !safe_name(manifest.version)) {
        fail("InvalidManifest", ApiCode::bad_request,
             "dataset name and version may only contain letters, digits, '_', '-' and '.'");
    }
    std::optional<geo::RegionSet> incoming;
    if (geojson && !geojson->empty()) {
        incoming.emplace(geo::parse_geojson(*geojson));
    }

    std::lock_guard lock(write_mu_);
    auto next = std::make_shared<Snapshot>(*snapshot());
    if (const auto* existing = next->find_dataset(manifest.name); existing && existing->manifest().version == manifest.version) {
        fail("DuplicateDataset", ApiCode::conflict,
             "dataset '" + manifest.name + "' version " + manifest.version + " already ingested");
    }
    const std::size_t regions_before = next->regions.size();
    if (incoming) {
        next->regions = next->regions.merged(*incoming);
    }
    if (next->regions.empty()) {
        fail("NoRegions", ApiCode::bad_request, "no regions registered; upload a GeoJSON with the dataset");
    }

    auto table = std::make_shared<ingest::DatasetTable>(ingest::parse_table(manifest, csv, next->regions));
    if (!manifest.dedupe_key.empty()) {
        table = std::make_shared<ingest::DatasetTable>(ingest::dedupe_incidents(*table, manifest.dedupe_key));
    }

    const std::string file = "datasets/" + manifest.name + "@" + manifest.version + ".csv";
    write_atomic(fs::path(dir_) / file, ingest::write_normalized(*table));
    if (next->regions.size() != regions_before) {
        write_atomic(fs::path(dir_) / kRegions, geo::to_geojson(next->regions));
    }

    std::string replaced;
    std::erase_if(next->datasets, [&](const DatasetEntry& d) {
        if (d.manifest().name == manifest.name) {
            replaced = d.file;
            return true;
        }
        return false;
    });
    DatasetEntry entry{table, file};
    json summary = entry.summary();
    next->datasets.push_back(std::move(entry));
    std::sort(next->datasets.begin(), next->datasets.end(),
              [](const DatasetEntry& a, const DatasetEntry& b) { return a.manifest().name < b.manifest().name; });
    next->ingest_log.push_back({{"dataset", manifest.name},
                                {"version", manifest.version},
                                {"regions_added", next->regions.size() - regions_before},
                                {"provenance", table->provenance.to_json()}});
    persist_catalog(*next);
    publish(std::move(next));
    if (!replaced.empty() && replaced != file) {
        std::error_code ec;
        fs::remove(fs::path(dir_) / replaced, ec);
    }
    return summary;
}

std::string Store::add_model(const std::string& name, json record, learn::TrainedModel model)
{
    std::lock_guard lock(write_mu_);
    auto next = std::make_shared<Snapshot>(*snapshot());
    char id[32];
    std::snprintf(id, sizeof id, "m%06llu", static_cast<unsigned long long>(next->next_model++));
    ModelEntry e;
    e.id = id;
    e.name = name;
    e.file = "models/" + e.id + ".bin";
    record["id"] = e.id;
    record["name"] = name;
    e.record = std::move(record);
    write_atomic(fs::path(dir_) / e.file, learn::serialize(model));
    e.model = std::make_shared<learn::TrainedModel>(std::move(model));
    next->models.push_back(std::move(e));
    persist_catalog(*next);
    publish(std::move(next));
    return id;
}

} // namespace ul::service
