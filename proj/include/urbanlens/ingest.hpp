#pragma once

#include "urbanlens/geo.hpp"
#include "urbanlens/util.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ul::ingest {

enum class Granularity { hourly = 0, daily = 1, annual = 2 };
enum class GeometryKind { point, boundary };
enum class SemanticType { real, count, categorical, timestamp, region_id, lat, lon };
enum class Aggregation { mean, sum, max, min };

const char* to_string(Granularity g);
const char* to_string(GeometryKind g);
const char* to_string(SemanticType t);
const char* to_string(Aggregation a);
Granularity parse_granularity(std::string_view text);
Aggregation parse_aggregation(std::string_view text);

struct ColumnSpec {
    std::string name;
    SemanticType type = SemanticType::real;
    Aggregation aggregation = Aggregation::mean; // real -> mean, count -> sum unless overridden

    bool numeric() const { return type == SemanticType::real || type == SemanticType::count; }
    bool data() const { return numeric() || type == SemanticType::categorical; }
};

struct DatasetManifest {
    std::string name;
    std::string category;
    Granularity granularity = Granularity::daily;
    GeometryKind geometry = GeometryKind::boundary;
    std::vector<ColumnSpec> columns;
    std::string source_path;
    std::string dedupe_key; // optional: duplicate-report column
    std::string version = "1";

    // Throws InvalidManifest when the invariants do not hold.
    void validate() const;
    std::optional<std::size_t> column_index(std::string_view column) const;
    std::size_t timestamp_column() const;

    static DatasetManifest from_json(const nlohmann::json& doc);
    nlohmann::json to_json() const;
};

struct Provenance {
    std::size_t rows_read = 0;
    std::size_t rows_kept = 0;
    std::size_t dropped_type_mismatch = 0;
    std::size_t dropped_unresolved = 0;
    std::size_t dedup_removed = 0;
    std::vector<std::string> issues; // first few row-level problems, for the ingest log

    nlohmann::json to_json() const;
};

struct DataRow {
    Timestamp ts;
    std::string region_id;
    // One slot per manifest column. Numeric cells hold the value (NaN when
    // empty); categorical cells hold a level code into DatasetTable::levels.
    std::vector<double> values;
};

// Immutable after construction.
struct DatasetTable {
    DatasetManifest manifest;
    std::vector<DataRow> rows;
    std::vector<std::vector<std::string>> levels; // per column, categorical only
    Provenance provenance;

    std::size_t column(std::string_view name) const; // throws MissingColumn
};

// Parses raw CSV against the manifest. Point rows are mapped to the first
// containing region in ascending region_id order.
DatasetTable parse_table(const DatasetManifest& manifest, std::string_view csv_text, const geo::RegionSet& regions);

// Canonical persisted form: timestamp, region_id, data columns.
std::string write_normalized(const DatasetTable& table);
DatasetTable read_normalized(const DatasetManifest& manifest, std::string_view csv_text, Provenance provenance);

DatasetTable dedupe_incidents(const DatasetTable& table, std::string_view key_column);

// One row per (region, date); numeric columns aggregated with their operator.
DatasetTable daily_average(const DatasetTable& table);

struct RiskCount {
    std::size_t count = 0;
    int label = 0;
};

class RiskLabels {
public:
    explicit RiskLabels(const DatasetTable& incidents);
    RiskCount lookup(const std::string& region_id, Date date) const;
    std::size_t days_with_incidents() const { return counts_.size(); }

private:
    std::map<std::pair<std::string, std::int32_t>, std::size_t> counts_;
};

// Time-indexed series keyed by (region, period). The region part is empty
// when the series has been aggregated over a region selection.
struct SeriesKey {
    std::string region;
    std::int64_t period = 0;
    auto operator<=>(const SeriesKey&) const = default;
};

struct Series {
    Granularity granularity = Granularity::daily;
    Aggregation aggregation = Aggregation::mean;
    bool zero_fill = false; // event counts: an absent key means zero
    std::map<SeriesKey, double> values;

    std::vector<double> ordered_values() const;
};

std::int64_t period_of(const Timestamp& ts, Granularity g);
double aggregate(const std::vector<double>& values, Aggregation agg); // NaN-skipping; NaN when empty
Series coarsen_series(const Series& s, Granularity to);
// Drops the region part of every key, aggregating across regions per period.
Series collapse_regions(const Series& s);
std::int64_t coarsen(std::int64_t period, Granularity from, Granularity to);
std::string period_label(std::int64_t period, Granularity g);

// Aggregates the finer series to the coarser one's period and keeps the
// shared keys only. Throws IncompatibleGranularity when nothing overlaps.
std::pair<Series, Series> align_granularity(const Series& a, const Series& b);

enum class BinStrategy { equal_width, quantile };
std::vector<int> bin_values(const std::vector<double>& x, int k, BinStrategy strategy);

struct FeatureRow {
    std::string region_id;
    Date date;
    int day_of_week = 0;
    std::vector<double> features;
    int label = 0;
    std::size_t incident_count = 0;
};

struct FeatureTable {
    std::vector<std::string> feature_names;
    std::vector<FeatureRow> rows;
};

struct FeatureRef {
    std::string dataset;
    std::string column;
};

FeatureTable assemble_feature_table(const std::vector<const DatasetTable*>& tables, const std::vector<FeatureRef>& spec,
                                    const DatasetTable* incidents, const geo::RegionSet& regions);

} // namespace ul::ingest
