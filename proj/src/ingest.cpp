#include "urbanlens/ingest.hpp"

#include "urbanlens/csv.hpp"
#include "urbanlens/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

namespace ul::ingest {

using nlohmann::json;

namespace {
constexpr std::size_t kMaxIssues = 20;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void invalid_manifest(const std::string& msg)
{
    fail("InvalidManifest", ApiCode::bad_request, msg);
}
} // namespace

const char* to_string(Granularity g)
{
    switch (g) {
    case Granularity::hourly: return "hourly";
    case Granularity::daily: return "daily";
    case Granularity::annual: return "annual";
    }
    return "daily";
}

const char* to_string(GeometryKind g)
{
    return g == GeometryKind::point ? "point" : "boundary";
}

const char* to_string(SemanticType t)
{
    switch (t) {
    case SemanticType::real: return "real";
    case SemanticType::count: return "count";
    case SemanticType::categorical: return "categorical";
    case SemanticType::timestamp: return "timestamp";
    case SemanticType::region_id: return "region-id";
    case SemanticType::lat: return "lat";
    case SemanticType::lon: return "lon";
    }
    return "real";
}

const char* to_string(Aggregation a)
{
    switch (a) {
    case Aggregation::mean: return "mean";
    case Aggregation::sum: return "sum";
    case Aggregation::max: return "max";
    case Aggregation::min: return "min";
    }
    return "mean";
}

Granularity parse_granularity(std::string_view text)
{
    if (text == "hourly") return Granularity::hourly;
    if (text == "daily") return Granularity::daily;
    if (text == "annual") return Granularity::annual;
    invalid_manifest("unknown granularity '" + std::string(text) + "'");
}

Aggregation parse_aggregation(std::string_view text)
{
    if (text == "mean") return Aggregation::mean;
    if (text == "sum") return Aggregation::sum;
    if (text == "max") return Aggregation::max;
    if (text == "min") return Aggregation::min;
    invalid_manifest("unknown aggregate '" + std::string(text) + "'");
}

namespace {
SemanticType parse_semantic(std::string_view text)
{
    if (text == "real") return SemanticType::real;
    if (text == "count") return SemanticType::count;
    if (text == "categorical") return SemanticType::categorical;
    if (text == "timestamp") return SemanticType::timestamp;
    if (text == "region-id" || text == "region_id") return SemanticType::region_id;
    if (text == "lat") return SemanticType::lat;
    if (text == "lon") return SemanticType::lon;
    invalid_manifest("unknown column type '" + std::string(text) + "'");
}
} // namespace

void DatasetManifest::validate() const
{
    if (name.empty()) invalid_manifest("manifest name is empty");
    if (name.find('.') != std::string::npos) invalid_manifest("dataset name must not contain '.'");
    if (category.empty()) invalid_manifest("manifest category is empty");
    std::set<std::string> seen;
    int timestamps = 0, lats = 0, lons = 0, regions = 0;
    for (const auto& c : columns) {
        if (c.name.empty()) invalid_manifest("column with empty name");
        if (!seen.insert(c.name).second) invalid_manifest("duplicate column '" + c.name + "'");
        timestamps += c.type == SemanticType::timestamp;
        lats += c.type == SemanticType::lat;
        lons += c.type == SemanticType::lon;
        regions += c.type == SemanticType::region_id;
    }
    if (timestamps != 1) invalid_manifest("manifest needs exactly one timestamp column");
    if (geometry == GeometryKind::point && (lats != 1 || lons != 1)) {
        invalid_manifest("point datasets need one lat and one lon column");
    }
    if (geometry == GeometryKind::boundary && regions != 1) {
        invalid_manifest("boundary datasets need one region-id column");
    }
    if (!dedupe_key.empty() && !column_index(dedupe_key)) {
        invalid_manifest("dedupe_key '" + dedupe_key + "' is not a manifest column");
    }
}

std::optional<std::size_t> DatasetManifest::column_index(std::string_view column) const
{
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].name == column) {
            return i;
        }
    }
    return std::nullopt;
}

std::size_t DatasetManifest::timestamp_column() const
{
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].type == SemanticType::timestamp) {
            return i;
        }
    }
    invalid_manifest("manifest has no timestamp column");
}

DatasetManifest DatasetManifest::from_json(const json& doc)
{
    if (!doc.is_object()) invalid_manifest("manifest must be a JSON object");
    DatasetManifest m;
    try {
        m.name = doc.at("name").get<std::string>();
        m.category = doc.at("category").get<std::string>();
        m.granularity = parse_granularity(doc.at("granularity").get<std::string>());
        const auto geom = doc.at("geometry").get<std::string>();
        if (geom == "point") {
            m.geometry = GeometryKind::point;
        } else if (geom == "boundary") {
            m.geometry = GeometryKind::boundary;
        } else {
            invalid_manifest("unknown geometry '" + geom + "'");
        }
        for (const auto& c : doc.at("columns")) {
            ColumnSpec col;
            if (c.is_array()) {
                col.name = c.at(0).get<std::string>();
                col.type = parse_semantic(c.at(1).get<std::string>());
            } else {
                col.name = c.at("name").get<std::string>();
                col.type = parse_semantic(c.at("type").get<std::string>());
            }
            col.aggregation = col.type == SemanticType::count ? Aggregation::sum : Aggregation::mean;
            if (c.is_object() && c.contains("aggregate")) {
                col.aggregation = parse_aggregation(c["aggregate"].get<std::string>());
            }
            m.columns.push_back(std::move(col));
        }
        m.source_path = doc.value("source_path", "");
        m.dedupe_key = doc.value("dedupe_key", "");
        if (doc.contains("version")) {
            m.version = doc["version"].is_string() ? doc["version"].get<std::string>() : doc["version"].dump();
        }
    } catch (const json::exception& e) {
        invalid_manifest(std::string("malformed manifest: ") + e.what());
    }
    m.validate();
    return m;
}

json DatasetManifest::to_json() const
{
    json cols = json::array();
    for (const auto& c : columns) {
        json col{{"name", c.name}, {"type", to_string(c.type)}};
        if (c.numeric()) {
            col["aggregate"] = to_string(c.aggregation);
        }
        cols.push_back(std::move(col));
    }
    json out{{"name", name},
             {"category", category},
             {"granularity", to_string(granularity)},
             {"geometry", to_string(geometry)},
             {"columns", cols},
             {"source_path", source_path},
             {"version", version}};
    if (!dedupe_key.empty()) {
        out["dedupe_key"] = dedupe_key;
    }
    return out;
}

json Provenance::to_json() const
{
    return json{{"rows_read", rows_read},
                {"rows_kept", rows_kept},
                {"dropped_type_mismatch", dropped_type_mismatch},
                {"dropped_unresolved", dropped_unresolved},
                {"dedup_removed", dedup_removed},
                {"issues", issues}};
}

std::size_t DatasetTable::column(std::string_view name) const
{
    auto idx = manifest.column_index(name);
    if (!idx) {
        fail("MissingColumn", ApiCode::unprocessable,
             "column '" + std::string(name) + "' not in dataset '" + manifest.name + "'");
    }
    return *idx;
}

namespace {

void note(Provenance& p, std::string issue)
{
    if (p.issues.size() < kMaxIssues) {
        p.issues.push_back(std::move(issue));
    }
}

struct LevelCoder {
    std::vector<std::unordered_map<std::string, std::size_t>> index;
    std::vector<std::vector<std::string>>& levels;

    LevelCoder(std::size_t columns, std::vector<std::vector<std::string>>& lv) : index(columns), levels(lv)
    {
        levels.assign(columns, {});
    }
    double code(std::size_t col, const std::string& value)
    {
        auto [it, inserted] = index[col].try_emplace(value, levels[col].size());
        if (inserted) {
            levels[col].push_back(value);
        }
        return static_cast<double>(it->second);
    }
};

} // namespace

DatasetTable parse_table(const DatasetManifest& manifest, std::string_view csv_text, const geo::RegionSet& regions)
{
    manifest.validate();
    const auto records = csv::parse(csv_text);
    if (records.empty()) {
        fail("MissingColumn", ApiCode::unprocessable, "CSV for '" + manifest.name + "' has no header row");
    }
    const auto& header = records.front();
    std::vector<std::size_t> source(manifest.columns.size());
    for (std::size_t c = 0; c < manifest.columns.size(); ++c) {
        auto it = std::find_if(header.begin(), header.end(),
                               [&](const std::string& h) { return trim(h) == manifest.columns[c].name; });
        if (it == header.end()) {
            fail("MissingColumn", ApiCode::unprocessable,
                 "column '" + manifest.columns[c].name + "' missing from CSV header of '" + manifest.name + "'");
        }
        source[c] = static_cast<std::size_t>(it - header.begin());
    }

    DatasetTable table;
    table.manifest = manifest;
    LevelCoder coder(manifest.columns.size(), table.levels);
    auto& prov = table.provenance;

    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        const std::size_t line = r + 1;
        ++prov.rows_read;
        DataRow row;
        row.values.assign(manifest.columns.size(), kNaN);
        bool ok = true;
        double lat = kNaN, lon = kNaN;
        for (std::size_t c = 0; c < manifest.columns.size() && ok; ++c) {
            const auto& spec = manifest.columns[c];
            const std::string cell = source[c] < rec.size() ? trim(rec[source[c]]) : std::string{};
            auto mismatch = [&] {
                ok = false;
                ++prov.dropped_type_mismatch;
                note(prov, "TypeMismatch(row " + std::to_string(line) + ", col " + spec.name + ")");
            };
            switch (spec.type) {
            case SemanticType::timestamp: {
                auto ts = Timestamp::parse(cell);
                if (!ts) {
                    mismatch();
                } else {
                    row.ts = *ts;
                }
                break;
            }
            case SemanticType::region_id:
                if (cell.empty()) {
                    mismatch();
                } else {
                    row.region_id = cell;
                }
                break;
            case SemanticType::lat:
            case SemanticType::lon: {
                auto v = parse_double(cell);
                if (!v) {
                    mismatch();
                } else {
                    (spec.type == SemanticType::lat ? lat : lon) = *v;
                }
                break;
            }
            case SemanticType::real:
            case SemanticType::count: {
                if (cell.empty()) {
                    break; // missing reading; dropped only when joined
                }
                auto v = parse_double(cell);
                if (!v || (spec.type == SemanticType::count && (*v < 0 || std::floor(*v) != *v))) {
                    mismatch();
                } else {
                    row.values[c] = *v;
                }
                break;
            }
            case SemanticType::categorical:
                row.values[c] = coder.code(c, cell);
                break;
            }
        }
        if (!ok) {
            continue;
        }
        if (manifest.geometry == GeometryKind::point) {
            auto idx = regions.locate({lon, lat});
            if (!idx) {
                ++prov.dropped_unresolved;
                note(prov, "UnresolvedLocation(row " + std::to_string(line) + ")");
                continue;
            }
            row.region_id = regions.units()[*idx].region_id;
        } else if (!regions.contains(row.region_id)) {
            ++prov.dropped_unresolved;
            note(prov, "UnresolvedLocation(row " + std::to_string(line) + ", region " + row.region_id + ")");
            continue;
        }
        table.rows.push_back(std::move(row));
    }
    prov.rows_kept = table.rows.size();
    return table;
}

namespace {
std::string format_timestamp(const Timestamp& ts)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "T%02d:%02d:%02d", ts.seconds / 3600, (ts.seconds / 60) % 60, ts.seconds % 60);
    return ts.date.iso() + buf;
}

std::string format_number(double v)
{
    if (std::isnan(v)) {
        return {};
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
} // namespace

std::string write_normalized(const DatasetTable& table)
{
    const auto& m = table.manifest;
    csv::Record header{"timestamp", "region_id"};
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < m.columns.size(); ++c) {
        if (m.columns[c].data()) {
            header.push_back(m.columns[c].name);
            cols.push_back(c);
        }
    }
    std::string out = csv::format_record(header);
    for (const auto& row : table.rows) {
        csv::Record rec{format_timestamp(row.ts), row.region_id};
        for (auto c : cols) {
            if (m.columns[c].type == SemanticType::categorical) {
                rec.push_back(table.levels[c][static_cast<std::size_t>(row.values[c])]);
            } else {
                rec.push_back(format_number(row.values[c]));
            }
        }
        out += csv::format_record(rec);
    }
    return out;
}

DatasetTable read_normalized(const DatasetManifest& manifest, std::string_view csv_text, Provenance provenance)
{
    const auto records = csv::parse(csv_text);
    DatasetTable table;
    table.manifest = manifest;
    table.provenance = std::move(provenance);
    LevelCoder coder(manifest.columns.size(), table.levels);
    if (records.empty()) {
        return table;
    }
    const auto& header = records.front();
    std::vector<std::pair<std::size_t, std::size_t>> map; // (manifest col, csv col)
    for (std::size_t h = 2; h < header.size(); ++h) {
        map.emplace_back(table.column(header[h]), h);
    }
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        DataRow row;
        row.values.assign(manifest.columns.size(), kNaN);
        auto ts = Timestamp::parse(rec.at(0));
        if (!ts) {
            fail("CorruptStore", ApiCode::internal, "bad timestamp in stored table '" + manifest.name + "'");
        }
        row.ts = *ts;
        row.region_id = rec.at(1);
        for (auto [c, h] : map) {
            const std::string& cell = h < rec.size() ? rec[h] : std::string{};
            if (manifest.columns[c].type == SemanticType::categorical) {
                row.values[c] = coder.code(c, cell);
            } else if (auto v = parse_double(cell)) {
                row.values[c] = *v;
            }
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

DatasetTable dedupe_incidents(const DatasetTable& table, std::string_view key_column)
{
    const std::size_t key = table.column(key_column);
    DatasetTable out;
    out.manifest = table.manifest;
    out.levels = table.levels;
    out.provenance = table.provenance;
    std::set<std::string> seen;
    const bool categorical = table.manifest.columns[key].type == SemanticType::categorical;
    for (const auto& row : table.rows) {
        std::string k = categorical ? table.levels[key][static_cast<std::size_t>(row.values[key])]
                                    : format_number(row.values[key]);
        if (seen.insert(std::move(k)).second) {
            out.rows.push_back(row);
        } else {
            ++out.provenance.dedup_removed;
        }
    }
    out.provenance.rows_kept = out.rows.size();
    return out;
}

namespace {

struct Accumulator {
    double sum = 0.0;
    double best = kNaN;
    std::size_t n = 0;

    void add(double v, Aggregation agg)
    {
        if (std::isnan(v)) {
            return;
        }
        sum += v;
        ++n;
        if (std::isnan(best) || (agg == Aggregation::max ? v > best : v < best)) {
            best = v;
        }
    }
    double result(Aggregation agg, bool empty_is_zero = false) const
    {
        if (n == 0) {
            return empty_is_zero ? 0.0 : kNaN;
        }
        switch (agg) {
        case Aggregation::mean: return sum / static_cast<double>(n);
        case Aggregation::sum: return sum;
        case Aggregation::max:
        case Aggregation::min: return best;
        }
        return kNaN;
    }
};

} // namespace

DatasetTable daily_average(const DatasetTable& table)
{
    const auto& m = table.manifest;
    if (m.granularity == Granularity::annual) {
        fail("IncompatibleGranularity", ApiCode::unprocessable,
             "dataset '" + m.name + "' is annual and cannot be reduced to daily values");
    }
    std::vector<std::size_t> numeric;
    for (std::size_t c = 0; c < m.columns.size(); ++c) {
        if (m.columns[c].numeric()) {
            numeric.push_back(c);
        }
    }
    if (numeric.empty()) {
        fail("NoNumericColumns", ApiCode::unprocessable, "dataset '" + m.name + "' has no numeric columns");
    }

    DatasetTable out;
    out.manifest = m;
    out.manifest.granularity = Granularity::daily;
    out.manifest.columns.clear();
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < m.columns.size(); ++c) {
        const auto t = m.columns[c].type;
        if (m.columns[c].numeric() || t == SemanticType::timestamp) {
            out.manifest.columns.push_back(m.columns[c]);
            keep.push_back(c);
        }
    }
    // boundary form after region assignment
    out.manifest.geometry = GeometryKind::boundary;
    out.manifest.columns.push_back({"region_id", SemanticType::region_id, Aggregation::mean});
    out.manifest.dedupe_key.clear();
    out.levels.assign(out.manifest.columns.size(), {});
    out.provenance = table.provenance;

    std::map<std::pair<std::string, std::int32_t>, std::vector<Accumulator>> groups;
    for (const auto& row : table.rows) {
        auto& acc = groups[{row.region_id, row.ts.date.days}];
        acc.resize(m.columns.size());
        for (auto c : numeric) {
            acc[c].add(row.values[c], m.columns[c].aggregation);
        }
    }
    for (const auto& [key, acc] : groups) {
        DataRow row;
        row.region_id = key.first;
        row.ts = Timestamp{Date{key.second}, 0};
        row.values.assign(out.manifest.columns.size(), kNaN);
        for (std::size_t o = 0; o < keep.size(); ++o) {
            const auto c = keep[o];
            if (m.columns[c].numeric()) {
                row.values[o] = acc[c].result(m.columns[c].aggregation);
            }
        }
        out.rows.push_back(std::move(row));
    }
    out.provenance.rows_kept = out.rows.size();
    return out;
}

RiskLabels::RiskLabels(const DatasetTable& incidents)
{
    for (const auto& row : incidents.rows) {
        ++counts_[{row.region_id, row.ts.date.days}];
    }
}

RiskCount RiskLabels::lookup(const std::string& region_id, Date date) const
{
    auto it = counts_.find({region_id, date.days});
    if (it == counts_.end()) {
        return {};
    }
    return {it->second, it->second >= 1 ? 1 : 0};
}

std::vector<double> Series::ordered_values() const
{
    std::vector<double> out;
    out.reserve(values.size());
    for (const auto& [k, v] : values) {
        out.push_back(v);
    }
    return out;
}

std::int64_t period_of(const Timestamp& ts, Granularity g)
{
    switch (g) {
    case Granularity::hourly: return static_cast<std::int64_t>(ts.date.days) * 24 + ts.hour();
    case Granularity::daily: return ts.date.days;
    case Granularity::annual: return ts.date.year();
    }
    return ts.date.days;
}

std::int64_t coarsen(std::int64_t period, Granularity from, Granularity to)
{
    if (from == to) {
        return period;
    }
    if (static_cast<int>(from) > static_cast<int>(to)) {
        fail("IncompatibleGranularity", ApiCode::unprocessable, "cannot refine a coarser period");
    }
    std::int64_t days = period;
    if (from == Granularity::hourly) {
        days = period >= 0 ? period / 24 : (period - 23) / 24;
        if (to == Granularity::daily) {
            return days;
        }
    }
    return Date{static_cast<std::int32_t>(days)}.year();
}

std::string period_label(std::int64_t period, Granularity g)
{
    switch (g) {
    case Granularity::hourly: {
        const std::int64_t days = period >= 0 ? period / 24 : (period - 23) / 24;
        char buf[8];
        std::snprintf(buf, sizeof buf, "T%02d", static_cast<int>(period - days * 24));
        return Date{static_cast<std::int32_t>(days)}.iso() + buf;
    }
    case Granularity::daily: return Date{static_cast<std::int32_t>(period)}.iso();
    case Granularity::annual: return std::to_string(period);
    }
    return std::to_string(period);
}

double aggregate(const std::vector<double>& values, Aggregation agg)
{
    Accumulator acc;
    for (double v : values) {
        acc.add(v, agg);
    }
    return acc.result(agg);
}

Series collapse_regions(const Series& s)
{
    std::map<SeriesKey, Accumulator> acc;
    for (const auto& [k, v] : s.values) {
        acc[{std::string{}, k.period}].add(v, s.aggregation);
    }
    Series out;
    out.granularity = s.granularity;
    out.aggregation = s.aggregation;
    out.zero_fill = s.zero_fill;
    for (const auto& [k, a] : acc) {
        out.values.emplace(k, a.result(s.aggregation));
    }
    return out;
}

Series coarsen_series(const Series& s, Granularity to)
{
    if (s.granularity == to) {
        return s;
    }
    std::map<SeriesKey, Accumulator> acc;
    for (const auto& [k, v] : s.values) {
        acc[{k.region, coarsen(k.period, s.granularity, to)}].add(v, s.aggregation);
    }
    Series out;
    out.granularity = to;
    out.aggregation = s.aggregation;
    out.zero_fill = s.zero_fill;
    for (const auto& [k, a] : acc) {
        const double v = a.result(s.aggregation);
        if (!std::isnan(v)) {
            out.values.emplace(k, v);
        }
    }
    return out;
}

std::pair<Series, Series> align_granularity(const Series& a, const Series& b)
{
    const auto target = static_cast<Granularity>(std::max(static_cast<int>(a.granularity), static_cast<int>(b.granularity)));
    Series ca = coarsen_series(a, target);
    Series cb = coarsen_series(b, target);
    if (ca.zero_fill && !cb.zero_fill) {
        for (const auto& [k, v] : cb.values) {
            ca.values.try_emplace(k, 0.0);
        }
    } else if (cb.zero_fill && !ca.zero_fill) {
        for (const auto& [k, v] : ca.values) {
            cb.values.try_emplace(k, 0.0);
        }
    }
    Series oa = ca, ob = cb;
    oa.values.clear();
    ob.values.clear();
    auto ia = ca.values.begin();
    auto ib = cb.values.begin();
    while (ia != ca.values.end() && ib != cb.values.end()) {
        if (ia->first < ib->first) {
            ++ia;
        } else if (ib->first < ia->first) {
            ++ib;
        } else {
            oa.values.emplace_hint(oa.values.end(), *ia);
            ob.values.emplace_hint(ob.values.end(), *ib);
            ++ia;
            ++ib;
        }
    }
    if (oa.values.empty()) {
        fail("IncompatibleGranularity", ApiCode::unprocessable, "series share no periods after alignment");
    }
    return {std::move(oa), std::move(ob)};
}

std::vector<int> bin_values(const std::vector<double>& x, int k, BinStrategy strategy)
{
    if (k < 2) {
        fail("InvalidBinCount", ApiCode::bad_request, "bin count must be at least 2");
    }
    if (x.empty()) {
        return {};
    }
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    const auto distinct = static_cast<int>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
    sorted.assign(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());

    if (strategy == BinStrategy::quantile && distinct == 1) {
        fail("ConstantSeries", ApiCode::unprocessable, "quantile binning of a constant series");
    }
    if (k > distinct) {
        if (distinct > 1 || strategy == BinStrategy::quantile) {
            warn("DegenerateBins: " + std::to_string(k) + " bins requested for " + std::to_string(distinct) +
                 " distinct values; using " + std::to_string(distinct));
        }
        k = distinct;
    }
    std::vector<int> labels(x.size(), 0);
    if (k <= 1) {
        return labels;
    }
    const double lo = sorted.front(), hi = sorted.back();
    const auto n = sorted.size();
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (strategy == BinStrategy::equal_width) {
            const double width = (hi - lo) / k;
            int b = static_cast<int>(std::floor((x[i] - lo) / width));
            labels[i] = std::clamp(b, 0, k - 1);
        } else {
            // rank of the first occurrence, so ties share the lower bin
            const auto rank = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), x[i]) - sorted.begin());
            labels[i] = static_cast<int>(rank * static_cast<std::size_t>(k) / n);
        }
    }
    return labels;
}

FeatureTable assemble_feature_table(const std::vector<const DatasetTable*>& tables, const std::vector<FeatureRef>& spec,
                                    const DatasetTable* incidents, const geo::RegionSet& regions)
{
    if (spec.empty()) {
        fail("EmptyFeatureSpec", ApiCode::bad_request, "feature spec is empty");
    }
    std::map<std::string, DatasetTable> daily;
    for (const auto* t : tables) {
        daily.emplace(t->manifest.name, daily_average(*t));
    }
    using Key = std::pair<std::string, std::int32_t>;
    std::vector<std::map<Key, double>> columns;
    FeatureTable out;
    for (const auto& ref : spec) {
        auto it = daily.find(ref.dataset);
        if (it == daily.end()) {
            fail("MissingColumn", ApiCode::unprocessable, "dataset '" + ref.dataset + "' not available for features");
        }
        const auto c = it->second.column(ref.column);
        if (!it->second.manifest.columns[c].numeric()) {
            fail("TypeMismatch", ApiCode::unprocessable, "feature '" + ref.dataset + "." + ref.column + "' is not numeric");
        }
        std::map<Key, double> col;
        for (const auto& row : it->second.rows) {
            if (!std::isnan(row.values[c])) {
                col.emplace(Key{row.region_id, row.ts.date.days}, row.values[c]);
            }
        }
        columns.push_back(std::move(col));
        out.feature_names.push_back(ref.dataset + "." + ref.column);
    }

    std::optional<RiskLabels> labels;
    if (incidents) {
        labels.emplace(*incidents);
    }
    // inner join: iterate the smallest key set and probe the others
    auto smallest = std::min_element(columns.begin(), columns.end(),
                                     [](const auto& a, const auto& b) { return a.size() < b.size(); });
    for (const auto& [key, first] : *smallest) {
        if (!regions.contains(key.first)) {
            continue;
        }
        FeatureRow row;
        row.region_id = key.first;
        row.date = Date{key.second};
        row.day_of_week = row.date.day_of_week();
        bool complete = true;
        for (const auto& col : columns) {
            auto it = col.find(key);
            if (it == col.end()) {
                complete = false;
                break;
            }
            row.features.push_back(it->second);
        }
        if (!complete) {
            continue;
        }
        if (labels) {
            const auto rc = labels->lookup(row.region_id, row.date);
            row.label = rc.label;
            row.incident_count = rc.count;
        }
        out.rows.push_back(std::move(row));
    }
    if (out.rows.empty()) {
        fail("EmptyJoin", ApiCode::unprocessable, "no overlapping region-days across the feature datasets");
    }
    return out;
}

} // namespace ul::ingest
