#include "support.hpp"

#include "urbanlens/ingest.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

using namespace ul;
using namespace ul::ingest;

namespace {

DatasetManifest point_manifest()
{
    return DatasetManifest::from_json(nlohmann::json::parse(R"({
        "name": "air", "category": "air_quality", "granularity": "hourly", "geometry": "point",
        "columns": [{"name": "timestamp", "type": "timestamp"}, {"name": "lat", "type": "lat"},
                    {"name": "lon", "type": "lon"}, {"name": "no2", "type": "real"},
                    {"name": "cars", "type": "count"}]})"));
}

DatasetManifest boundary_manifest(const std::string& name, const std::string& column, Granularity g = Granularity::daily)
{
    DatasetManifest m;
    m.name = name;
    m.category = name;
    m.granularity = g;
    m.geometry = GeometryKind::boundary;
    m.columns = {{"timestamp", SemanticType::timestamp, Aggregation::mean},
                 {"region_id", SemanticType::region_id, Aggregation::mean},
                 {column, SemanticType::real, Aggregation::mean}};
    return m;
}

} // namespace

TEST_CASE("manifest invariants")
{
    auto m = point_manifest();
    CHECK(m.columns[4].aggregation == Aggregation::sum);
    CHECK(m.columns[3].aggregation == Aggregation::mean);
    CHECK(DatasetManifest::from_json(m.to_json()).to_json() == m.to_json());

    auto no_ts = m;
    no_ts.columns.erase(no_ts.columns.begin());
    CHECK(test::error_kind([&] { no_ts.validate(); }) == "InvalidManifest");
    auto no_lat = m;
    no_lat.columns.erase(no_lat.columns.begin() + 1);
    CHECK(test::error_kind([&] { no_lat.validate(); }) == "InvalidManifest");
    auto dup = m;
    dup.columns.push_back(dup.columns[3]);
    CHECK(test::error_kind([&] { dup.validate(); }) == "InvalidManifest");
    auto bad_key = m;
    bad_key.dedupe_key = "nope";
    CHECK(test::error_kind([&] { bad_key.validate(); }) == "InvalidManifest");
    CHECK(test::error_kind([] { DatasetManifest::from_json(nlohmann::json::parse(R"({"name":"x"})")); }) ==
          "InvalidManifest");
}

TEST_CASE("point rows map to regions and bad rows are counted")
{
    const auto regions = test::square_grid(1, 2);
    const std::string csv = "timestamp,lat,lon,no2,cars\n"
                            "2022-01-01 10:00,0.5,0.5,10,3\n"
                            "2022-01-01 11:00,0.5,1.5,20,4\n"
                            "2022-01-01 12:00,0.5,1.0,30,5\n" // shared edge: lower id wins
                            "2022-01-01 13:00,9,9,40,1\n"     // outside every region
                            "not-a-date,0.5,0.5,1,1\n"
                            "2022-01-01 14:00,0.5,0.5,abc,1\n"
                            "2022-01-01 15:00,0.5,0.5,,2.5\n" // fractional count
                            "2022-01-01 16:00,0.5,0.5,,2\n";  // empty reading is kept as missing
    const auto t = parse_table(point_manifest(), csv, regions);
    CHECK(t.provenance.rows_read == 8);
    CHECK(t.provenance.rows_kept == 4);
    CHECK(t.provenance.dropped_unresolved == 1);
    CHECK(t.provenance.dropped_type_mismatch == 3);
    REQUIRE(t.rows.size() == 4);
    CHECK(t.rows[0].region_id == "G0000");
    CHECK(t.rows[1].region_id == "G0001");
    CHECK(t.rows[2].region_id == "G0000");
    CHECK(std::isnan(t.rows[3].values[3]));
    CHECK(t.provenance.issues.size() == 4);
}

TEST_CASE("csv missing a manifest column is a schema error")
{
    const auto regions = test::square_grid(1, 1);
    CHECK(test::error_kind([&] { parse_table(point_manifest(), "timestamp,lat,lon,no2\n", regions); }) ==
          "MissingColumn");
    CHECK(test::error_kind([&] { parse_table(point_manifest(), "", regions); }) == "MissingColumn");
}

TEST_CASE("boundary rows need a registered region")
{
    const auto regions = test::square_grid(1, 2);
    const auto t = parse_table(boundary_manifest("e", "co2", Granularity::annual),
                               "timestamp,region_id,co2\n2018,G0000,5\n2018,ZZZ,6\n2019,G0001,7\n", regions);
    CHECK(t.rows.size() == 2);
    CHECK(t.provenance.dropped_unresolved == 1);
}

TEST_CASE("normalized form round-trips")
{
    const auto regions = test::square_grid(1, 2);
    auto m = point_manifest();
    m.columns.push_back({"kind", SemanticType::categorical, Aggregation::mean});
    const std::string csv = "timestamp,lat,lon,no2,cars,kind\n"
                            "2022-01-01 10:00:05,0.5,0.5,10.125,3,\"a,b\"\n"
                            "2022-01-02 11:00,0.5,1.5,,4,c\n";
    const auto t = parse_table(m, csv, regions);
    const auto text = write_normalized(t);
    const auto back = read_normalized(m, text, t.provenance);
    REQUIRE(back.rows.size() == t.rows.size());
    CHECK(write_normalized(back) == text);
    CHECK(back.rows[0].ts.seconds == 10 * 3600 + 5);
    CHECK(back.levels[5][static_cast<std::size_t>(back.rows[0].values[5])] == "a,b");
}

TEST_CASE("dedupe keeps the first report and is idempotent")
{
    const auto regions = test::square_grid(1, 1);
    DatasetManifest m;
    m.name = "inc";
    m.category = "incidents";
    m.granularity = Granularity::hourly;
    m.geometry = GeometryKind::point;
    m.columns = {{"timestamp", SemanticType::timestamp, Aggregation::mean},
                 {"lat", SemanticType::lat, Aggregation::mean},
                 {"lon", SemanticType::lon, Aggregation::mean},
                 {"id", SemanticType::categorical, Aggregation::mean}};
    m.dedupe_key = "id";
    Rng rng = derive_rng(5, 5);
    std::string csv = "timestamp,lat,lon,id\n";
    std::set<std::string> distinct;
    for (int i = 0; i < 300; ++i) {
        const std::string id = "R" + std::to_string(uniform_index(rng, 120));
        distinct.insert(id);
        csv += "2022-01-01 10:00,0.5,0.5," + id + "\n";
    }
    const auto t = parse_table(m, csv, regions);
    const auto once = dedupe_incidents(t, "id");
    const auto twice = dedupe_incidents(once, "id");
    CHECK(once.rows.size() == distinct.size());
    CHECK(once.provenance.dedup_removed == 300 - distinct.size());
    CHECK(write_normalized(twice) == write_normalized(once));
}

TEST_CASE("daily_average yields one row per region and date")
{
    const auto regions = test::square_grid(2, 2);
    Rng rng = derive_rng(8, 1);
    std::string csv = "timestamp,lat,lon,no2,cars\n";
    std::map<std::pair<std::string, int>, std::vector<double>> oracle;
    std::map<std::pair<std::string, int>, double> cars;
    for (int i = 0; i < 500; ++i) {
        const int day = static_cast<int>(uniform_index(rng, 6)) + 1;
        const double lat = 0.1 + 1.8 * uniform01(rng), lon = 0.1 + 1.8 * uniform01(rng);
        const double v = std::round(uniform01(rng) * 1000) / 10;
        const int c = static_cast<int>(uniform_index(rng, 5));
        char line[128];
        std::snprintf(line, sizeof line, "2022-03-%02d %02zu:00,%.4f,%.4f,%.1f,%d\n", day, uniform_index(rng, 24), lat,
                      lon, v, c);
        csv += line;
        const std::string id = std::string("G000") + std::to_string((lat > 1 ? 2 : 0) + (lon > 1 ? 1 : 0));
        oracle[{id, day}].push_back(v);
        cars[{id, day}] += c;
    }
    const auto t = parse_table(point_manifest(), csv, regions);
    const auto d = daily_average(t);
    CHECK(d.rows.size() == oracle.size());
    for (const auto& row : d.rows) {
        const int day = static_cast<int>(row.ts.date.days - Date::from_ymd(2022, 3, 1).days) + 1;
        const auto& vals = oracle.at({row.region_id, day});
        double mean = 0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        CHECK(row.values[d.column("no2")] == doctest::Approx(mean).epsilon(1e-12));
        CHECK(row.values[d.column("cars")] == cars.at({row.region_id, day}));
    }
}

TEST_CASE("align_granularity coarsens the finer series and shares keys")
{
    Series daily;
    daily.granularity = Granularity::daily;
    for (int d = 0; d < 800; d += 3) {
        daily.values[{"", Date::from_ymd(2020, 1, 1).days + d}] = d;
    }
    Series annual;
    annual.granularity = Granularity::annual;
    annual.values[{"", 2020}] = 1;
    annual.values[{"", 2021}] = 2;
    annual.values[{"", 2024}] = 3;
    const auto [a, b] = align_granularity(daily, annual);
    CHECK(a.granularity == Granularity::annual);
    std::vector<SeriesKey> ka, kb;
    for (auto& [k, v] : a.values) ka.push_back(k);
    for (auto& [k, v] : b.values) kb.push_back(k);
    CHECK(ka == kb);
    CHECK(ka.size() == 2);
    CHECK(b.values == Series{Granularity::annual, Aggregation::mean, false, {{{"", 2020}, 1}, {{"", 2021}, 2}}}.values);

    Series far;
    far.granularity = Granularity::annual;
    far.values[{"", 1990}] = 1;
    CHECK(test::error_kind([&] { align_granularity(daily, far); }) == "IncompatibleGranularity");
}

TEST_CASE("equal-width bins are monotone in x")
{
    Rng rng = derive_rng(2, 2);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(5 + uniform_index(rng, 50));
        for (auto& v : x) v = normal(rng) * 10;
        for (auto strategy : {BinStrategy::equal_width, BinStrategy::quantile}) {
            const int k = 2 + static_cast<int>(uniform_index(rng, 6));
            const auto labels = bin_values(x, k, strategy);
            for (std::size_t i = 0; i < x.size(); ++i) {
                CHECK(labels[i] >= 0);
                CHECK(labels[i] < k);
                for (std::size_t j = 0; j < x.size(); ++j) {
                    if (x[i] <= x[j]) CHECK(labels[i] <= labels[j]);
                }
            }
        }
    }
    CHECK(test::error_kind([] { bin_values({1, 1, 1}, 3, BinStrategy::quantile); }) == "ConstantSeries");
}

TEST_CASE("feature table is the inner join of region-days")
{
    const auto regions = test::square_grid(1, 3);
    Rng rng = derive_rng(4, 4);
    std::vector<DatasetTable> tables;
    std::vector<std::set<std::pair<std::string, int>>> keys(3);
    for (int t = 0; t < 3; ++t) {
        std::string csv = "timestamp,region_id,v" + std::to_string(t) + "\n";
        for (int r = 0; r < 3; ++r) {
            for (int d = 1; d <= 20; ++d) {
                if (uniform01(rng) < 0.3) continue;
                const std::string id = "G000" + std::to_string(r);
                char date[16];
                std::snprintf(date, sizeof date, "2022-05-%02d", d);
                csv += std::string(date) + "," + id + "," + std::to_string(r * 100 + d) + "\n";
                keys[static_cast<std::size_t>(t)].insert({id, d});
            }
        }
        tables.push_back(parse_table(boundary_manifest("t" + std::to_string(t), "v" + std::to_string(t)), csv, regions));
    }
    std::set<std::pair<std::string, int>> common;
    for (const auto& k : keys[0]) {
        if (keys[1].count(k) && keys[2].count(k)) common.insert(k);
    }
    const auto ft = assemble_feature_table({&tables[0], &tables[1], &tables[2]},
                                           {{"t0", "v0"}, {"t1", "v1"}, {"t2", "v2"}}, nullptr, regions);
    CHECK(ft.rows.size() == common.size());
    CHECK(ft.feature_names == std::vector<std::string>{"t0.v0", "t1.v1", "t2.v2"});
    for (const auto& row : ft.rows) {
        REQUIRE(row.features.size() == 3);
        for (double v : row.features) CHECK(std::isfinite(v));
        CHECK(row.day_of_week == row.date.day_of_week());
    }
    CHECK(test::error_kind([&] { assemble_feature_table({&tables[0]}, {{"t0", "nope"}}, nullptr, regions); }) ==
          "MissingColumn");
    CHECK(test::error_kind([&] { assemble_feature_table({&tables[0]}, {}, nullptr, regions); }) == "EmptyFeatureSpec");
}

TEST_CASE("two tables sharing five region-days give five rows")
{
    const auto regions = test::square_grid(1, 1);
    std::string a = "timestamp,region_id,x\n", b = "timestamp,region_id,y\n";
    for (int d = 1; d <= 5; ++d) {
        a += "2022-01-0" + std::to_string(d) + ",G0000," + std::to_string(d) + "\n";
        b += "2022-01-0" + std::to_string(d) + ",G0000," + std::to_string(2 * d) + "\n";
    }
    auto ta = parse_table(boundary_manifest("a", "x"), a, regions);
    auto tb = parse_table(boundary_manifest("b", "y"), b, regions);
    CHECK(assemble_feature_table({&ta, &tb}, {{"a", "x"}, {"b", "y"}}, nullptr, regions).rows.size() == 5);
}

TEST_CASE("risk labels count incidents per region-day")
{
    const auto regions = test::square_grid(1, 2);
    DatasetManifest m;
    m.name = "inc";
    m.category = "incidents";
    m.granularity = Granularity::hourly;
    m.geometry = GeometryKind::point;
    m.columns = {{"timestamp", SemanticType::timestamp, Aggregation::mean},
                 {"lat", SemanticType::lat, Aggregation::mean},
                 {"lon", SemanticType::lon, Aggregation::mean}};
    const auto t = parse_table(m,
                               "timestamp,lat,lon\n2022-01-01 01:00,0.5,0.5\n2022-01-01 23:00,0.5,0.5\n"
                               "2022-01-02 01:00,0.5,1.5\n",
                               regions);
    RiskLabels labels(t);
    CHECK(labels.lookup("G0000", Date::from_ymd(2022, 1, 1)).count == 2);
    CHECK(labels.lookup("G0000", Date::from_ymd(2022, 1, 1)).label == 1);
    CHECK(labels.lookup("G0000", Date::from_ymd(2022, 1, 2)).label == 0);
    CHECK(labels.lookup("G0001", Date::from_ymd(2022, 1, 2)).label == 1);
    CHECK(labels.days_with_incidents() == 2);
}
