#pragma once

#include "support.hpp"

#include "urbanlens/ingest.hpp"
#include "urbanlens/insight.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace ul::test {

// Daily single-region city with four datasets of two real columns each.
// a.x1 and b.y1 share a latent signal (cross-category); c.z1 and c.z2 share
// another (same category); every other column is independent noise.
struct InsightCity {
    geo::RegionSet regions;
    std::vector<ingest::DatasetTable> tables;

    std::vector<const ingest::DatasetTable*> pointers() const
    {
        std::vector<const ingest::DatasetTable*> out;
        for (const auto& t : tables) out.push_back(&t);
        return out;
    }
};

inline ingest::DatasetManifest daily_boundary_manifest(const std::string& name, const std::string& category,
                                                       const std::vector<std::string>& columns)
{
    ingest::DatasetManifest m;
    m.name = name;
    m.category = category;
    m.granularity = ingest::Granularity::daily;
    m.geometry = ingest::GeometryKind::boundary;
    m.columns = {{"timestamp", ingest::SemanticType::timestamp, ingest::Aggregation::mean},
                 {"region_id", ingest::SemanticType::region_id, ingest::Aggregation::mean}};
    for (const auto& c : columns) m.columns.push_back({c, ingest::SemanticType::real, ingest::Aggregation::mean});
    return m;
}

inline InsightCity insight_city(std::uint64_t seed, std::size_t days = 120)
{
    InsightCity city;
    city.regions = square_grid(1, 1);
    Rng rng = derive_rng(seed, 0x1c17);
    struct Spec {
        std::string name, category, c1, c2;
    };
    const std::vector<Spec> specs = {
        {"a", "weather", "x1", "x2"}, {"b", "traffic", "y1", "y2"}, {"c", "crime", "z1", "z2"}, {"d", "air", "w1", "w2"}};
    std::vector<std::string> csv(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) {
        csv[i] = "timestamp,region_id," + specs[i].c1 + "," + specs[i].c2 + "\n";
    }
    const Date start = Date::from_ymd(2021, 1, 1);
    char line[160];
    for (std::size_t d = 0; d < days; ++d) {
        const std::string date = Date{start.days + static_cast<std::int32_t>(d)}.iso();
        const double s = normal(rng), u = normal(rng);
        const double v[4][2] = {{s + 0.4 * normal(rng), normal(rng)},
                                {s + 0.4 * normal(rng), normal(rng)},
                                {u + 0.2 * normal(rng), u + 0.2 * normal(rng)},
                                {normal(rng), normal(rng)}};
        for (std::size_t i = 0; i < specs.size(); ++i) {
            std::snprintf(line, sizeof line, "%s,G0000,%.17g,%.17g\n", date.c_str(), v[i][0], v[i][1]);
            csv[i] += line;
        }
    }
    for (std::size_t i = 0; i < specs.size(); ++i) {
        city.tables.push_back(ingest::parse_table(
            daily_boundary_manifest(specs[i].name, specs[i].category, {specs[i].c1, specs[i].c2}), csv[i],
            city.regions));
    }
    return city;
}

// Two-pass Pearson in long double, independent of the library routine.
inline double oracle_rho(const std::vector<double>& x, const std::vector<double>& y)
{
    long double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<long double>(x.size());
    my /= static_cast<long double>(y.size());
    long double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

// Monte-Carlo two-sided permutation p-value.
inline double permutation_pvalue(const std::vector<double>& x, std::vector<double> y, std::size_t rounds,
                                 std::uint64_t seed)
{
    const double observed = std::abs(oracle_rho(x, y));
    Rng rng = derive_rng(seed, 0x9e);
    std::size_t extreme = 0;
    for (std::size_t r = 0; r < rounds; ++r) {
        shuffle(y, rng);
        extreme += std::abs(oracle_rho(x, y)) >= observed - 1e-12;
    }
    return static_cast<double>(extreme) / static_cast<double>(rounds);
}

// Exhaustive recount of every column's impact from raw per-day values.
// Column ids follow "dataset.column"; values come straight from the rows.
inline std::map<std::string, double> oracle_impacts(const InsightCity& city, double threshold = 0.5)
{
    std::vector<std::string> ids;
    std::vector<std::vector<double>> cols;
    for (const auto& t : city.tables) {
        for (std::size_t c = 2; c < t.manifest.columns.size(); ++c) {
            ids.push_back(t.manifest.name + "." + t.manifest.columns[c].name);
            std::vector<double> v;
            for (const auto& row : t.rows) v.push_back(row.values[c]);
            cols.push_back(std::move(v));
        }
    }
    std::map<std::string, double> out;
    for (std::size_t i = 0; i < cols.size(); ++i) {
        std::size_t strong = 0;
        for (std::size_t j = 0; j < cols.size(); ++j) {
            if (i != j && std::abs(oracle_rho(cols[i], cols[j])) > threshold) ++strong;
        }
        out[ids[i]] = static_cast<double>(strong) / static_cast<double>(cols.size());
    }
    return out;
}

} // namespace ul::test
