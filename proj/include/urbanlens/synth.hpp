#pragma once

#include "urbanlens/geo.hpp"
#include "urbanlens/ingest.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ul::synth {

struct CityOptions {
    std::size_t regions = 33;
    std::size_t days = 365;
    std::uint64_t seed = 7;
    Date start = Date::from_ymd(2022, 6, 21);
};

struct DatasetFile {
    ingest::DatasetManifest manifest;
    std::string csv;
};

// A grid of square suburbs with weather (hourly points), air quality (daily
// points), traffic incidents (point events, duplicated reports), crimes and
// emissions (annual per region). A clustered urban intensity drives crimes and
// emissions; a daily traffic factor couples NO2 with crash counts; crashes also
// react nonlinearly to rain, wind, cold and the weekday.
struct City {
    std::string regions_geojson;
    std::vector<DatasetFile> datasets;
};

City generate_city(const CityOptions& options);

// Writes regions.geojson plus <name>.csv and <name>.manifest.json per dataset.
void write_city(const City& city, const std::string& directory);

// Grid of unit squares (rows x cols), ids "R001".. in row-major order.
geo::RegionSet grid_regions(std::size_t count, double cell = 0.02);

// Feature references for the default risk table.
std::vector<ingest::FeatureRef> default_risk_features();
inline constexpr const char* kIncidentsDataset = "incidents";

} // namespace ul::synth
