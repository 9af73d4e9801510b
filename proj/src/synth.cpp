#include "urbanlens/synth.hpp"

#include "urbanlens/error.hpp"
#include "urbanlens/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

namespace ul::synth {

using ingest::Aggregation;
using ingest::ColumnSpec;
using ingest::DatasetManifest;
using ingest::GeometryKind;
using ingest::Granularity;
using ingest::SemanticType;

namespace {

constexpr std::int64_t kLon0 = 151100000; // micro-degrees
constexpr std::int64_t kLat0 = -33950000;

std::size_t grid_cols(std::size_t count)
{
    return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(count))));
}

std::string region_id(std::size_t i)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "R%03zu", i + 1);
    return buf;
}

std::string fmt(const char* spec, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::size_t poisson(Rng& rng, double lambda)
{
    const double limit = std::exp(-lambda);
    double prod = uniform01(rng);
    std::size_t k = 0;
    while (prod > limit) {
        prod *= uniform01(rng);
        ++k;
    }
    return k;
}

ColumnSpec col(std::string name, SemanticType type, Aggregation agg = Aggregation::mean)
{
    ColumnSpec c;
    c.name = std::move(name);
    c.type = type;
    c.aggregation = type == SemanticType::count ? Aggregation::sum : agg;
    return c;
}

DatasetManifest manifest(std::string name, std::string category, Granularity g, GeometryKind geom,
                         std::vector<ColumnSpec> columns)
{
    DatasetManifest m;
    m.name = name;
    m.category = std::move(category);
    m.granularity = g;
    m.geometry = geom;
    m.columns = std::move(columns);
    m.source_path = name + ".csv";
    return m;
}

std::string timestamp(Date d, int hour, int minute = 0, int second = 0)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, " %02d:%02d:%02d", hour, minute, second);
    return d.iso() + buf;
}

} // namespace

geo::RegionSet grid_regions(std::size_t count, double cell)
{
    if (count == 0) {
        fail("InvalidArgument", ApiCode::bad_request, "need at least one region");
    }
    const std::size_t cols = grid_cols(count);
    const auto step = static_cast<std::int64_t>(std::llround(cell * 1e6));
    std::vector<geo::GeoUnit> units;
    for (std::size_t i = 0; i < count; ++i) {
        const auto c = static_cast<std::int64_t>(i % cols), r = static_cast<std::int64_t>(i / cols);
        const double x0 = static_cast<double>(kLon0 + c * step) / 1e6, x1 = static_cast<double>(kLon0 + (c + 1) * step) / 1e6;
        const double y0 = static_cast<double>(kLat0 + r * step) / 1e6, y1 = static_cast<double>(kLat0 + (r + 1) * step) / 1e6;
        geo::GeoUnit u;
        u.region_id = region_id(i);
        u.name = "Suburb " + std::to_string(i + 1);
        u.rings.push_back({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}});
        units.push_back(std::move(u));
    }
    return geo::RegionSet(std::move(units));
}

std::vector<ingest::FeatureRef> default_risk_features()
{
    return {{"weather", "temperature"}, {"weather", "humidity"}, {"weather", "rain"},    {"weather", "wind_speed"},
            {"air_quality", "no2"},     {"air_quality", "co"},    {"air_quality", "pm25"}, {"air_quality", "o3"}};
}

City generate_city(const CityOptions& opt)
{
    if (opt.regions < 2 || opt.days < 1) {
        fail("InvalidArgument", ApiCode::bad_request, "gen needs at least 2 regions and 1 day");
    }
    const double cell = 0.02;
    const auto regions = grid_regions(opt.regions, cell);
    const std::size_t cols = grid_cols(opt.regions);
    const std::size_t rows = (opt.regions + cols - 1) / cols;
    Rng rng = derive_rng(opt.seed, 0x63697479ULL);

    City city;
    city.regions_geojson = geo::to_geojson(regions);

    // urban intensity: one smooth bump in the north-west quarter
    const std::size_t R = opt.regions;
    std::vector<double> intensity(R);
    const double c0 = 0.25 * static_cast<double>(cols - 1), r0 = 0.25 * static_cast<double>(rows - 1);
    const double sigma = std::max(1.0, static_cast<double>(cols) / 2.5);
    for (std::size_t i = 0; i < R; ++i) {
        const double dc = static_cast<double>(i % cols) - c0, dr = static_cast<double>(i / cols) - r0;
        intensity[i] = std::exp(-(dc * dc + dr * dr) / (2.0 * sigma * sigma)) + 0.05 * normal(rng);
    }
    auto center = [&](std::size_t i) {
        const auto& ring = regions.units()[i].rings.front();
        return geo::Point{(ring[0].lon + ring[2].lon) / 2.0, (ring[0].lat + ring[2].lat) / 2.0};
    };

    struct Day {
        Date date;
        double temp, humidity, rain, wind, traffic;
    };
    std::vector<Day> days(opt.days);
    double z = 0.0;
    for (std::size_t t = 0; t < opt.days; ++t) {
        Day& d = days[t];
        d.date = Date{opt.start.days + static_cast<std::int32_t>(t)};
        const double season = std::cos(2.0 * std::numbers::pi * static_cast<double>(t) / 365.0);
        d.temp = 17.0 - 6.0 * season + 2.5 * normal(rng);
        d.humidity = std::clamp(68.0 - 1.2 * (d.temp - 17.0) + 8.0 * normal(rng), 20.0, 100.0);
        const double wet = 1.0 / (1.0 + std::exp(-(d.humidity - 74.0) / 5.0));
        d.rain = uniform01(rng) < wet ? 2.0 * std::exp(0.8 * normal(rng)) : 0.0;
        d.wind = 14.0 + 6.0 * std::abs(normal(rng));
        const int dow = d.date.day_of_week();
        z = 0.6 * z + 0.8 * normal(rng);
        d.traffic = z + (dow < 5 ? 0.4 : -0.9);
    }

    // weather: hourly readings from one station per region
    {
        DatasetFile f;
        f.manifest = manifest("weather", "weather", Granularity::hourly, GeometryKind::point,
                              {col("timestamp", SemanticType::timestamp), col("lat", SemanticType::lat),
                               col("lon", SemanticType::lon), col("temperature", SemanticType::real),
                               col("humidity", SemanticType::real), col("rain", SemanticType::real, Aggregation::sum),
                               col("wind_speed", SemanticType::real)});
        f.csv = "timestamp,lat,lon,temperature,humidity,rain,wind_speed\n";
        for (const auto& d : days) {
            for (int h = 0; h < 24; ++h) {
                const double diurnal = std::sin(2.0 * std::numbers::pi * (h - 9) / 24.0);
                for (std::size_t i = 0; i < R; ++i) {
                    const auto p = center(i);
                    const double temp = d.temp + 4.0 * diurnal + 0.6 * intensity[i] + 0.4 * normal(rng);
                    const double hum = std::clamp(d.humidity - 6.0 * diurnal + 2.0 * normal(rng), 5.0, 100.0);
                    const double rain = d.rain > 0.0 ? d.rain / 24.0 * (0.5 + uniform01(rng)) : 0.0;
                    const double wind = std::max(0.0, d.wind + 3.0 * diurnal + 1.5 * normal(rng));
                    f.csv += timestamp(d.date, h) + "," + fmt("%.6f", p.lat) + "," + fmt("%.6f", p.lon) + "," +
                             fmt("%.2f", temp) + "," + fmt("%.1f", hum) + "," + fmt("%.3f", rain) + "," +
                             fmt("%.2f", wind) + "\n";
                }
            }
        }
        city.datasets.push_back(std::move(f));
    }

    // air quality: daily site averages
    std::vector<std::vector<double>> no2(opt.days, std::vector<double>(R));
    {
        DatasetFile f;
        f.manifest = manifest("air_quality", "air_quality", Granularity::daily, GeometryKind::point,
                              {col("timestamp", SemanticType::timestamp), col("lat", SemanticType::lat),
                               col("lon", SemanticType::lon), col("no2", SemanticType::real),
                               col("co", SemanticType::real), col("pm25", SemanticType::real),
                               col("o3", SemanticType::real)});
        f.csv = "timestamp,lat,lon,no2,co,pm25,o3\n";
        for (std::size_t t = 0; t < opt.days; ++t) {
            const auto& d = days[t];
            for (std::size_t i = 0; i < R; ++i) {
                const auto p = center(i);
                no2[t][i] = std::max(0.5, 12.0 + 10.0 * intensity[i] + 5.0 * d.traffic + 1.5 * normal(rng));
                const double co = std::max(0.01, 0.3 + 0.2 * intensity[i] + 0.03 * d.traffic + 0.08 * normal(rng));
                const double pm = std::max(0.5, 9.0 + 3.0 * intensity[i] - 0.6 * d.rain + 2.0 * normal(rng));
                const double o3 = std::max(1.0, 24.0 + 0.7 * (d.temp - 17.0) + 2.5 * normal(rng));
                f.csv += d.date.iso() + "," + fmt("%.6f", p.lat) + "," + fmt("%.6f", p.lon) + "," +
                         fmt("%.3f", no2[t][i]) + "," + fmt("%.4f", co) + "," + fmt("%.3f", pm) + "," + fmt("%.3f", o3) +
                         "\n";
            }
        }
        city.datasets.push_back(std::move(f));
    }

    // incidents: crashes follow NO2 and the nonlinear weather/weekday triggers
    {
        DatasetFile f;
        f.manifest = manifest("incidents", "incidents", Granularity::hourly, GeometryKind::point,
                              {col("timestamp", SemanticType::timestamp), col("lat", SemanticType::lat),
                               col("lon", SemanticType::lon), col("report_id", SemanticType::categorical),
                               col("type", SemanticType::categorical)});
        f.manifest.dedupe_key = "report_id";
        f.csv = "timestamp,lat,lon,report_id,type\n";
        std::size_t next_id = 1;
        for (std::size_t t = 0; t < opt.days; ++t) {
            const auto& d = days[t];
            const int dow = d.date.day_of_week();
            double trigger = 1.0;
            if (d.rain > 2.0 && d.wind > 18.0) {
                trigger *= 10.0;
            }
            if (d.temp < 12.0) {
                trigger *= 4.0;
            }
            if (dow == 4) {
                trigger *= 3.0;
            }
            for (std::size_t i = 0; i < R; ++i) {
                const double crash = 0.042 * std::exp(0.10 * (no2[t][i] - 17.0)) * trigger;
                const std::pair<const char*, double> kinds[] = {{"crash", crash}, {"breakdown", 0.015}, {"hazard", 0.008}};
                const auto& ring = regions.units()[i].rings.front();
                for (const auto& [kind, lambda] : kinds) {
                    const auto n = poisson(rng, lambda);
                    for (std::size_t k = 0; k < n; ++k) {
                        const double lon = ring[0].lon + (0.1 + 0.8 * uniform01(rng)) * cell;
                        const double lat = ring[0].lat + (0.1 + 0.8 * uniform01(rng)) * cell;
                        const int hour = static_cast<int>(uniform_index(rng, 24));
                        const int minute = static_cast<int>(uniform_index(rng, 60));
                        char id[32];
                        std::snprintf(id, sizeof id, "INC%06zu", next_id++);
                        const std::string line = timestamp(d.date, hour, minute) + "," + fmt("%.6f", lat) + "," +
                                                 fmt("%.6f", lon) + "," + id + "," + kind + "\n";
                        f.csv += line;
                        if (uniform01(rng) < 0.05) {
                            f.csv += line; // the same report filed twice
                        }
                    }
                }
            }
        }
        city.datasets.push_back(std::move(f));
    }

    const int first_year = days.front().date.year(), last_year = days.back().date.year();

    // crimes: annual counts per region
    {
        DatasetFile f;
        f.manifest = manifest("crimes", "crime", Granularity::annual, GeometryKind::boundary,
                              {col("timestamp", SemanticType::timestamp), col("region_id", SemanticType::region_id),
                               col("total", SemanticType::count), col("theft", SemanticType::count),
                               col("assault", SemanticType::count)});
        f.csv = "timestamp,region_id,total,theft,assault\n";
        for (int y = first_year; y <= last_year; ++y) {
            for (std::size_t i = 0; i < R; ++i) {
                const double level = 60.0 + 240.0 * std::max(0.0, intensity[i]);
                const auto theft = poisson(rng, 0.55 * level);
                const auto assault = poisson(rng, 0.2 * level);
                const auto other = poisson(rng, 0.25 * level);
                f.csv += std::to_string(y) + "," + region_id(i) + "," + std::to_string(theft + assault + other) + "," +
                         std::to_string(theft) + "," + std::to_string(assault) + "\n";
            }
        }
        city.datasets.push_back(std::move(f));
    }

    // emissions: annual tonnes per sector
    {
        DatasetFile f;
        const char* sectors[] = {"transport", "electricity", "gas", "waste", "waste_water"};
        std::vector<ColumnSpec> cols_spec{col("timestamp", SemanticType::timestamp),
                                          col("region_id", SemanticType::region_id)};
        for (const char* s : sectors) {
            cols_spec.push_back(col(s, SemanticType::real, Aggregation::sum));
        }
        f.manifest = manifest("emissions", "emissions", Granularity::annual, GeometryKind::boundary, cols_spec);
        f.csv = "timestamp,region_id,transport,electricity,gas,waste,waste_water\n";
        for (int y = first_year; y <= last_year; ++y) {
            for (std::size_t i = 0; i < R; ++i) {
                const double u = std::max(0.0, intensity[i]);
                const double transport = 1500.0 * (0.2 + u) * (1.0 + 0.08 * normal(rng));
                const double electricity = 2200.0 * (0.5 + 0.5 * u) * (1.0 + 0.1 * normal(rng));
                const double gas = 700.0 * (0.6 + 0.2 * uniform01(rng));
                const double waste = 300.0 * (0.4 + 0.4 * u) * (1.0 + 0.15 * normal(rng));
                const double water = 120.0 * (0.8 + 0.4 * uniform01(rng));
                f.csv += std::to_string(y) + "," + region_id(i) + "," + fmt("%.2f", transport) + "," +
                         fmt("%.2f", electricity) + "," + fmt("%.2f", gas) + "," + fmt("%.2f", waste) + "," +
                         fmt("%.2f", water) + "\n";
            }
        }
        city.datasets.push_back(std::move(f));
    }
    return city;
}

void write_city(const City& city, const std::string& directory)
{
    std::filesystem::create_directories(directory);
    const std::filesystem::path dir(directory);
    write_file((dir / "regions.geojson").string(), city.regions_geojson);
    for (const auto& d : city.datasets) {
        write_file((dir / (d.manifest.name + ".csv")).string(), d.csv);
        write_file((dir / (d.manifest.name + ".manifest.json")).string(), d.manifest.to_json().dump(2) + "\n");
    }
}

} // namespace ul::synth
