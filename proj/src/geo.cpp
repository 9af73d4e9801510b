#include "urbanlens/geo.hpp"

#include "urbanlens/error.hpp"
#include "urbanlens/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace ul::geo {

using nlohmann::json;

BBox BBox::parse(std::string_view text)
{
    auto parts = split(text, ',');
    if (parts.size() != 4) {
        fail("BadBBox", ApiCode::bad_request, "bbox must be lonmin,latmin,lonmax,latmax");
    }
    double v[4];
    for (int i = 0; i < 4; ++i) {
        auto d = parse_double(parts[i]);
        if (!d) {
            fail("BadBBox", ApiCode::bad_request, "bbox component '" + parts[i] + "' is not a number");
        }
        v[i] = *d;
    }
    if (v[0] > v[2] || v[1] > v[3]) {
        fail("BadBBox", ApiCode::bad_request, "bbox minimum exceeds maximum");
    }
    return BBox{v[0], v[1], v[2], v[3]};
}

BBox GeoUnit::bounds() const
{
    BBox b{INFINITY, INFINITY, -INFINITY, -INFINITY};
    for (const auto& ring : rings) {
        for (auto p : ring) {
            b.lon_min = std::min(b.lon_min, p.lon);
            b.lat_min = std::min(b.lat_min, p.lat);
            b.lon_max = std::max(b.lon_max, p.lon);
            b.lat_max = std::max(b.lat_max, p.lat);
        }
    }
    return b;
}

Point GeoUnit::centroid() const
{
    // area-weighted centroid over all rings (signed, so holes subtract)
    double a = 0.0, cx = 0.0, cy = 0.0;
    for (const auto& ring : rings) {
        for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
            const double cross = ring[i].lon * ring[i + 1].lat - ring[i + 1].lon * ring[i].lat;
            a += cross;
            cx += (ring[i].lon + ring[i + 1].lon) * cross;
            cy += (ring[i].lat + ring[i + 1].lat) * cross;
        }
    }
    if (std::abs(a) < kEps) {
        const auto b = bounds();
        return {(b.lon_min + b.lon_max) / 2, (b.lat_min + b.lat_max) / 2};
    }
    return {cx / (3.0 * a), cy / (3.0 * a)};
}

namespace {

double orient(Point a, Point b, Point c)
{
    return (b.lon - a.lon) * (c.lat - a.lat) - (b.lat - a.lat) * (c.lon - a.lon);
}

int sign(double v, double eps)
{
    return v > eps ? 1 : (v < -eps ? -1 : 0);
}

} // namespace

bool on_segment(Point p, Point a, Point b, double eps)
{
    const double len = std::hypot(b.lon - a.lon, b.lat - a.lat);
    if (std::abs(orient(a, b, p)) > eps * std::max(1.0, len)) {
        return false;
    }
    return p.lon >= std::min(a.lon, b.lon) - eps && p.lon <= std::max(a.lon, b.lon) + eps &&
           p.lat >= std::min(a.lat, b.lat) - eps && p.lat <= std::max(a.lat, b.lat) + eps;
}

bool segments_touch(Point a, Point b, Point c, Point d, double eps)
{
    const int o1 = sign(orient(a, b, c), eps);
    const int o2 = sign(orient(a, b, d), eps);
    const int o3 = sign(orient(c, d, a), eps);
    const int o4 = sign(orient(c, d, b), eps);
    if (o1 * o2 < 0 && o3 * o4 < 0) {
        return true;
    }
    return on_segment(c, a, b, eps) || on_segment(d, a, b, eps) || on_segment(a, c, d, eps) ||
           on_segment(b, c, d, eps);
}

bool point_on_boundary(const GeoUnit& unit, Point p, double eps)
{
    for (const auto& ring : unit.rings) {
        for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
            if (on_segment(p, ring[i], ring[i + 1], eps)) {
                return true;
            }
        }
    }
    return false;
}

bool contains(const GeoUnit& unit, Point p)
{
    if (point_on_boundary(unit, p)) {
        return true;
    }
    bool inside = false;
    for (const auto& ring : unit.rings) {
        for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
            const Point a = ring[i], b = ring[j];
            if ((a.lat > p.lat) != (b.lat > p.lat)) {
                const double x = (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon;
                if (p.lon < x) {
                    inside = !inside;
                }
            }
        }
    }
    return inside;
}

bool intersects(const GeoUnit& unit, const BBox& box)
{
    if (!unit.bounds().overlaps(box)) {
        return false;
    }
    for (const auto& ring : unit.rings) {
        for (auto p : ring) {
            if (box.contains(p)) {
                return true;
            }
        }
    }
    const Point corners[4] = {{box.lon_min, box.lat_min}, {box.lon_max, box.lat_min},
                              {box.lon_max, box.lat_max}, {box.lon_min, box.lat_max}};
    for (auto c : corners) {
        if (contains(unit, c)) {
            return true;
        }
    }
    for (const auto& ring : unit.rings) {
        for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
            for (int k = 0; k < 4; ++k) {
                if (segments_touch(ring[i], ring[i + 1], corners[k], corners[(k + 1) % 4])) {
                    return true;
                }
            }
        }
    }
    return false;
}

void validate(const GeoUnit& unit)
{
    if (unit.region_id.empty()) {
        fail("DegenerateGeometry", ApiCode::unprocessable, "region without region_id");
    }
    if (unit.rings.empty()) {
        fail("DegenerateGeometry", ApiCode::unprocessable, "region '" + unit.region_id + "' has no rings");
    }
    for (const auto& ring : unit.rings) {
        if (ring.size() < 4) {
            fail("DegenerateGeometry", ApiCode::unprocessable,
                 "region '" + unit.region_id + "' has a ring with fewer than 4 points");
        }
        if (ring.front().lon != ring.back().lon || ring.front().lat != ring.back().lat) {
            fail("DegenerateGeometry", ApiCode::unprocessable, "region '" + unit.region_id + "' has an open ring");
        }
    }
}

RegionSet::RegionSet(std::vector<GeoUnit> units) : units_(std::move(units))
{
    std::sort(units_.begin(), units_.end(), [](const GeoUnit& a, const GeoUnit& b) { return a.region_id < b.region_id; });
    for (std::size_t i = 0; i < units_.size(); ++i) {
        validate(units_[i]);
        if (i > 0 && units_[i].region_id == units_[i - 1].region_id) {
            fail("DuplicateRegion", ApiCode::conflict, "duplicate region_id '" + units_[i].region_id + "'");
        }
        bounds_.push_back(units_[i].bounds());
    }
}

std::optional<std::size_t> RegionSet::index_of(std::string_view region_id) const
{
    auto it = std::lower_bound(units_.begin(), units_.end(), region_id,
                               [](const GeoUnit& u, std::string_view id) { return u.region_id < id; });
    if (it == units_.end() || it->region_id != region_id) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - units_.begin());
}

std::optional<std::size_t> RegionSet::locate(Point p) const
{
    for (std::size_t i = 0; i < units_.size(); ++i) {
        if (bounds_[i].contains(p) && geo::contains(units_[i], p)) {
            return i;
        }
    }
    return std::nullopt;
}

std::vector<std::string> RegionSet::intersecting(const BBox& box) const
{
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < units_.size(); ++i) {
        if (bounds_[i].overlaps(box) && geo::intersects(units_[i], box)) {
            ids.push_back(units_[i].region_id);
        }
    }
    return ids;
}

namespace {
bool same_geometry(const GeoUnit& a, const GeoUnit& b)
{
    if (a.rings.size() != b.rings.size()) {
        return false;
    }
    for (std::size_t r = 0; r < a.rings.size(); ++r) {
        if (a.rings[r].size() != b.rings[r].size()) {
            return false;
        }
        for (std::size_t i = 0; i < a.rings[r].size(); ++i) {
            if (a.rings[r][i].lon != b.rings[r][i].lon || a.rings[r][i].lat != b.rings[r][i].lat) {
                return false;
            }
        }
    }
    return true;
}
} // namespace

RegionSet RegionSet::merged(const RegionSet& other) const
{
    std::vector<GeoUnit> all = units_;
    for (const auto& u : other.units_) {
        if (auto idx = index_of(u.region_id)) {
            if (!same_geometry(units_[*idx], u)) {
                fail("DuplicateRegion", ApiCode::conflict,
                     "region '" + u.region_id + "' already registered with different geometry");
            }
            continue;
        }
        all.push_back(u);
    }
    return RegionSet(std::move(all));
}

namespace {

Ring parse_ring(const json& coords)
{
    Ring ring;
    for (const auto& c : coords) {
        if (!c.is_array() || c.size() < 2 || !c[0].is_number() || !c[1].is_number()) {
            fail("DegenerateGeometry", ApiCode::unprocessable, "coordinate must be [lon, lat]");
        }
        ring.push_back({c[0].get<double>(), c[1].get<double>()});
    }
    return ring;
}

} // namespace

std::vector<GeoUnit> parse_geojson(std::string_view text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        fail("MalformedGeoJson", ApiCode::bad_request, std::string("invalid GeoJSON: ") + e.what());
    }
    if (doc.value("type", "") != "FeatureCollection" || !doc.contains("features") || !doc["features"].is_array()) {
        fail("MalformedGeoJson", ApiCode::bad_request, "expected a FeatureCollection");
    }
    std::vector<GeoUnit> units;
    for (const auto& f : doc["features"]) {
        const auto& props = f.contains("properties") && f["properties"].is_object() ? f["properties"] : json::object();
        GeoUnit u;
        if (!props.contains("region_id")) {
            fail("MalformedGeoJson", ApiCode::unprocessable, "feature without region_id property");
        }
        u.region_id = props["region_id"].is_string() ? props["region_id"].get<std::string>() : props["region_id"].dump();
        u.name = props.value("name", u.region_id);
        const auto& geom = f.value("geometry", json::object());
        const std::string type = geom.value("type", "");
        const auto& coords = geom.value("coordinates", json::array());
        if (type == "Polygon") {
            for (const auto& ring : coords) {
                u.rings.push_back(parse_ring(ring));
            }
        } else if (type == "MultiPolygon") {
            for (const auto& poly : coords) {
                for (const auto& ring : poly) {
                    u.rings.push_back(parse_ring(ring));
                }
            }
        } else {
            fail("MalformedGeoJson", ApiCode::unprocessable,
                 "region '" + u.region_id + "' geometry must be Polygon or MultiPolygon");
        }
        validate(u);
        units.push_back(std::move(u));
    }
    return units;
}

std::string to_geojson(const RegionSet& regions)
{
    json features = json::array();
    for (const auto& u : regions.units()) {
        json polys = json::array();
        for (const auto& ring : u.rings) {
            json r = json::array();
            for (auto p : ring) {
                r.push_back({p.lon, p.lat});
            }
            polys.push_back(json::array({r}));
        }
        features.push_back({{"type", "Feature"},
                            {"properties", {{"region_id", u.region_id}, {"name", u.name}}},
                            {"geometry", {{"type", "MultiPolygon"}, {"coordinates", polys}}}});
    }
    return json{{"type", "FeatureCollection"}, {"features", features}}.dump();
}

} // namespace ul::geo
