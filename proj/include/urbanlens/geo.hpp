#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ul::geo {

struct Point {
    double lon = 0.0;
    double lat = 0.0;
};

using Ring = std::vector<Point>;

struct BBox {
    double lon_min = 0.0;
    double lat_min = 0.0;
    double lon_max = 0.0;
    double lat_max = 0.0;

    bool contains(Point p) const
    {
        return p.lon >= lon_min && p.lon <= lon_max && p.lat >= lat_min && p.lat <= lat_max;
    }
    bool overlaps(const BBox& o) const
    {
        return lon_min <= o.lon_max && o.lon_min <= lon_max && lat_min <= o.lat_max && o.lat_min <= lat_max;
    }
    // "lonmin,latmin,lonmax,latmax"; throws BadBBox on malformed or inverted input.
    static BBox parse(std::string_view text);
};

// A region polygon. Rings are closed simple polygons; multiple rings are
// combined with the even-odd rule, which covers both multi-part regions and holes.
struct GeoUnit {
    std::string region_id;
    std::string name;
    std::vector<Ring> rings;

    BBox bounds() const;
    Point centroid() const;
};

// Regions sorted by ascending region_id; ids are unique.
class RegionSet {
public:
    RegionSet() = default;
    explicit RegionSet(std::vector<GeoUnit> units);

    const std::vector<GeoUnit>& units() const { return units_; }
    std::size_t size() const { return units_.size(); }
    bool empty() const { return units_.empty(); }

    std::optional<std::size_t> index_of(std::string_view region_id) const;
    bool contains(std::string_view region_id) const { return index_of(region_id).has_value(); }

    // First region (ascending id) containing the point, boundary inclusive.
    std::optional<std::size_t> locate(Point p) const;

    // Ids of regions whose polygon intersects the rectangle.
    std::vector<std::string> intersecting(const BBox& box) const;

    // Union of two sets; throws DuplicateRegion if an id appears in both with different geometry.
    RegionSet merged(const RegionSet& other) const;

private:
    std::vector<GeoUnit> units_;
    std::vector<BBox> bounds_;
};

constexpr double kEps = 1e-12;

bool on_segment(Point p, Point a, Point b, double eps = kEps);
bool segments_touch(Point a, Point b, Point c, Point d, double eps = kEps);
bool point_on_boundary(const GeoUnit& unit, Point p, double eps = kEps);
// Ray-casting even-odd test; boundary points count as inside.
bool contains(const GeoUnit& unit, Point p);
bool intersects(const GeoUnit& unit, const BBox& box);

// Throws DegenerateGeometry for open rings, rings with < 4 points or empty regions.
void validate(const GeoUnit& unit);

std::vector<GeoUnit> parse_geojson(std::string_view text);
std::string to_geojson(const RegionSet& regions);

} // namespace ul::geo
