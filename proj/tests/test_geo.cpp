#include "support.hpp"

#include <doctest.h>

using namespace ul;
using geo::Point;

namespace {

geo::GeoUnit square(std::string id, double x0, double y0, double size)
{
    geo::GeoUnit u;
    u.region_id = std::move(id);
    u.name = u.region_id;
    u.rings.push_back({{x0, y0}, {x0 + size, y0}, {x0 + size, y0 + size}, {x0, y0 + size}, {x0, y0}});
    return u;
}

} // namespace

TEST_CASE("point in polygon with boundary inclusive")
{
    const auto u = square("A", 0, 0, 2);
    CHECK(geo::contains(u, {1, 1}));
    CHECK(geo::contains(u, {0, 1}));   // edge
    CHECK(geo::contains(u, {2, 2}));   // vertex
    CHECK_FALSE(geo::contains(u, {2.0001, 1}));
    CHECK_FALSE(geo::contains(u, {-1, -1}));
}

TEST_CASE("even-odd rings model holes")
{
    auto u = square("A", 0, 0, 4);
    u.rings.push_back(square("h", 1, 1, 2).rings.front());
    CHECK(geo::contains(u, {0.5, 0.5}));
    CHECK_FALSE(geo::contains(u, {2, 2}));
}

TEST_CASE("locate breaks boundary ties by ascending region id")
{
    geo::RegionSet set({square("B", 1, 0, 1), square("A", 0, 0, 1)});
    CHECK(set.units().front().region_id == "A");
    auto hit = set.locate({1.0, 0.5});
    REQUIRE(hit);
    CHECK(set.units()[*hit].region_id == "A");
    hit = set.locate({1.5, 0.5});
    REQUIRE(hit);
    CHECK(set.units()[*hit].region_id == "B");
    CHECK_FALSE(set.locate({5, 5}));
}

TEST_CASE("bbox intersection uses polygons, not centroids")
{
    const auto set = test::square_grid(3, 3);
    auto ids = set.intersecting(geo::BBox{0.9, 0.9, 1.1, 1.1});
    CHECK(ids == std::vector<std::string>{"G0000", "G0001", "G0003", "G0004"});
    // a thin sliver touching only one cell, far from its centroid
    ids = set.intersecting(geo::BBox{2.95, 2.95, 3.5, 3.5});
    CHECK(ids == std::vector<std::string>{"G0008"});
    CHECK(set.intersecting(geo::BBox{10, 10, 11, 11}).empty());
}

TEST_CASE("bbox parsing")
{
    const auto b = geo::BBox::parse("151.1,-33.9,151.2,-33.8");
    CHECK(b.lon_min == 151.1);
    CHECK(b.lat_max == -33.8);
    CHECK(test::error_kind([] { geo::BBox::parse("1,2,3"); }) == "BadBBox");
    CHECK(test::error_kind([] { geo::BBox::parse("3,2,1,4"); }) == "BadBBox");
    CHECK(test::error_kind([] { geo::BBox::parse("a,b,c,d"); }) == "BadBBox");
}

TEST_CASE("degenerate geometry is rejected")
{
    geo::GeoUnit open;
    open.region_id = "X";
    open.rings.push_back({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
    CHECK(test::error_kind([&] { geo::validate(open); }) == "DegenerateGeometry");
    geo::GeoUnit empty;
    empty.region_id = "Y";
    CHECK(test::error_kind([&] { geo::validate(empty); }) == "DegenerateGeometry");
}

TEST_CASE("duplicate ids and conflicting merges")
{
    CHECK(test::error_kind([] { geo::RegionSet({square("A", 0, 0, 1), square("A", 2, 0, 1)}); }) == "DuplicateRegion");
    geo::RegionSet a({square("A", 0, 0, 1)});
    geo::RegionSet same({square("A", 0, 0, 1), square("B", 1, 0, 1)});
    CHECK(a.merged(same).size() == 2);
    geo::RegionSet moved({square("A", 5, 5, 1)});
    CHECK(test::error_kind([&] { a.merged(moved); }) == "DuplicateRegion");
}

TEST_CASE("geojson round-trip")
{
    const auto set = test::square_grid(2, 3, 0.02);
    const auto text = geo::to_geojson(set);
    geo::RegionSet back(geo::parse_geojson(text));
    REQUIRE(back.size() == set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        CHECK(back.units()[i].region_id == set.units()[i].region_id);
        CHECK(back.units()[i].name == set.units()[i].name);
        REQUIRE(back.units()[i].rings.size() == set.units()[i].rings.size());
        for (std::size_t k = 0; k < set.units()[i].rings[0].size(); ++k) {
            CHECK(back.units()[i].rings[0][k].lon == set.units()[i].rings[0][k].lon);
            CHECK(back.units()[i].rings[0][k].lat == set.units()[i].rings[0][k].lat);
        }
    }
    CHECK(geo::to_geojson(back) == text);
}

TEST_CASE("geojson without region_id is rejected")
{
    const std::string text = R"({"type":"FeatureCollection","features":[{"type":"Feature","properties":{"name":"x"},
        "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,0]]]}}]})";
    CHECK(test::error_kind([&] { geo::parse_geojson(text); }) != "<none>");
}

TEST_CASE("segment touching")
{
    CHECK(geo::segments_touch({0, 0}, {1, 0}, {1, 0}, {1, 1}));     // shared endpoint
    CHECK(geo::segments_touch({0, 0}, {2, 0}, {1, 0}, {3, 0}));     // collinear overlap
    CHECK(geo::segments_touch({0, 0}, {2, 2}, {0, 2}, {2, 0}));     // crossing
    CHECK_FALSE(geo::segments_touch({0, 0}, {1, 0}, {0, 1}, {1, 1}));
}

TEST_CASE("centroid of a square")
{
    const auto c = square("A", 2, 4, 2).centroid();
    CHECK(c.lon == doctest::Approx(3.0));
    CHECK(c.lat == doctest::Approx(5.0));
}
