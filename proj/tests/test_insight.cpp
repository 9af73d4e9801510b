#include "fixtures.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace ul;
using namespace ul::insight;

namespace {

MiningOptions whole_range()
{
    MiningOptions opt;
    opt.from = Date::from_ymd(2000, 1, 1);
    opt.to = Date::from_ymd(2100, 1, 1);
    return opt;
}

// Exact permutation p-value over all index orders, counted directly.
double brute_permutation_p(const std::vector<double>& x, const std::vector<double>& y)
{
    const double observed = std::abs(test::oracle_rho(x, y));
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::size_t extreme = 0, total = 0;
    do {
        std::vector<double> yp;
        for (auto i : idx) yp.push_back(y[i]);
        extreme += std::abs(test::oracle_rho(x, yp)) >= observed - 1e-12;
        ++total;
    } while (std::next_permutation(idx.begin(), idx.end()));
    return static_cast<double>(extreme) / static_cast<double>(total);
}

} // namespace

TEST_CASE("pearson on exact relationships")
{
    const std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    std::vector<double> y, z;
    for (double v : x) {
        y.push_back(3 * v - 2);
        z.push_back(-0.5 * v);
    }
    auto r = pearson(x, y);
    CHECK(r.rho == 1.0);
    CHECK(r.p_value == 0.0);
    CHECK(r.n == 12);
    CHECK(pearson(x, z).rho == -1.0);
    CHECK(pearson_t_pvalue(0.0, 30) == doctest::Approx(1.0));
}

TEST_CASE("pearson input errors")
{
    const std::vector<double> a{1, 2, 3}, b{1, 2}, c{4, 4, 4};
    CHECK(test::error_kind([&] { pearson(a, b); }) == "LengthMismatch");
    CHECK(test::error_kind([&] { pearson(b, b); }) == "TooFewSamples");
    CHECK(test::error_kind([&] { pearson(a, c); }) == "ConstantSeries");
}

TEST_CASE("small samples use the exact permutation distribution")
{
    const std::vector<double> x{1, 2, 3, 4, 5}, y{2, 4, 5, 4, 5};
    const auto r = pearson(x, y);
    CHECK(r.rho == doctest::Approx(test::oracle_rho(x, y)).epsilon(1e-12));
    CHECK(r.rho == doctest::Approx(0.7745966692).epsilon(1e-9));
    CHECK(r.p_value == doctest::Approx(brute_permutation_p(x, y)).epsilon(1e-12));
}

TEST_CASE("t p-values agree with a permutation oracle at n = 50")
{
    Rng rng = derive_rng(11, 3);
    for (double coupling : {0.0, 0.15, 0.3, 0.45}) {
        std::vector<double> x(50), y(50);
        for (std::size_t i = 0; i < 50; ++i) {
            x[i] = normal(rng);
            y[i] = coupling * x[i] + normal(rng);
        }
        const auto r = pearson(x, y);
        CHECK(r.rho == doctest::Approx(test::oracle_rho(x, y)).epsilon(1e-12));
        const double oracle = test::permutation_pvalue(x, y, 10000, 17);
        CHECK(std::abs(r.p_value - oracle) <= 0.02);
    }
}

TEST_CASE("impact counts strong partners over the column count")
{
    const double nan = std::nan("");
    const std::vector<std::vector<double>> m{{nan, 0.9, 0.2, 0.51},
                                             {0.9, nan, 0.5, nan},
                                             {0.2, 0.5, nan, 0.1},
                                             {0.51, nan, 0.1, nan}};
    CHECK(impact(0, m) == 0.5);
    CHECK(impact(1, m) == 0.25);
    CHECK(impact(2, m) == 0.0);
    CHECK(impact(3, m) == 0.25);
    CHECK(impact(0, m, 0.95) == 0.0);
    CHECK(impact(0, {}) == 0.0);
}

TEST_CASE("impact matches a brute-force recount on random matrices")
{
    Rng rng = derive_rng(4, 9);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + uniform_index(rng, 10);
        std::vector<std::vector<double>> m(n, std::vector<double>(n, std::nan("")));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                if (uniform01(rng) < 0.1) continue;
                m[i][j] = m[j][i] = uniform01(rng);
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t strong = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i && m[i][j] > 0.5) ++strong; // NaN compares false
            }
            CHECK(impact(i, m) == static_cast<double>(strong) / static_cast<double>(n));
        }
    }
}

TEST_CASE("score combines impacts, confidence and the same-category penalty")
{
    const ColumnRef a{"w", "temp", "weather", {}}, b{"i", "count", "incidents", {}}, c{"w", "rain", "weather", {}};
    CorrelationResult corr{0.8, 0.01, 40};
    const auto cross = score_pair(a, b, corr, 0.25, 0.125);
    CHECK(cross.score == doctest::Approx(0.375 * 0.99));
    CHECK_FALSE(cross.penalized);
    CHECK(score_pair(b, a, corr, 0.125, 0.25).score == cross.score);

    const auto same = score_pair(a, c, corr, 0.25, 0.125);
    CHECK(same.penalized);
    CHECK(same.score == doctest::Approx(cross.score * 0.5));
    CHECK(score_pair(a, c, corr, 0.25, 0.125, 1.0).score == cross.score);

    CHECK(test::error_kind([&] { score_pair(a, b, {0.5, 0.0, 40}, 0.1, 0.1); }) == "WeakCorrelation");
    CHECK(test::error_kind([&] { score_pair(a, b, {-0.5, 0.0, 40}, 0.1, 0.1); }) == "WeakCorrelation");
    CHECK(test::error_kind([&] { score_pair(a, b, corr, 0.1, 0.1, 0.0); }) == "InvalidPenalty");
    CHECK(score_pair(a, b, {-0.7, 0.0, 40}, 0.1, 0.1).score == doctest::Approx(0.2));
}

TEST_CASE("mining ranks the injected cross-category pair first")
{
    const auto city = test::insight_city(1);
    const auto result = mine_top_k(city.pointers(), city.regions, whole_range());
    CHECK(result.columns.size() == 8);
    CHECK(result.pairs_evaluated == 28);
    CHECK(result.strong_pairs == 2);
    REQUIRE(result.top.size() == 2);
    CHECK(result.top[0].insight.a.id() == "a.x1");
    CHECK(result.top[0].insight.b.id() == "b.y1");
    CHECK_FALSE(result.top[0].insight.penalized);
    CHECK(result.top[1].insight.penalized);

    const auto impacts = test::oracle_impacts(city);
    for (std::size_t i = 0; i < result.columns.size(); ++i) {
        CHECK(result.impacts[i] == impacts.at(result.columns[i].id()));
    }
    for (const auto& mi : result.top) {
        const auto& ins = mi.insight;
        CHECK(std::abs(ins.corr.rho) > 0.5);
        CHECK(ins.corr.rho == doctest::Approx(test::oracle_rho(mi.series_a, mi.series_b)).epsilon(1e-12));
        double expected = (impacts.at(ins.a.id()) + impacts.at(ins.b.id())) * (1.0 - ins.corr.p_value);
        if (ins.a.category == ins.b.category) expected *= 0.5;
        CHECK(ins.score == expected);
        CHECK(mi.keys.size() == 120);
    }
}

TEST_CASE("k truncates and every survivor is strong")
{
    const auto city = test::insight_city(2);
    auto opt = whole_range();
    opt.k = 1;
    const auto one = mine_top_k(city.pointers(), city.regions, opt);
    REQUIRE(one.top.size() == 1);
    CHECK(one.top[0].insight.a.id() == "a.x1");

    // with the same-category signal removed only one pair survives
    auto solo = city;
    solo.tables.erase(solo.tables.begin() + 2);
    opt.k = 5;
    const auto r = mine_top_k(solo.pointers(), solo.regions, opt);
    CHECK(r.strong_pairs == 1);
    CHECK(r.top.size() == 1);

    opt.k = 0;
    CHECK(test::error_kind([&] { mine_top_k(city.pointers(), city.regions, opt); }) == "InvalidK");
    opt = whole_range();
    std::swap(opt.from, opt.to);
    CHECK(test::error_kind([&] { mine_top_k(city.pointers(), city.regions, opt); }) == "EmptySelection");
}

TEST_CASE("bbox outside the regions selects nothing")
{
    const auto city = test::insight_city(3);
    auto opt = whole_range();
    opt.bbox = geo::BBox{50, 50, 51, 51};
    const auto r = mine_top_k(city.pointers(), city.regions, opt);
    CHECK(r.columns.empty());
    CHECK(r.top.empty());
}

TEST_CASE("timeframe restricts the mined samples")
{
    const auto city = test::insight_city(4);
    auto opt = whole_range();
    opt.from = Date::from_ymd(2021, 1, 1);
    opt.to = Date::from_ymd(2021, 1, 31);
    const auto r = mine_top_k(city.pointers(), city.regions, opt);
    REQUIRE_FALSE(r.top.empty());
    CHECK(r.top[0].keys.size() == 31);
    CHECK(r.top[0].keys.front() == "2021-01-01");
}

TEST_CASE("region ranking sums per-category aggregates")
{
    const auto regions = test::square_grid(2, 2);
    Rng rng = derive_rng(6, 6);
    std::string a = "timestamp,region_id,level\n", b = "timestamp,region_id,events\n";
    std::map<std::string, std::vector<double>> levels;
    std::map<std::string, double> events;
    for (int d = 1; d <= 9; ++d) {
        for (int r = 0; r < 4; ++r) {
            const std::string id = "G000" + std::to_string(r);
            const double lv = std::round(uniform01(rng) * 100) / 4;
            const int ev = static_cast<int>(uniform_index(rng, 7));
            a += "2022-04-0" + std::to_string(d) + "," + id + "," + std::to_string(lv) + "\n";
            b += "2022-04-0" + std::to_string(d) + "," + id + "," + std::to_string(ev) + "\n";
            if (d <= 6) {
                levels[id].push_back(lv);
                events[id] += ev;
            }
        }
    }
    auto ma = test::daily_boundary_manifest("pollution", "air", {"level"});
    auto mb = test::daily_boundary_manifest("crashes", "incidents", {"events"});
    mb.columns[2].type = ingest::SemanticType::count;
    mb.columns[2].aggregation = ingest::Aggregation::sum;
    const auto ta = ingest::parse_table(ma, a, regions);
    const auto tb = ingest::parse_table(mb, b, regions);
    const Date from = Date::from_ymd(2022, 4, 1), to = Date::from_ymd(2022, 4, 6);

    std::vector<std::pair<std::string, double>> oracle;
    for (auto& [id, v] : levels) {
        oracle.emplace_back(id, std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()) + events[id]);
    }
    std::sort(oracle.begin(), oracle.end(), [](auto& x, auto& y) { return x.second != y.second ? x.second > y.second : x.first < y.first; });

    const auto ranking = rank_regions({&ta, &tb}, regions, {"air", "crashes.events"}, from, to);
    CHECK(ranking.columns == std::vector<std::string>{"pollution.level", "crashes.events"});
    REQUIRE(ranking.entries.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(ranking.entries[i].first == oracle[i].first);
        CHECK(ranking.entries[i].second == doctest::Approx(oracle[i].second).epsilon(1e-12));
    }
    const auto asc = rank_regions({&ta, &tb}, regions, {"air", "events"}, from, to, Order::asc);
    CHECK(asc.entries.front().first == oracle.back().first);
    CHECK(test::error_kind([&] { rank_regions({&ta}, regions, {"nothing"}, from, to); }) == "UnknownCategory");
}

TEST_CASE("ranking order is invariant to scaling every value")
{
    const auto regions = test::square_grid(3, 3);
    Rng rng = derive_rng(8, 8);
    for (int trial = 0; trial < 20; ++trial) {
        std::string plain = "timestamp,region_id,v\n", scaled = plain;
        const double factor = 0.5 + 10 * uniform01(rng);
        for (int r = 0; r < 9; ++r) {
            for (int d = 1; d <= 3; ++d) {
                const double v = std::round(uniform01(rng) * 1000);
                const std::string prefix = "2022-01-0" + std::to_string(d) + ",G000" + std::to_string(r) + ",";
                plain += prefix + std::to_string(v) + "\n";
                scaled += prefix + std::to_string(v * factor) + "\n";
            }
        }
        const auto m = test::daily_boundary_manifest("t", "c", {"v"});
        const auto tp = ingest::parse_table(m, plain, regions), ts = ingest::parse_table(m, scaled, regions);
        const Date from = Date::from_ymd(2022, 1, 1), to = Date::from_ymd(2022, 1, 3);
        const auto rp = rank_regions({&tp}, regions, {"c"}, from, to), rs = rank_regions({&ts}, regions, {"c"}, from, to);
        for (std::size_t i = 0; i < rp.entries.size(); ++i) {
            CHECK(rp.entries[i].first == rs.entries[i].first);
        }
    }
}
