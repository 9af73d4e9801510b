#include "support.hpp"

#include "urbanlens/knn.hpp"
#include "urbanlens/resample.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace ul;
using namespace ul::resample;

namespace {

double dist2(const LabeledSet& d, std::size_t a, std::size_t b)
{
    double s = 0;
    for (std::size_t f = 0; f < d.features(); ++f) {
        const double t = d.row(a)[f] - d.row(b)[f];
        s += t * t;
    }
    return s;
}

// k nearest among `pool` by (distance, row), excluding `self`.
std::vector<std::size_t> brute_knn(const LabeledSet& d, std::size_t self, const std::vector<std::size_t>& pool,
                                   std::size_t k)
{
    std::vector<std::pair<double, std::size_t>> all;
    for (auto j : pool) {
        if (j != self) all.emplace_back(dist2(d, self, j), j);
    }
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(all[i].second);
    return out;
}

std::vector<std::size_t> indices_where(const LabeledSet& d, int label)
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < d.rows(); ++i) {
        if (d.y[i] == label) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> every_row(const LabeledSet& d)
{
    std::vector<std::size_t> out(d.rows());
    for (std::size_t i = 0; i < d.rows(); ++i) out[i] = i;
    return out;
}

std::set<std::int64_t> ids(const LabeledSet& d)
{
    return {d.row_ids.begin(), d.row_ids.end()};
}

// Coarse integer coordinates so exact distance ties actually happen.
LabeledSet lattice(std::size_t majority, std::size_t minority, std::uint64_t seed)
{
    LabeledSet d;
    d.feature_names = {"a", "b"};
    Rng rng = derive_rng(seed, 77);
    for (std::size_t i = 0; i < majority + minority; ++i) {
        const int label = i < majority ? 0 : 1;
        const double x[2] = {static_cast<double>(uniform_index(rng, 8)) + label * 2.0,
                             static_cast<double>(uniform_index(rng, 8))};
        d.push_row(x, label, static_cast<std::int64_t>(i));
    }
    return d;
}

} // namespace

TEST_CASE("kd-tree agrees with brute force, ties included")
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto d = seed % 2 ? lattice(150, 50, seed) : test::blobs(150, 50, 3, seed);
        const auto rows = every_row(d);
        KdTree tree(d.X.data(), d.features(), rows);
        for (std::size_t i = 0; i < d.rows(); i += 7) {
            for (std::size_t k : {1, 3, 10}) {
                const auto got = tree.query(d.row(i), k, i);
                const auto want = brute_knn(d, i, rows, k);
                REQUIRE(got.size() == want.size());
                for (std::size_t n = 0; n < got.size(); ++n) CHECK(got[n].row == want[n]);
            }
        }
    }
}

TEST_CASE("count contracts hold on random imbalanced sets")
{
    Rng rng = derive_rng(12, 12);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t M = 40 + uniform_index(rng, 200);
        const std::size_t m = 8 + uniform_index(rng, M / 3);
        const auto d = test::blobs(M, m, 1 + uniform_index(rng, 4), static_cast<std::uint64_t>(trial), 1.0);
        const auto seed = static_cast<std::uint64_t>(trial);
        using P = std::pair<std::size_t, std::size_t>;
        CHECK(random_undersample(d, seed).counts() == P{m, m});
        CHECK(nearmiss(d).counts() == P{m, m});
        CHECK(smote(d, 5, seed).counts() == P{M, M});
        const auto st = apply(Method::smote_tomek, d, seed).counts();
        CHECK(st.first == st.second);
        CHECK(st.first <= M);
        const auto enn = edited_nearest_neighbours(d);
        const auto renn = edited_nearest_neighbours(d, 3, true);
        CHECK(enn.counts().second == m);
        CHECK(renn.counts().second == m);
        CHECK(enn.counts().first <= M);
        CHECK(renn.counts().first <= enn.counts().first);
        // RENN's removals include the first ENN pass's removals
        const auto kept_enn = ids(enn);
        for (auto id : ids(renn)) CHECK(kept_enn.count(id) == 1);
        const auto ad = adasyn(d, 5, seed).counts();
        CHECK(ad.first == M);
        CHECK(ad.second >= m);
    }
}

TEST_CASE("undersampling keeps every minority row and draws majority rows without replacement")
{
    const auto d = test::blobs(300, 40, 2, 3);
    const auto u = random_undersample(d, 9);
    std::set<std::int64_t> seen;
    for (std::size_t i = 0; i < u.rows(); ++i) {
        CHECK(seen.insert(u.row_ids[i]).second);
        const auto src = static_cast<std::size_t>(u.row_ids[i]);
        CHECK(u.y[i] == d.y[src]);
        for (std::size_t f = 0; f < d.features(); ++f) CHECK(u.row(i)[f] == d.row(src)[f]);
    }
    for (std::int64_t id = 300; id < 340; ++id) CHECK(seen.count(id) == 1);
    CHECK(write_csv(random_undersample(d, 9)) == write_csv(u));
    CHECK(write_csv(random_undersample(d, 10)) != write_csv(u));
}

TEST_CASE("NearMiss-1 keeps the majority rows closest to their minority neighbours")
{
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const auto d = seed % 2 ? lattice(120, 30, seed) : test::blobs(120, 30, 3, seed);
        const auto minor = indices_where(d, 1);
        std::vector<std::pair<double, std::size_t>> ranked;
        for (auto i : indices_where(d, 0)) {
            double s = 0;
            for (auto j : brute_knn(d, i, minor, 3)) s += std::sqrt(dist2(d, i, j));
            ranked.emplace_back(s / 3, i);
        }
        std::sort(ranked.begin(), ranked.end());
        std::set<std::int64_t> want(d.row_ids.begin() + 120, d.row_ids.end());
        for (std::size_t r = 0; r < 30; ++r) want.insert(static_cast<std::int64_t>(ranked[r].second));
        CHECK(ids(nearmiss(d, 3)) == want);
    }
    CHECK(test::error_kind([] { nearmiss(test::blobs(10, 2, 2, 1), 3); }) == "TooFewMinority");
}

TEST_CASE("ENN matches a brute-force vote")
{
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const auto d = seed % 2 ? lattice(150, 40, seed) : test::blobs(150, 40, 2, seed, 0.8);
        const auto all = every_row(d);
        for (auto scope : {EnnScope::majority_only, EnnScope::all_classes}) {
            std::set<std::int64_t> want;
            for (auto i : all) {
                if (scope == EnnScope::majority_only && d.y[i] == 1) {
                    want.insert(d.row_ids[i]);
                    continue;
                }
                std::size_t same = 0;
                for (auto j : brute_knn(d, i, all, 3)) same += d.y[j] == d.y[i];
                if (2 * same >= 3) want.insert(d.row_ids[i]);
            }
            CHECK(ids(edited_nearest_neighbours(d, 3, false, 1, scope)) == want);
        }
    }
}

TEST_CASE("Tomek links match a brute-force mutual nearest neighbour search")
{
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const auto d = seed % 2 ? lattice(100, 40, seed) : test::blobs(100, 40, 2, seed, 0.7);
        const auto all = every_row(d);
        std::vector<std::size_t> nearest(d.rows());
        for (auto i : all) nearest[i] = brute_knn(d, i, all, 1).front();
        std::set<std::int64_t> want;
        std::size_t dropped = 0;
        for (auto i : all) {
            const auto j = nearest[i];
            if (nearest[j] == i && d.y[i] != d.y[j]) {
                ++dropped;
            } else {
                want.insert(d.row_ids[i]);
            }
        }
        const auto t = tomek_links(d);
        CHECK(ids(t) == want);
        CHECK(dropped % 2 == 0);
        // every link removes one row of each class
        CHECK(d.counts().first - t.counts().first == d.counts().second - t.counts().second);
    }
}

TEST_CASE("SMOTE samples lie on segments between minority neighbours")
{
    const auto d = test::blobs(200, 30, 3, 4);
    std::vector<std::pair<std::size_t, std::size_t>> parents;
    const auto s = smote(d, 5, 1, &parents);
    REQUIRE(parents.size() == 170);
    const auto minor = indices_where(d, 1);
    for (std::size_t g = 0; g < parents.size(); ++g) {
        const auto [a, b] = parents[g];
        CHECK(d.y[a] == 1);
        CHECK(d.y[b] == 1);
        const auto nn = brute_knn(d, a, minor, 5);
        CHECK(std::find(nn.begin(), nn.end(), b) != nn.end());
        const double* x = s.row(d.rows() + g);
        CHECK(s.row_ids[d.rows() + g] == -1);
        // a single interpolation weight explains every coordinate
        double u = -1;
        for (std::size_t f = 0; f < d.features(); ++f) {
            const double span = d.row(b)[f] - d.row(a)[f];
            if (std::abs(span) < 1e-9) continue;
            const double uf = (x[f] - d.row(a)[f]) / span;
            CHECK(uf >= -1e-9);
            CHECK(uf <= 1 + 1e-9);
            if (u < 0) u = uf;
            CHECK(uf == doctest::Approx(u).epsilon(1e-6));
        }
    }
    CHECK(test::error_kind([] { smote(test::blobs(50, 5, 2, 1), 5, 1); }) == "TooFewMinority");
}

TEST_CASE("ADASYN weights synthesis by majority neighbours")
{
    const auto d = test::blobs(200, 40, 2, 8, 1.0);
    AdasynPlan plan;
    const auto out = adasyn(d, 5, 3, &plan);
    const auto all = every_row(d);
    double total = 0;
    std::vector<double> r;
    for (auto i : plan.minority_rows) {
        std::size_t hostile = 0;
        for (auto j : brute_knn(d, i, all, 5)) hostile += d.y[j] == 0;
        r.push_back(hostile / 5.0);
        total += hostile / 5.0;
    }
    std::size_t generated = 0;
    for (std::size_t m = 0; m < r.size(); ++m) {
        CHECK(plan.ratio[m] == r[m]);
        CHECK(plan.generated[m] == static_cast<std::size_t>(std::nearbyint(r[m] / total * 160)));
        generated += plan.generated[m];
    }
    CHECK(out.rows() == d.rows() + generated);

    // well separated classes: nothing to synthesize
    ul::set_warning_sink([](const std::string&) {});
    const auto safe = test::blobs(100, 20, 2, 1, 50.0);
    CHECK(adasyn(safe, 5, 1).rows() == safe.rows());
    ul::set_warning_sink(nullptr);
}

TEST_CASE("stratified split sizes and determinism")
{
    Rng rng = derive_rng(30, 30);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t M = 10 + uniform_index(rng, 400), m = 2 + uniform_index(rng, 100);
        const auto d = test::blobs(M, m, 2, static_cast<std::uint64_t>(trial));
        const double f = 0.1 + 0.8 * uniform01(rng);
        const auto s = stratified_split(d, f, 5);
        const auto t0 = static_cast<std::size_t>(std::lround(static_cast<double>(M) * f));
        const auto t1 = static_cast<std::size_t>(std::lround(static_cast<double>(m) * f));
        CHECK(s.test.counts() == std::pair{t0, t1});
        CHECK(s.train.counts() == std::pair{M - t0, m - t1});
        std::set<std::int64_t> all = ids(s.train);
        for (auto id : ids(s.test)) CHECK(all.insert(id).second);
        CHECK(all.size() == d.rows());
        const auto again = stratified_split(d, f, 5);
        CHECK(again.test.row_ids == s.test.row_ids);
    }
    const auto d = test::blobs(100, 20, 2, 1);
    CHECK(stratified_split(d, 0.2, 1).test.row_ids != stratified_split(d, 0.2, 2).test.row_ids);
    CHECK(test::error_kind([&] { stratified_split(d, 1.0, 1); }) == "InvalidFraction");
    CHECK(test::error_kind([&] { stratified_split(test::blobs(10, 1, 2, 1), 0.2, 1); }) == "ClassTooSmall");
}

TEST_CASE("labeled csv round-trip and validation")
{
    const auto d = test::blobs(30, 10, 3, 2);
    const auto text = write_csv(d);
    const auto back = read_csv(text);
    CHECK(back.X == d.X);
    CHECK(back.y == d.y);
    CHECK(back.row_ids == d.row_ids);
    CHECK(back.feature_names == d.feature_names);
    CHECK(test::error_kind([] { read_csv("a,b\n1,2\n"); }) == "MissingColumn");
    CHECK(test::error_kind([] { read_csv("a,label\n1,2\n"); }) == "InvalidLabeledSet");
    CHECK(test::error_kind([] { read_csv("a,label\nx,1\n"); }) == "TypeMismatch");
    CHECK(test::error_kind([] { random_undersample(test::blobs(10, 0, 2, 1), 1); }) == "SingleClass");
}

TEST_CASE("method names")
{
    for (auto m : all_methods()) CHECK(parse_method(to_string(m)) == m);
    CHECK(all_methods().size() == 9);
    CHECK(test::error_kind([] { parse_method("bogus"); }) == "UnknownMethod");
}
