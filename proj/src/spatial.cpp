#include "urbanlens/spatial.hpp"

#include "urbanlens/error.hpp"
#include "urbanlens/util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ul::spatial {

namespace {
constexpr std::uint64_t kGlobalStream = 0x676c6f62616cULL;
constexpr std::uint64_t kLocalStream = 0x6c6f63616cULL;
} // namespace

SpatialWeights::SpatialWeights(std::vector<std::string> region_ids, std::vector<std::vector<std::size_t>> neighbors,
                               WeightMode mode)
    : ids_(std::move(region_ids)), neighbors_(std::move(neighbors)), mode_(mode)
{
    if (neighbors_.size() != ids_.size()) {
        fail("DegenerateGeometry", ApiCode::unprocessable, "neighbor lists do not match region count");
    }
    for (std::size_t i = 0; i < neighbors_.size(); ++i) {
        auto& list = neighbors_[i];
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
        list.erase(std::remove(list.begin(), list.end(), i), list.end()); // w_ii = 0
        for (auto j : list) {
            if (j >= ids_.size()) {
                fail("DegenerateGeometry", ApiCode::unprocessable, "neighbor index out of range");
            }
        }
    }
}

double SpatialWeights::weight(std::size_t i) const
{
    if (neighbors_[i].empty()) {
        return 0.0;
    }
    return mode_ == WeightMode::binary ? 1.0 : 1.0 / static_cast<double>(neighbors_[i].size());
}

std::vector<std::string> SpatialWeights::isolated_regions() const
{
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (isolated(i)) {
            out.push_back(ids_[i]);
        }
    }
    return out;
}

double SpatialWeights::s0() const
{
    double s = 0.0;
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        s += weight(i) * static_cast<double>(neighbors_[i].size());
    }
    return s;
}

SpatialWeights SpatialWeights::with_mode(WeightMode mode) const
{
    SpatialWeights out = *this;
    out.mode_ = mode;
    return out;
}

SpatialWeights SpatialWeights::subset(const std::vector<std::string>& region_ids) const
{
    std::vector<long> remap(ids_.size(), -1);
    for (std::size_t k = 0; k < region_ids.size(); ++k) {
        auto it = std::find(ids_.begin(), ids_.end(), region_ids[k]);
        if (it == ids_.end()) {
            fail("MissingValue", ApiCode::unprocessable, "region '" + region_ids[k] + "' not in weights");
        }
        remap[static_cast<std::size_t>(it - ids_.begin())] = static_cast<long>(k);
    }
    std::vector<std::vector<std::size_t>> lists(region_ids.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (remap[i] < 0) {
            continue;
        }
        for (auto j : neighbors_[i]) {
            if (remap[j] >= 0) {
                lists[static_cast<std::size_t>(remap[i])].push_back(static_cast<std::size_t>(remap[j]));
            }
        }
    }
    return SpatialWeights(region_ids, std::move(lists), mode_);
}

namespace {

bool share_segment(geo::Point a, geo::Point b, geo::Point c, geo::Point d)
{
    // collinear and overlapping with positive length
    if (!geo::on_segment(c, a, b, 1e-9) && !geo::on_segment(d, a, b, 1e-9) && !geo::on_segment(a, c, d, 1e-9) &&
        !geo::on_segment(b, c, d, 1e-9)) {
        return false;
    }
    const double cross1 = (b.lon - a.lon) * (c.lat - a.lat) - (b.lat - a.lat) * (c.lon - a.lon);
    const double cross2 = (b.lon - a.lon) * (d.lat - a.lat) - (b.lat - a.lat) * (d.lon - a.lon);
    const double len = std::hypot(b.lon - a.lon, b.lat - a.lat);
    if (std::abs(cross1) > 1e-9 * std::max(1.0, len) || std::abs(cross2) > 1e-9 * std::max(1.0, len) || len == 0.0) {
        return false;
    }
    // project onto ab and measure the overlap
    auto t = [&](geo::Point p) { return ((p.lon - a.lon) * (b.lon - a.lon) + (p.lat - a.lat) * (b.lat - a.lat)) / (len * len); };
    const double lo = std::max(0.0, std::min(t(c), t(d)));
    const double hi = std::min(1.0, std::max(t(c), t(d)));
    return (hi - lo) * len > 1e-9;
}

bool adjacent(const geo::GeoUnit& a, const geo::GeoUnit& b, Contiguity contiguity)
{
    for (const auto& ra : a.rings) {
        for (std::size_t i = 0; i + 1 < ra.size(); ++i) {
            for (const auto& rb : b.rings) {
                for (std::size_t j = 0; j + 1 < rb.size(); ++j) {
                    const bool hit = contiguity == Contiguity::queen
                                         ? geo::segments_touch(ra[i], ra[i + 1], rb[j], rb[j + 1], 1e-9)
                                         : share_segment(ra[i], ra[i + 1], rb[j], rb[j + 1]);
                    if (hit) {
                        return true;
                    }
                }
            }
        }
    }
    return false;
}

} // namespace

SpatialWeights build_contiguity_weights(const geo::RegionSet& regions, WeightMode mode, Contiguity contiguity)
{
    const auto& units = regions.units();
    if (units.size() < 2) {
        fail("DegenerateGeometry", ApiCode::unprocessable, "contiguity weights need at least 2 regions");
    }
    std::vector<geo::BBox> bounds;
    for (const auto& u : units) {
        bounds.push_back(u.bounds());
    }
    const double pad = 1e-9;
    std::vector<std::vector<std::size_t>> lists(units.size());
    for (std::size_t i = 0; i < units.size(); ++i) {
        for (std::size_t j = i + 1; j < units.size(); ++j) {
            geo::BBox bi = bounds[i];
            bi.lon_min -= pad;
            bi.lat_min -= pad;
            bi.lon_max += pad;
            bi.lat_max += pad;
            if (bi.overlaps(bounds[j]) && adjacent(units[i], units[j], contiguity)) {
                lists[i].push_back(j);
                lists[j].push_back(i);
            }
        }
    }
    std::vector<std::string> ids;
    for (const auto& u : units) {
        ids.push_back(u.region_id);
    }
    SpatialWeights w(std::move(ids), std::move(lists), mode);
    if (auto iso = w.isolated_regions(); !iso.empty()) {
        warn(std::to_string(iso.size()) + " isolated region(s) without neighbors, e.g. '" + iso.front() + "'");
    }
    return w;
}

std::vector<double> spatial_lag(const SpatialWeights& w, std::span<const double> x)
{
    if (x.size() != w.size()) {
        fail("MissingValue", ApiCode::unprocessable, "field does not cover every region of the weights");
    }
    std::vector<double> lag(w.size(), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double wi = w.weight(i);
        double s = 0.0;
        for (auto j : w.neighbors(i)) {
            s += x[j];
        }
        lag[i] = wi * s;
    }
    return lag;
}

namespace {

std::vector<double> deviations(std::span<const double> x)
{
    for (double v : x) {
        if (!std::isfinite(v)) {
            fail("MissingValue", ApiCode::unprocessable, "field contains a non-finite value");
        }
    }
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    std::vector<double> z(x.size());
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        z[i] = x[i] - mean;
        ss += z[i] * z[i];
    }
    // relative test: a constant field leaves only rounding residue
    double scale = 0.0;
    for (double v : x) {
        scale = std::max(scale, std::abs(v));
    }
    if (ss <= 1e-24 * std::max(1.0, scale * scale) * static_cast<double>(x.size())) {
        fail("ConstantField", ApiCode::unprocessable, "field is constant");
    }
    return z;
}

void check_size(const SpatialWeights& w, std::span<const double> x)
{
    if (x.size() != w.size()) {
        fail("MissingValue", ApiCode::unprocessable, "field does not cover every region of the weights");
    }
    if (w.size() < 3) {
        fail("TooFewRegions", ApiCode::unprocessable, "Moran's I needs at least 3 regions");
    }
}

double moran_from_deviations(const SpatialWeights& w, std::span<const double> z, double s0)
{
    const auto n = static_cast<double>(z.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        double s = 0.0;
        for (auto j : w.neighbors(i)) {
            s += z[j];
        }
        num += z[i] * w.weight(i) * s;
        den += z[i] * z[i];
    }
    return n / s0 * num / den;
}

} // namespace

double moran_statistic(const SpatialWeights& w, std::span<const double> x)
{
    check_size(w, x);
    const auto z = deviations(x);
    const double s0 = w.s0();
    if (s0 == 0.0) {
        fail("DegenerateGeometry", ApiCode::unprocessable, "no region has neighbors");
    }
    return moran_from_deviations(w, z, s0);
}

MoranGlobal global_moran(const SpatialWeights& w, std::span<const double> x, std::size_t permutations, std::uint64_t seed)
{
    check_size(w, x);
    const auto z = deviations(x);
    const double s0 = w.s0();
    if (s0 == 0.0) {
        fail("DegenerateGeometry", ApiCode::unprocessable, "no region has neighbors");
    }
    MoranGlobal out;
    out.n = x.size();
    out.I = moran_from_deviations(w, z, s0);
    out.expected_I = -1.0 / (static_cast<double>(out.n) - 1.0);
    out.permutations = permutations;
    if (permutations == 0) {
        return out;
    }
    std::size_t larger = 0;
    double sum = 0.0, sumsq = 0.0;
    std::vector<double> perm(z.begin(), z.end());
    for (std::size_t p = 0; p < permutations; ++p) {
        std::copy(z.begin(), z.end(), perm.begin());
        auto rng = derive_rng(seed, kGlobalStream, p);
        shuffle(perm, rng);
        const double ip = moran_from_deviations(w, perm, s0);
        sum += ip;
        sumsq += ip * ip;
        larger += ip >= out.I;
    }
    // folded one-tailed pseudo p, as in the usual permutation inference for Moran's I
    if (permutations - larger < larger) {
        larger = permutations - larger;
    }
    out.pseudo_p = static_cast<double>(larger + 1) / static_cast<double>(permutations + 1);
    const auto np = static_cast<double>(permutations);
    out.permutation_mean = sum / np;
    out.permutation_sd = permutations > 1 ? std::sqrt(std::max(0.0, (sumsq - sum * sum / np) / (np - 1.0))) : 0.0;
    return out;
}

std::vector<double> local_moran(const SpatialWeights& w, std::span<const double> x)
{
    check_size(w, x);
    const auto z = deviations(x);
    double m2 = 0.0;
    for (double v : z) {
        m2 += v * v;
    }
    m2 /= static_cast<double>(z.size());
    const auto lag = spatial_lag(w, z);
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = z[i] / m2 * lag[i];
    }
    return out;
}

const char* to_string(Quadrant q)
{
    switch (q) {
    case Quadrant::HH: return "HH";
    case Quadrant::LL: return "LL";
    case Quadrant::LH: return "LH";
    case Quadrant::HL: return "HL";
    }
    return "ns";
}

LisaResult lisa_classify(const SpatialWeights& w, std::span<const double> x, std::size_t permutations, double alpha,
                         std::uint64_t seed)
{
    if (permutations < 99) {
        fail("InvalidPermutations", ApiCode::bad_request, "LISA needs at least 99 permutations");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        fail("InvalidAlpha", ApiCode::bad_request, "alpha must lie in (0, 1)");
    }
    check_size(w, x);
    const auto z = deviations(x);
    const std::size_t n = z.size();
    double m2 = 0.0;
    for (double v : z) {
        m2 += v * v;
    }
    m2 /= static_cast<double>(n);
    const double sd = std::sqrt(m2);
    std::vector<double> zs(n);
    for (std::size_t i = 0; i < n; ++i) {
        zs[i] = z[i] / sd;
    }
    const auto lag = spatial_lag(w, z);
    const auto lag_std = spatial_lag(w, zs);

    LisaResult result;
    result.permutations = permutations;
    result.alpha = alpha;
    result.seed = seed;
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < n; ++i) {
        LisaRegion r;
        r.region_id = w.region_ids()[i];
        r.local_I = z[i] / m2 * lag[i];
        r.z = zs[i];
        r.lag_z = lag_std[i];
        const bool high = z[i] > 0.0;
        const bool lag_high = lag[i] > 0.0;
        r.quadrant = high ? (lag_high ? Quadrant::HH : Quadrant::HL) : (lag_high ? Quadrant::LH : Quadrant::LL);
        r.isolated = w.isolated(i);
        if (r.isolated) {
            r.pseudo_p = 1.0;
            r.significant = false;
            result.regions.push_back(std::move(r));
            continue;
        }
        // conditional permutation: hold x_i, draw the neighbors' values from the rest
        const std::size_t k = w.neighbors(i).size();
        const double wi = w.weight(i);
        const double observed = std::abs(r.local_I);
        auto rng = derive_rng(seed, kLocalStream, i);
        std::size_t extreme = 0;
        for (std::size_t p = 0; p < permutations; ++p) {
            pool.clear();
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i) {
                    pool.push_back(j);
                }
            }
            double s = 0.0;
            for (std::size_t d = 0; d < k; ++d) {
                const std::size_t pick = d + uniform_index(rng, pool.size() - d);
                std::swap(pool[d], pool[pick]);
                s += z[pool[d]];
            }
            const double ip = z[i] / m2 * wi * s;
            extreme += std::abs(ip) >= observed * (1.0 - 1e-12);
        }
        r.pseudo_p = static_cast<double>(extreme + 1) / static_cast<double>(permutations + 1);
        r.significant = r.pseudo_p <= alpha;
        result.regions.push_back(std::move(r));
    }
    return result;
}

std::vector<std::pair<std::string, double>> rank_by_global_moran(const SpatialWeights& w,
                                                                 const std::vector<NamedField>& variables)
{
    std::vector<std::pair<std::string, double>> out;
    for (const auto& v : variables) {
        try {
            out.emplace_back(v.name, moran_statistic(w, v.values));
        } catch (const Error& e) {
            if (e.kind() != "ConstantField") {
                throw;
            }
            warn("skipping constant field '" + v.name + "' in global Moran ranking");
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) {
            return a.second > b.second;
        }
        return a.first < b.first;
    });
    return out;
}

} // namespace ul::spatial
