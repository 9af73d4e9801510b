#include "urbanlens/insight.hpp"

#include "urbanlens/error.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace ul::insight {

using ingest::Aggregation;
using ingest::DatasetTable;
using ingest::Granularity;
using ingest::Series;
using ingest::SemanticType;

double pearson_t_pvalue(double rho, std::size_t n)
{
    if (std::abs(rho) >= 1.0) {
        return 0.0;
    }
    const double df = static_cast<double>(n) - 2.0;
    const double t = std::abs(rho) * std::sqrt(df / (1.0 - rho * rho));
    const boost::math::students_t dist(df);
    return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, t)), 0.0, 1.0);
}

namespace {

// Exact two-sided permutation p-value over all n! pairings.
double exact_permutation_pvalue(const std::vector<double>& xc, const std::vector<double>& yc)
{
    const std::size_t n = xc.size();
    double observed = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        observed += xc[i] * yc[i];
    }
    const double bar = std::abs(observed) * (1.0 - 1e-12);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::size_t extreme = 0, total = 0;
    do {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s += xc[i] * yc[perm[i]];
        }
        extreme += std::abs(s) >= bar;
        ++total;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(extreme) / static_cast<double>(total);
}

} // namespace

CorrelationResult pearson(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size()) {
        fail("LengthMismatch", ApiCode::unprocessable, "pearson inputs differ in length");
    }
    const std::size_t n = x.size();
    if (n < 3) {
        fail("TooFewSamples", ApiCode::unprocessable, "pearson needs at least 3 samples");
    }
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    std::vector<double> xc(n), yc(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        xc[i] = x[i] - mx;
        yc[i] = y[i] - my;
        sxx += xc[i] * xc[i];
        syy += yc[i] * yc[i];
        sxy += xc[i] * yc[i];
    }
    if (sxx == 0.0 || syy == 0.0) {
        fail("ConstantSeries", ApiCode::unprocessable, "pearson input is constant");
    }
    CorrelationResult r;
    r.n = n;
    r.rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    if (std::abs(r.rho) >= 1.0 - 1e-15) {
        r.rho = r.rho > 0 ? 1.0 : -1.0;
        r.p_value = 0.0;
    } else if (n < kPermutationFallbackBelow) {
        r.p_value = exact_permutation_pvalue(xc, yc);
    } else {
        r.p_value = pearson_t_pvalue(r.rho, n);
    }
    return r;
}

double impact(std::size_t column, const std::vector<std::vector<double>>& abs_rho, double threshold)
{
    const std::size_t card = abs_rho.size();
    if (card == 0) {
        return 0.0;
    }
    std::size_t strong = 0;
    for (std::size_t j = 0; j < card; ++j) {
        const double v = abs_rho[column][j];
        if (j != column && !std::isnan(v) && v > threshold) {
            ++strong;
        }
    }
    return static_cast<double>(strong) / static_cast<double>(card);
}

Insight score_pair(const ColumnRef& a, const ColumnRef& b, const CorrelationResult& corr, double impact_a, double impact_b,
                   double penalty, double threshold)
{
    if (!(std::abs(corr.rho) > threshold)) {
        fail("WeakCorrelation", ApiCode::unprocessable,
             "|rho| of " + a.id() + " vs " + b.id() + " does not exceed " + std::to_string(threshold));
    }
    if (!(penalty > 0.0 && penalty <= 1.0)) {
        fail("InvalidPenalty", ApiCode::bad_request, "penalty must lie in (0, 1]");
    }
    Insight ins;
    ins.a = a;
    ins.b = b;
    ins.corr = corr;
    ins.impact_a = impact_a;
    ins.impact_b = impact_b;
    ins.penalized = a.category == b.category;
    ins.score = (impact_a + impact_b) * (1.0 - corr.p_value);
    if (ins.penalized) {
        ins.score *= penalty;
    }
    return ins;
}

namespace {

struct MinedColumn {
    ColumnRef ref;
    SemanticType type = SemanticType::real;
    Series series; // per (region, period) at the dataset's own granularity
};

std::vector<MinedColumn> build_columns(const std::vector<const DatasetTable*>& tables,
                                       const std::set<std::string>& selected, const MiningOptions& opt)
{
    std::vector<MinedColumn> out;
    for (const auto* table : tables) {
        const auto& m = table->manifest;
        for (std::size_t c = 0; c < m.columns.size(); ++c) {
            const auto& spec = m.columns[c];
            if (!spec.data() || spec.name == m.dedupe_key) {
                continue;
            }
            if (spec.type == SemanticType::categorical) {
                const auto& levels = table->levels[c];
                if (levels.size() < 2 || levels.size() > opt.max_levels) {
                    continue;
                }
                std::vector<MinedColumn> per_level(levels.size());
                for (std::size_t l = 0; l < levels.size(); ++l) {
                    per_level[l].ref = {m.name, spec.name, m.category, levels[l]};
                    per_level[l].type = SemanticType::categorical;
                    per_level[l].series.granularity = m.granularity;
                    per_level[l].series.aggregation = Aggregation::sum;
                    per_level[l].series.zero_fill = true;
                }
                for (const auto& row : table->rows) {
                    if (row.ts.date < opt.from || row.ts.date > opt.to || !selected.count(row.region_id)) {
                        continue;
                    }
                    const auto l = static_cast<std::size_t>(row.values[c]);
                    per_level[l].series.values[{row.region_id, ingest::period_of(row.ts, m.granularity)}] += 1.0;
                }
                for (auto& col : per_level) {
                    if (!col.series.values.empty()) {
                        out.push_back(std::move(col));
                    }
                }
                continue;
            }
            MinedColumn col;
            col.ref = {m.name, spec.name, m.category, {}};
            col.type = spec.type;
            std::map<ingest::SeriesKey, std::vector<double>> cells;
            for (const auto& row : table->rows) {
                if (row.ts.date < opt.from || row.ts.date > opt.to || !selected.count(row.region_id) ||
                    std::isnan(row.values[c])) {
                    continue;
                }
                cells[{row.region_id, ingest::period_of(row.ts, m.granularity)}].push_back(row.values[c]);
            }
            col.series.granularity = m.granularity;
            col.series.aggregation = spec.aggregation;
            for (const auto& [k, v] : cells) {
                col.series.values.emplace(k, ingest::aggregate(v, spec.aggregation));
            }
            if (!col.series.values.empty()) {
                out.push_back(std::move(col));
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const MinedColumn& a, const MinedColumn& b) { return a.ref.id() < b.ref.id(); });
    return out;
}

struct PairData {
    bool defined = false;
    CorrelationResult corr;
    Granularity granularity = Granularity::daily;
    bool per_region = false;
    std::vector<std::string> keys;
    std::vector<double> a;
    std::vector<double> b;
};

PairData correlate_pair(const MinedColumn& ca, const MinedColumn& cb, const MiningOptions& opt)
{
    PairData out;
    const auto target = static_cast<Granularity>(
        std::max(static_cast<int>(ca.series.granularity), static_cast<int>(cb.series.granularity)));
    Series sa = ingest::coarsen_series(ca.series, target);
    Series sb = ingest::coarsen_series(cb.series, target);
    // sub-annual pairs correlate over time on the selection total; annual
    // pairs keep the region axis so a one-year window still has samples
    out.per_region = target == Granularity::annual;
    if (!out.per_region) {
        sa = ingest::collapse_regions(sa);
        sb = ingest::collapse_regions(sb);
    }
    out.granularity = target;
    std::pair<Series, Series> aligned;
    try {
        aligned = ingest::align_granularity(sa, sb);
    } catch (const Error&) {
        return out;
    }
    for (const auto& [k, v] : aligned.first.values) {
        out.keys.push_back(out.per_region ? k.region + "@" + ingest::period_label(k.period, target)
                                          : ingest::period_label(k.period, target));
        out.a.push_back(v);
    }
    out.b = aligned.second.ordered_values();
    if (out.a.size() < 3) {
        return out;
    }

    std::vector<double> xa = out.a, xb = out.b;
    if (opt.bins > 0) {
        auto bin_real = [&](std::vector<double>& v) {
            try {
                auto labels = ingest::bin_values(v, opt.bins, ingest::BinStrategy::quantile);
                v.assign(labels.begin(), labels.end());
            } catch (const Error&) {
            }
        };
        if (ca.type == SemanticType::categorical && cb.type == SemanticType::real) {
            bin_real(xb);
        } else if (cb.type == SemanticType::categorical && ca.type == SemanticType::real) {
            bin_real(xa);
        }
    }
    try {
        out.corr = pearson(xa, xb);
        out.defined = true;
    } catch (const Error&) {
        out.defined = false;
    }
    return out;
}

} // namespace

MiningResult mine_top_k(const std::vector<const DatasetTable*>& tables, const geo::RegionSet& regions,
                        const MiningOptions& opt)
{
    if (opt.k < 1) {
        fail("InvalidK", ApiCode::bad_request, "k must be at least 1");
    }
    if (opt.from > opt.to) {
        fail("EmptySelection", ApiCode::bad_request, "timeframe is empty (from > to)");
    }
    std::set<std::string> selected;
    if (opt.bbox) {
        for (auto& id : regions.intersecting(*opt.bbox)) {
            selected.insert(std::move(id));
        }
    } else {
        for (const auto& u : regions.units()) {
            selected.insert(u.region_id);
        }
    }

    MiningResult result;
    if (selected.empty()) {
        return result;
    }
    const auto columns = build_columns(tables, selected, opt);
    const std::size_t n = columns.size();
    for (const auto& c : columns) {
        result.columns.push_back(c.ref);
    }

    std::vector<std::vector<double>> abs_rho(n, std::vector<double>(n, std::nan("")));
    std::vector<std::vector<PairData>> pairs(n, std::vector<PairData>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            pairs[i][j] = correlate_pair(columns[i], columns[j], opt);
            ++result.pairs_evaluated;
            if (pairs[i][j].defined) {
                abs_rho[i][j] = abs_rho[j][i] = std::abs(pairs[i][j].corr.rho);
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        result.impacts.push_back(impact(i, abs_rho, opt.threshold));
    }

    std::vector<MinedInsight> candidates;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            auto& p = pairs[i][j];
            if (!p.defined || !(std::abs(p.corr.rho) > opt.threshold)) {
                continue;
            }
            MinedInsight mi;
            mi.insight = score_pair(columns[i].ref, columns[j].ref, p.corr, result.impacts[i], result.impacts[j],
                                    opt.penalty, opt.threshold);
            mi.granularity = p.granularity;
            mi.per_region = p.per_region;
            mi.keys = std::move(p.keys);
            mi.series_a = std::move(p.a);
            mi.series_b = std::move(p.b);
            candidates.push_back(std::move(mi));
        }
    }
    result.strong_pairs = candidates.size();
    std::stable_sort(candidates.begin(), candidates.end(), [](const MinedInsight& x, const MinedInsight& y) {
        if (x.insight.score != y.insight.score) {
            return x.insight.score > y.insight.score;
        }
        const double rx = std::abs(x.insight.corr.rho), ry = std::abs(y.insight.corr.rho);
        if (rx != ry) {
            return rx > ry;
        }
        return std::pair(x.insight.a.id(), x.insight.b.id()) < std::pair(y.insight.a.id(), y.insight.b.id());
    });
    if (candidates.size() > opt.k) {
        candidates.resize(opt.k);
    }
    result.top = std::move(candidates);
    return result;
}

RegionRanking rank_regions(const std::vector<const DatasetTable*>& tables, const geo::RegionSet& regions,
                           const std::vector<std::string>& categories, Date from, Date to, Order order)
{
    if (categories.empty()) {
        fail("UnknownCategory", ApiCode::not_found, "no categories given");
    }
    std::vector<std::pair<const DatasetTable*, std::size_t>> resolved;
    auto add = [&](const DatasetTable* t, std::size_t c) {
        if (std::find(resolved.begin(), resolved.end(), std::pair(t, c)) == resolved.end()) {
            resolved.emplace_back(t, c);
        }
    };
    for (const auto& token : categories) {
        bool found = false;
        const auto dot = token.find('.');
        for (const auto* t : tables) {
            const auto& m = t->manifest;
            for (std::size_t c = 0; c < m.columns.size(); ++c) {
                if (!m.columns[c].numeric()) {
                    continue;
                }
                const bool match = dot != std::string::npos
                                       ? (token.substr(0, dot) == m.name && token.substr(dot + 1) == m.columns[c].name)
                                       : (token == m.columns[c].name || token == m.category);
                if (match) {
                    add(t, c);
                    found = true;
                }
            }
        }
        if (!found) {
            fail("UnknownCategory", ApiCode::not_found, "category '" + token + "' does not resolve to a numeric column");
        }
    }

    RegionRanking ranking;
    ranking.from = from;
    ranking.to = to;
    ranking.order = order;
    std::map<std::string, double> totals;
    for (const auto& u : regions.units()) {
        totals[u.region_id] = 0.0;
    }
    for (const auto& [t, c] : resolved) {
        ranking.columns.push_back(t->manifest.name + "." + t->manifest.columns[c].name);
        std::map<std::string, std::vector<double>> cells;
        for (const auto& row : t->rows) {
            if (row.ts.date >= from && row.ts.date <= to && !std::isnan(row.values[c])) {
                cells[row.region_id].push_back(row.values[c]);
            }
        }
        for (const auto& [region, values] : cells) {
            auto it = totals.find(region);
            if (it != totals.end()) {
                it->second += ingest::aggregate(values, t->manifest.columns[c].aggregation);
            }
        }
    }
    ranking.entries.assign(totals.begin(), totals.end());
    std::stable_sort(ranking.entries.begin(), ranking.entries.end(), [order](const auto& x, const auto& y) {
        if (x.second != y.second) {
            return order == Order::desc ? x.second > y.second : x.second < y.second;
        }
        return x.first < y.first;
    });
    return ranking;
}

} // namespace ul::insight
