#pragma once

#include "urbanlens/geo.hpp"
#include "urbanlens/ingest.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ul::insight {

inline constexpr double kStrongThreshold = 0.5;
inline constexpr double kSameCategoryPenalty = 0.5;
// Below this sample count p-values come from a permutation distribution.
inline constexpr std::size_t kPermutationFallbackBelow = 10;

struct ColumnRef {
    std::string dataset;
    std::string column;
    std::string category;
    std::string level; // set for per-level counts of a categorical column

    std::string id() const { return level.empty() ? dataset + "." + column : dataset + "." + column + "=" + level; }
};

struct CorrelationResult {
    double rho = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
};

// Sample Pearson coefficient with a two-sided p-value: Student-t with n-2
// degrees of freedom, or the permutation distribution when n < 10.
CorrelationResult pearson(std::span<const double> x, std::span<const double> y);

// Two-sided Student-t p-value only (no small-sample fallback).
double pearson_t_pvalue(double rho, std::size_t n);

// Fraction of the other columns strongly correlated with `column`, divided by
// the total column count. NaN entries in the matrix mean "undefined pair".
double impact(std::size_t column, const std::vector<std::vector<double>>& abs_rho, double threshold = kStrongThreshold);

struct Insight {
    ColumnRef a;
    ColumnRef b;
    CorrelationResult corr;
    double impact_a = 0.0;
    double impact_b = 0.0;
    bool penalized = false;
    double score = 0.0;
};

// Throws WeakCorrelation when |rho| <= threshold.
Insight score_pair(const ColumnRef& a, const ColumnRef& b, const CorrelationResult& corr, double impact_a, double impact_b,
                   double penalty = kSameCategoryPenalty, double threshold = kStrongThreshold);

struct MiningOptions {
    std::optional<geo::BBox> bbox; // all regions when unset
    Date from;
    Date to;
    std::size_t k = 5;
    double penalty = kSameCategoryPenalty;
    double threshold = kStrongThreshold;
    int bins = 5;                  // quantile bins for categorical-vs-real pairs; 0 disables
    std::size_t max_levels = 20;   // categorical columns with more levels are not mined
};

struct MinedInsight {
    Insight insight;
    ingest::Granularity granularity = ingest::Granularity::daily;
    bool per_region = false; // keys carry the region (annual pairs)
    std::vector<std::string> keys;
    std::vector<double> series_a;
    std::vector<double> series_b;
};

struct MiningResult {
    std::vector<ColumnRef> columns; // the column set C, sorted by id
    std::vector<double> impacts;
    std::size_t pairs_evaluated = 0;
    std::size_t strong_pairs = 0;
    std::vector<MinedInsight> top;
};

MiningResult mine_top_k(const std::vector<const ingest::DatasetTable*>& tables, const geo::RegionSet& regions,
                        const MiningOptions& options);

enum class Order { desc, asc };

struct RegionRanking {
    std::vector<std::pair<std::string, double>> entries;
    std::vector<std::string> columns; // resolved dataset.column list
    Date from;
    Date to;
    Order order = Order::desc;
};

// Each token is "dataset.column", a column name, or a manifest category.
RegionRanking rank_regions(const std::vector<const ingest::DatasetTable*>& tables, const geo::RegionSet& regions,
                           const std::vector<std::string>& categories, Date from, Date to, Order order = Order::desc);

} // namespace ul::insight
