#pragma once

#include "urbanlens/geo.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ul::spatial {

enum class WeightMode { binary, row_standardized };
enum class Contiguity { queen, rook };

inline constexpr std::size_t kDefaultPermutations = 999;
inline constexpr double kDefaultAlpha = 0.05;
inline constexpr std::uint64_t kDefaultSeed = 12345;

// Region adjacency. Neighbor lists are stored unweighted; the mode decides
// whether each link weighs 1 or 1/|neighbors|.
class SpatialWeights {
public:
    SpatialWeights() = default;
    SpatialWeights(std::vector<std::string> region_ids, std::vector<std::vector<std::size_t>> neighbors, WeightMode mode);

    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& region_ids() const { return ids_; }
    const std::vector<std::size_t>& neighbors(std::size_t i) const { return neighbors_[i]; }
    WeightMode mode() const { return mode_; }

    double weight(std::size_t i) const; // weight of each of i's links
    bool isolated(std::size_t i) const { return neighbors_[i].empty(); }
    std::vector<std::string> isolated_regions() const;
    double s0() const;

    SpatialWeights with_mode(WeightMode mode) const;
    // Restriction to the given regions (in the given order); links to regions outside are dropped.
    SpatialWeights subset(const std::vector<std::string>& region_ids) const;

private:
    std::vector<std::string> ids_;
    std::vector<std::vector<std::size_t>> neighbors_;
    WeightMode mode_ = WeightMode::row_standardized;
};

// Regions sharing at least one boundary point (queen) or a boundary segment (rook).
SpatialWeights build_contiguity_weights(const geo::RegionSet& regions, WeightMode mode,
                                        Contiguity contiguity = Contiguity::queen);

// lag_i = sum_j w_ij x_j; isolated regions get 0.
std::vector<double> spatial_lag(const SpatialWeights& w, std::span<const double> x);

// Moran's I without inference.
double moran_statistic(const SpatialWeights& w, std::span<const double> x);

struct MoranGlobal {
    double I = 0.0;
    double expected_I = 0.0;
    double pseudo_p = 1.0;
    std::size_t n = 0;
    std::size_t permutations = 0;
    double permutation_mean = 0.0; // mean of I under the permutation null
    double permutation_sd = 0.0;
};

MoranGlobal global_moran(const SpatialWeights& w, std::span<const double> x,
                         std::size_t permutations = kDefaultPermutations, std::uint64_t seed = kDefaultSeed);

// I*_i = (x_i - mean) / m2 * sum_j w_ij (x_j - mean), m2 = sum_k (x_k - mean)^2 / n.
std::vector<double> local_moran(const SpatialWeights& w, std::span<const double> x);

enum class Quadrant { HH, LL, LH, HL };
const char* to_string(Quadrant q);

struct LisaRegion {
    std::string region_id;
    double local_I = 0.0;
    Quadrant quadrant = Quadrant::LL;
    bool significant = false;
    bool isolated = false;
    double pseudo_p = 1.0;
    double z = 0.0;     // standardized value
    double lag_z = 0.0; // spatial lag of the standardized values

    // Quadrant name when significant, otherwise "ns".
    std::string cluster() const { return significant ? to_string(quadrant) : "ns"; }
};

struct LisaResult {
    std::vector<LisaRegion> regions;
    std::size_t permutations = 0;
    double alpha = 0.0;
    std::uint64_t seed = 0;
};

LisaResult lisa_classify(const SpatialWeights& w, std::span<const double> x,
                         std::size_t permutations = kDefaultPermutations, double alpha = kDefaultAlpha,
                         std::uint64_t seed = kDefaultSeed);

struct NamedField {
    std::string name;
    std::vector<double> values; // aligned with the weights' region order
};

// Descending by I, ties by name; constant fields are skipped with a warning.
std::vector<std::pair<std::string, double>> rank_by_global_moran(const SpatialWeights& w,
                                                                 const std::vector<NamedField>& variables);

} // namespace ul::spatial
