#pragma once

#include <cstddef>
#include <limits>
#include <vector>

namespace ul {

struct Neighbor {
    double dist2 = 0.0;
    std::size_t row = 0;
    bool operator<(const Neighbor& o) const { return dist2 != o.dist2 ? dist2 < o.dist2 : row < o.row; }
};

// Exact k-nearest-neighbor index over a subset of rows of a row-major matrix.
// Results are ordered by (squared distance, row) so equal distances resolve
// to the lower row index.
class KdTree {
public:
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    KdTree(const double* data, std::size_t dim, std::vector<std::size_t> rows);

    std::size_t size() const { return rows_.size(); }
    std::vector<Neighbor> query(const double* point, std::size_t k, std::size_t exclude = npos) const;

private:
    struct Node {
        std::size_t begin = 0;
        std::size_t end = 0;
        std::size_t dim = 0;
        double split = 0.0;
        long left = -1;
        long right = -1;
    };

    long build(std::size_t begin, std::size_t end);
    void search(long node, const double* point, std::size_t k, std::size_t exclude, std::vector<Neighbor>& heap) const;
    double dist2(const double* a, std::size_t row) const;

    const double* data_;
    std::size_t dim_;
    std::vector<std::size_t> rows_;
    std::vector<Node> nodes_;
};

} // namespace ul
