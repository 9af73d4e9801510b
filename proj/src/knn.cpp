#include "urbanlens/knn.hpp"

#include <algorithm>

namespace ul {

namespace {
constexpr std::size_t kLeafSize = 16;
}

KdTree::KdTree(const double* data, std::size_t dim, std::vector<std::size_t> rows)
    : data_(data), dim_(dim), rows_(std::move(rows))
{
    if (!rows_.empty()) {
        nodes_.reserve(2 * rows_.size() / kLeafSize + 2);
        build(0, rows_.size());
    }
}

long KdTree::build(std::size_t begin, std::size_t end)
{
    const auto id = static_cast<long>(nodes_.size());
    nodes_.push_back({begin, end, 0, 0.0, -1, -1});
    if (end - begin <= kLeafSize || dim_ == 0) {
        return id;
    }
    // split on the widest dimension
    std::size_t best = 0;
    double best_spread = -1.0;
    for (std::size_t d = 0; d < dim_; ++d) {
        double lo = data_[rows_[begin] * dim_ + d], hi = lo;
        for (std::size_t i = begin + 1; i < end; ++i) {
            const double v = data_[rows_[i] * dim_ + d];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi - lo > best_spread) {
            best_spread = hi - lo;
            best = d;
        }
    }
    if (best_spread <= 0.0) {
        return id; // all points coincide
    }
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(rows_.begin() + static_cast<long>(begin), rows_.begin() + static_cast<long>(mid),
                     rows_.begin() + static_cast<long>(end), [&](std::size_t a, std::size_t b) {
                         return data_[a * dim_ + best] < data_[b * dim_ + best];
                     });
    const double split = data_[rows_[mid] * dim_ + best];
    const long left = build(begin, mid);
    const long right = build(mid, end);
    auto& node = nodes_[static_cast<std::size_t>(id)];
    node.dim = best;
    node.split = split;
    node.left = left;
    node.right = right;
    return id;
}

double KdTree::dist2(const double* a, std::size_t row) const
{
    const double* b = data_ + row * dim_;
    double s = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) {
        const double t = a[d] - b[d];
        s += t * t;
    }
    return s;
}

void KdTree::search(long id, const double* point, std::size_t k, std::size_t exclude, std::vector<Neighbor>& heap) const
{
    const auto& node = nodes_[static_cast<std::size_t>(id)];
    if (node.left < 0) {
        for (std::size_t i = node.begin; i < node.end; ++i) {
            const std::size_t row = rows_[i];
            if (row == exclude) {
                continue;
            }
            Neighbor cand{dist2(point, row), row};
            if (heap.size() < k) {
                heap.push_back(cand);
                std::push_heap(heap.begin(), heap.end());
            } else if (cand < heap.front()) {
                std::pop_heap(heap.begin(), heap.end());
                heap.back() = cand;
                std::push_heap(heap.begin(), heap.end());
            }
        }
        return;
    }
    const double diff = point[node.dim] - node.split;
    const long near = diff <= 0.0 ? node.left : node.right;
    const long far = diff <= 0.0 ? node.right : node.left;
    search(near, point, k, exclude, heap);
    // equal bound still visited so that lower row indices can win ties
    if (heap.size() < k || diff * diff <= heap.front().dist2) {
        search(far, point, k, exclude, heap);
    }
}

std::vector<Neighbor> KdTree::query(const double* point, std::size_t k, std::size_t exclude) const
{
    std::vector<Neighbor> heap;
    if (k == 0 || nodes_.empty()) {
        return heap;
    }
    heap.reserve(k + 1);
    search(0, point, k, exclude, heap);
    std::sort_heap(heap.begin(), heap.end());
    return heap;
}

} // namespace ul
