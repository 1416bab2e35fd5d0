#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

namespace potts {

// Disjoint-set forest with path compression and union by size; used for
// bond-cluster extraction in the Swendsen-Wang update.
class UnionFind {
public:
    explicit UnionFind(std::int64_t n) : parent_(static_cast<std::size_t>(n)), size_(static_cast<std::size_t>(n), 1) {
        std::iota(parent_.begin(), parent_.end(), std::int64_t{0});
    }

    std::int64_t find(std::int64_t x) {
        std::int64_t root = x;
        while (parent_[static_cast<std::size_t>(root)] != root) root = parent_[static_cast<std::size_t>(root)];
        while (parent_[static_cast<std::size_t>(x)] != root) {
            const std::int64_t next = parent_[static_cast<std::size_t>(x)];
            parent_[static_cast<std::size_t>(x)] = root;
            x = next;
        }
        return root;
    }

    void unite(std::int64_t a, std::int64_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (size_[static_cast<std::size_t>(a)] < size_[static_cast<std::size_t>(b)]) std::swap(a, b);
        parent_[static_cast<std::size_t>(b)] = a;
        size_[static_cast<std::size_t>(a)] += size_[static_cast<std::size_t>(b)];
    }

private:
    std::vector<std::int64_t> parent_;
    std::vector<std::int64_t> size_;
};

}  // namespace potts
