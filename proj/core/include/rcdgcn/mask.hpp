#pragma once

#include <cstdint>
#include <vector>

namespace rcdgcn {

/// Dense row-major binary matrix used for adjacency, hop rings and
/// attention masks.
struct BoolMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> v;

    BoolMatrix() = default;
    BoolMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0) {}

    std::uint8_t& at(std::size_t i, std::size_t j) { return v[i * cols + j]; }
    std::uint8_t at(std::size_t i, std::size_t j) const { return v[i * cols + j]; }

    static BoolMatrix identity(std::size_t n) {
        BoolMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1;
        return m;
    }

    bool operator==(const BoolMatrix& o) const {
        return rows == o.rows && cols == o.cols && v == o.v;
    }
};

}  // namespace rcdgcn
