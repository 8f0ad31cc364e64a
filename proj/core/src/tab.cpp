#include "rcdgcn/tab.hpp"

#include "rcdgcn/error.hpp"

namespace rcdgcn {

Tensor utility_scores(const Tensor& x_t, const Tensor& z_t, const TabParams& params) {
    if (x_t.shape().size() != 2 || z_t.shape().size() != 2 ||
        x_t.shape()[0] != z_t.shape()[0]) {
        throw DimensionError("utility_scores: states " + shape_str(x_t.shape()) +
                             " vs features " + shape_str(z_t.shape()));
    }
    const std::size_t width = x_t.shape()[1] + z_t.shape()[1];
    if (width != params.input_width()) {
        throw DimensionError("utility_scores: " + std::to_string(width) +
                             " input channels vs weights for " +
                             std::to_string(params.input_width()));
    }
    const Tensor xz = concat_cols(x_t, z_t);
    const Tensor u_src = matmul(matmul(xz, params.w_src), params.proj);  // [N,1]
    const Tensor u_dst = matmul(matmul(xz, params.w_dst), params.proj);
    return outer_sum(u_src, u_dst);
}

AttentionMatrix attention_matrix(const Tensor& e, const BoolMatrix& mask,
                                 bool allow_empty_rows) {
    return {masked_row_softmax(e, mask, allow_empty_rows), mask};
}

std::vector<AttentionMatrix> tab_forward(const Tensor& x_t, const Tensor& z_t,
                                         const TabParams& params,
                                         const std::vector<HopMask>& rings,
                                         AttentionMode mode) {
    const Tensor e = utility_scores(x_t, z_t, params);
    std::vector<AttentionMatrix> out;
    out.reserve(rings.size());
    if (mode == AttentionMode::per_ring) {
        for (const HopMask& ring : rings) {
            out.push_back(attention_matrix(e, ring.mask, /*allow_empty_rows=*/true));
        }
    } else {
        // One softmax over the union of the rings, then per-ring slices of
        // the shared matrix. Ring slices are sub-stochastic; their union is
        // row-stochastic.
        BoolMatrix all(mask_union(rings));
        const Tensor shared = masked_row_softmax(e, all, /*allow_empty_rows=*/true);
        for (const HopMask& ring : rings) {
            out.push_back({apply_mask(shared, ring.mask), ring.mask});
        }
    }
    return out;
}

BoolMatrix mask_union(const std::vector<HopMask>& rings) {
    if (rings.empty()) return {};
    BoolMatrix u(rings[0].mask.rows, rings[0].mask.cols);
    for (const HopMask& r : rings) {
        for (std::size_t i = 0; i < u.v.size(); ++i) u.v[i] |= r.mask.v[i];
    }
    return u;
}

std::vector<AttentionMatrix> uniform_ring_attention(const std::vector<HopMask>& rings) {
    std::vector<AttentionMatrix> out;
    out.reserve(rings.size());
    for (const HopMask& ring : rings) {
        const std::size_t n = ring.mask.rows;
        std::vector<double> vals(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t deg = 0;
            for (std::size_t j = 0; j < n; ++j) deg += ring.mask.at(i, j);
            if (deg == 0) continue;
            const double w = 1.0 / static_cast<double>(deg);
            for (std::size_t j = 0; j < n; ++j) {
                if (ring.mask.at(i, j)) vals[i * n + j] = w;
            }
        }
        out.push_back({Tensor::from({n, n}, std::move(vals)), ring.mask});
    }
    return out;
}

}  // namespace rcdgcn
