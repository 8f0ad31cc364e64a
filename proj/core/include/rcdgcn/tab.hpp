#pragma once

#include <vector>

#include "rcdgcn/graph.hpp"
#include "rcdgcn/tensor.hpp"

namespace rcdgcn {

/**
 * Weights of the Traffic Attention Block. Every input channel (the state
 * channel plus each expanded capacity-feature column) carries one source and
 * one destination weight row of embedding width d_e; a shared projection
 * turns embeddings into scalar propagation utilities. With d_e = 1 the
 * projection is the constant 1 and the block degrades to plain per-channel
 * scalar weights, so the trainable count is exactly 2*(P+L')*d_e; wider
 * embeddings add the d_e projection entries on top.
 */
struct TabParams {
    Tensor w_src;  // [P+L', d_e]
    Tensor w_dst;  // [P+L', d_e]
    Tensor proj;   // [d_e, 1]; trainable iff d_e > 1
    std::size_t d_e = 1;

    std::size_t input_width() const { return w_src.shape()[0]; }
    std::size_t parameter_count() const {
        return 2 * input_width() * d_e + (d_e > 1 ? d_e : 0);
    }
};

/// Adjacency-masked, row-stochastic propagation matrix. Rows whose mask is
/// empty are all-zero; every other row sums to 1.
struct AttentionMatrix {
    Tensor values;  // [N,N]
    BoolMatrix mask;
};

/// How the hop rings share the learned scores: per_ring renormalizes the
/// utilities within every ring mask separately; shared normalizes once over
/// the union of the rings and slices the result per ring.
enum class AttentionMode { per_ring, shared };

/**
 * Pairwise propagation utilities e[i][j] = u_src(i) + u_dst(j) where each
 * side is the linear score of that node's state and capacity features. A
 * constant shift of a whole row cancels in the softmax, so only destination
 * differences steer the attention.
 */
Tensor utility_scores(const Tensor& x_t, const Tensor& z_t, const TabParams& params);

/// Row-wise masked softmax of the scores; masked entries are excluded from
/// the normalization rather than encoded as a large negative value.
AttentionMatrix attention_matrix(const Tensor& e, const BoolMatrix& mask,
                                 bool allow_empty_rows = false);

/// One attention matrix per hop ring 0..max_order, all from the same
/// utility scores.
std::vector<AttentionMatrix> tab_forward(const Tensor& x_t, const Tensor& z_t,
                                         const TabParams& params,
                                         const std::vector<HopMask>& rings,
                                         AttentionMode mode = AttentionMode::per_ring);

/// Fixed uniform propagation over each ring (the attention-free ablation):
/// row-normalized ring masks with no dependence on states or features.
std::vector<AttentionMatrix> uniform_ring_attention(const std::vector<HopMask>& rings);

/// OR of the ring masks (reachability within max_order hops).
BoolMatrix mask_union(const std::vector<HopMask>& rings);

}  // namespace rcdgcn
