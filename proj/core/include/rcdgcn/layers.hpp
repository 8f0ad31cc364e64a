#pragma once

#include <vector>

#include "rcdgcn/tab.hpp"
#include "rcdgcn/tensor.hpp"

namespace rcdgcn {

/// One gated temporal-convolution layer: two kernels of [K+1,C_in,C_out]
/// taps sharing a dilation.
struct TcnLayerParams {
    Tensor w1;
    Tensor w2;
    std::size_t dilation = 1;
};

/// h = tanh(w1 * x) (.) sigmoid(w2 * x), convolutions causal and dilated,
/// applied per node. x is [Q,N,C_in]; the output keeps Q.
Tensor gated_tcn(const Tensor& x, const TcnLayerParams& p);

/// Weight matrices W_gamma for hop orders 0..max_order, each [C_in,C_out].
struct GcnLayerParams {
    std::vector<Tensor> w_gamma;
};

/// Spec'd single-step mixing (see graph_conv in tensor.hpp) lifted to typed
/// attention matrices.
Tensor graph_conv_step(const Tensor& x_step, const std::vector<AttentionMatrix>& att,
                       const GcnLayerParams& p, Activation act = Activation::relu);

/// Applies graph_conv_step to every step of a [Q,N,C] sequence with one
/// shared attention set, or per-step sets when `att_per_step` is non-empty.
Tensor graph_conv_seq(const Tensor& h, const std::vector<AttentionMatrix>& att,
                      const std::vector<std::vector<AttentionMatrix>>& att_per_step,
                      const GcnLayerParams& p, Activation act = Activation::relu);

}  // namespace rcdgcn
