#include "rcdgcn/layers.hpp"

#include "rcdgcn/error.hpp"

namespace rcdgcn {

Tensor gated_tcn(const Tensor& x, const TcnLayerParams& p) {
    const Tensor filt = causal_dilated_conv(x, p.w1, p.dilation);
    const Tensor gate = causal_dilated_conv(x, p.w2, p.dilation);
    return mul(tanh(filt), sigmoid(gate));
}

Tensor graph_conv_step(const Tensor& x_step, const std::vector<AttentionMatrix>& att,
                       const GcnLayerParams& p, Activation act) {
    std::vector<Tensor> mats;
    mats.reserve(att.size());
    for (const AttentionMatrix& a : att) mats.push_back(a.values);
    return graph_conv(x_step, mats, p.w_gamma, act);
}

Tensor graph_conv_seq(const Tensor& h, const std::vector<AttentionMatrix>& att,
                      const std::vector<std::vector<AttentionMatrix>>& att_per_step,
                      const GcnLayerParams& p, Activation act) {
    if (h.shape().size() != 3) {
        throw DimensionError("graph_conv_seq: expected [Q,N,C], got " + shape_str(h.shape()));
    }
    const std::size_t q = h.shape()[0];
    if (!att_per_step.empty() && att_per_step.size() != q) {
        throw DimensionError("graph_conv_seq: " + std::to_string(att_per_step.size()) +
                             " attention sets for " + std::to_string(q) + " steps");
    }
    std::vector<Tensor> steps;
    steps.reserve(q);
    for (std::size_t t = 0; t < q; ++t) {
        const auto& a = att_per_step.empty() ? att : att_per_step[t];
        steps.push_back(graph_conv_step(time_slice(h, t), a, p, act));
    }
    return stack_time(steps);
}

}  // namespace rcdgcn
