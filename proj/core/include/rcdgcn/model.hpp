#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rcdgcn/dataset.hpp"
#include "rcdgcn/graph.hpp"
#include "rcdgcn/layers.hpp"
#include "rcdgcn/tab.hpp"

namespace rcdgcn {

enum class Variant { rcdgcn, rcdgcn_r, fcn };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

/// All architecture knobs. Defaults give the full model; tests and configs
/// shrink them for desk-scale runs.
struct Hyper {
    std::size_t q = 12;        // historical steps
    std::size_t horizon = 3;   // predicted steps T
    std::size_t p = 1;         // state channels
    std::size_t lp = 0;        // expanded capacity-feature width
    std::size_t n_nodes = 0;
    std::size_t max_hop = 3;   // hop rings 0..max_hop
    std::size_t d_e = 1;       // TAB embedding width
    std::size_t tcn_channels = 32;
    std::vector<std::size_t> dilations = {1, 2};  // per TCN stack
    std::size_t taps = 2;      // K+1 kernel taps
    std::size_t fcn_hidden = 256;
    AttentionMode attention_mode = AttentionMode::per_ring;
    bool per_step_attention = false;
};

/**
 * Trainable state of one model variant plus the fixed graph structures it
 * runs on. The spatial/temporal stack is TCN -> graph conv -> TCN -> graph
 * conv -> linear head reading the final step.
 */
struct ModelParams {
    Variant variant = Variant::rcdgcn;
    Hyper hyper;

    TabParams tab;  // rcdgcn only
    std::vector<TcnLayerParams> tcn1;
    GcnLayerParams gcn1;
    std::vector<TcnLayerParams> tcn2;
    GcnLayerParams gcn2;
    Tensor head;  // [C, T*P]

    Tensor fcn_w1, fcn_b1, fcn_w2, fcn_b2;  // fcn only

    std::vector<HopMask> rings;                  // from the graph, fixed
    std::vector<AttentionMatrix> fixed_att;      // rcdgcn_r propagation

    bool has_tab() const { return variant == Variant::rcdgcn; }

    /// Trainable tensors in a stable order (checkpoint and init order).
    std::vector<std::pair<std::string, Tensor>> named_params() const;

    std::size_t parameter_count() const;
    void zero_grads() const;
};

/// Fan-in uniform initialization of all weights (biases zero) from the
/// seeded generator; bit-identical for identical (variant, hyper, graph,
/// seed). Throws ConfigError when the hyper block contradicts the graph.
ModelParams init_model(Variant variant, const Hyper& hyper, const RoadGraph& graph,
                       std::uint64_t seed);

/// Full forward pass producing a [T,N,P] normalized prediction tensor;
/// gradients flow when recorded on an active tape.
Tensor forward(const ModelParams& m, const StateWindow& w);

/// Forward pass without recording; returns the raw prediction buffer.
std::vector<double> predict(const ModelParams& m, const StateWindow& w);

/// Checkpoint layout: magic "RCDG", u16 format version, u32 manifest byte
/// count, a text manifest (variant, hyper and meta key-value lines, one
/// `tensor <name> <rank> <dims...>` line per buffer) and the raw
/// little-endian f64 buffers in manifest order.
void save_checkpoint(const ModelParams& m, const std::string& path,
                     const std::map<std::string, std::string>& meta = {});

/// Rebuilds the model against the given graph. Throws CheckpointError on a
/// bad magic/version, truncation, or a graph whose size disagrees with the
/// manifest. Meta lines land in *meta when provided.
ModelParams load_checkpoint(const std::string& path, const RoadGraph& graph,
                            std::map<std::string, std::string>* meta = nullptr);

}  // namespace rcdgcn
