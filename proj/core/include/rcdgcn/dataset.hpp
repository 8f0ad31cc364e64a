#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rcdgcn/graph.hpp"

namespace rcdgcn {

enum class FeatureKind { binary, ratio, categorical, continuous };

/// How a raw feature channel is treated downstream: binary and ratio
/// channels pass through untouched, categorical channels are one-hot
/// expanded, continuous channels are min-max normalized on the train split.
struct FeatureChannel {
    std::string name;
    FeatureKind kind = FeatureKind::continuous;
    int categories = 0;  // categorical only, values 1..categories
};

/// Kind assignment by channel name: I is binary, O a ratio, road_type
/// categorical with 5 classes; anything else is continuous.
FeatureChannel feature_channel_for(const std::string& name);

/// Speed and feature series aligned to graph node order.
struct RawData {
    std::size_t n_steps = 0;
    std::size_t n_nodes = 0;
    std::vector<double> speeds;  // [T,N] mph
    std::vector<FeatureChannel> channels;
    std::vector<double> features;  // [T,N,L]

    double speed(std::size_t t, std::size_t n) const { return speeds[t * n_nodes + n]; }
    double feature(std::size_t t, std::size_t n, std::size_t l) const {
        return features[(t * n_nodes + n) * channels.size() + l];
    }
};

/// Reads speeds.csv and every features_*.csv from a dataset directory,
/// matching columns to the graph by header id. Empty cells are forward-
/// filled, then zero-filled at the head of a column.
RawData ingest(const std::string& dir, const RoadGraph& g);

struct ChannelNorm {
    double min = 0.0;
    double max = 0.0;  // max == min marks a constant channel (normalizes to 0)
};

/// Min/max taken over the training split only.
struct NormalizationSpec {
    ChannelNorm speed;
    std::vector<FeatureChannel> channels;
    std::vector<ChannelNorm> feature_norms;  // meaningful for continuous channels

    double normalize_speed(double v) const;
    double denormalize_speed(double v) const;
};

/// Column layout of the concatenated per-node input [speed | expanded
/// features], used to size TAB weights and to map weights back to named
/// factors.
struct FactorBlock {
    std::string name;
    std::size_t offset = 0;
    std::size_t width = 0;
};

struct FactorLayout {
    std::size_t total = 0;
    std::vector<FactorBlock> blocks;  // first block is "speed"

    const FactorBlock& block(const std::string& name) const;
};

/// One chronological slice with normalized states x [len,N,P] and expanded
/// features z [len,N,L'].
struct Split {
    std::size_t t0 = 0;  // absolute step of the first row
    std::size_t len = 0;
    std::size_t n_nodes = 0;
    std::size_t p = 1;
    std::size_t lp = 0;
    std::vector<double> x;
    std::vector<double> z;
};

struct SplitRatios {
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;
};

struct Dataset {
    RawData raw;
    NormalizationSpec norm;
    FactorLayout layout;
    Split train;
    Split val;
    Split test;
};

/**
 * Chronological split (train earliest) with normalization fitted on the
 * train split alone and applied everywhere; out-of-range values clip to
 * [0,1]. When min_split_len is positive, each split must span at least that
 * many steps (InsufficientDataError otherwise).
 */
Dataset split_and_normalize(RawData raw, SplitRatios ratios, std::size_t min_split_len = 0);

/// One training/evaluation sample.
struct StateWindow {
    std::size_t t0 = 0;        // absolute step of the first historical row
    std::vector<double> x;     // [Q,N,P]
    std::vector<double> z;     // [Q,N,L']
    std::vector<double> y;     // [T,N,P]
};

/**
 * Lazy sliding-window view over one split: floor((len-Q-T)/stride)+1
 * windows, none crossing the split boundary; empty when the split is too
 * short. The split must outlive the source.
 */
class WindowSource {
public:
    WindowSource(const Split& split, std::size_t q, std::size_t t, std::size_t stride);

    std::size_t size() const { return count_; }
    std::size_t q() const { return q_; }
    std::size_t horizon() const { return t_; }
    StateWindow window(std::size_t k) const;

private:
    const Split* split_;
    std::size_t q_;
    std::size_t t_;
    std::size_t stride_;
    std::size_t count_;
};

}  // namespace rcdgcn
