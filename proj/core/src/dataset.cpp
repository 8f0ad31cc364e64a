#include "rcdgcn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include "rcdgcn/csv.hpp"
#include "rcdgcn/error.hpp"

namespace rcdgcn {

namespace {

/// Parses one series file into [T,N] aligned to graph order. Empty cells
/// forward-fill per column, zero-fill at the head.
std::vector<double> read_series(const std::string& path, const RoadGraph& g,
                                std::size_t* n_steps_out) {
    const csv::Table t = csv::read_file(path);
    const std::size_t n = g.n_nodes();

    // Column of each node id; headers may be permuted relative to the graph.
    std::vector<std::size_t> col_of_node(n, SIZE_MAX);
    std::map<std::string, std::size_t> header_index;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
        if (!header_index.emplace(t.header[c], c).second) {
            throw SchemaError("'" + path + "': duplicate column '" + t.header[c] + "'");
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        auto it = header_index.find(g.node_ids[i]);
        if (it == header_index.end()) {
            throw SchemaError("'" + path + "': missing column for node '" + g.node_ids[i] + "'");
        }
        col_of_node[i] = it->second;
    }
    if (t.header.size() != n) {
        throw SchemaError("'" + path + "': has " + std::to_string(t.header.size()) +
                          " columns, graph has " + std::to_string(n) + " nodes");
    }

    std::vector<double> out(t.rows.size() * n, 0.0);
    std::vector<bool> seen(n, false);
    std::vector<double> last(n, 0.0);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        if (row.size() != t.header.size()) {
            throw SchemaError("ragged row at " + path + ":" + std::to_string(r + 2));
        }
        for (std::size_t i = 0; i < n; ++i) {
            const std::string& cell = row[col_of_node[i]];
            double v;
            if (cell.empty()) {
                v = seen[i] ? last[i] : 0.0;  // forward fill, zero at head
            } else {
                v = csv::parse_double(cell, path + ":" + std::to_string(r + 2) + " column '" +
                                                g.node_ids[i] + "'");
                seen[i] = true;
            }
            last[i] = v;
            out[r * n + i] = v;
        }
    }
    *n_steps_out = t.rows.size();
    return out;
}

ChannelNorm fit_norm(const std::vector<double>& v, std::size_t begin, std::size_t end,
                     std::size_t stride_block) {
    ChannelNorm nm{v.empty() ? 0.0 : v[begin * stride_block], 0.0};
    nm.max = nm.min;
    for (std::size_t t = begin; t < end; ++t) {
        for (std::size_t i = 0; i < stride_block; ++i) {
            const double x = v[t * stride_block + i];
            nm.min = std::min(nm.min, x);
            nm.max = std::max(nm.max, x);
        }
    }
    return nm;
}

double apply_norm(const ChannelNorm& nm, double v) {
    if (nm.max <= nm.min) return 0.0;
    return std::clamp((v - nm.min) / (nm.max - nm.min), 0.0, 1.0);
}

}  // namespace

FeatureChannel feature_channel_for(const std::string& name) {
    if (name == "I") return {name, FeatureKind::binary, 0};
    if (name == "O") return {name, FeatureKind::ratio, 0};
    if (name == "road_type") return {name, FeatureKind::categorical, 5};
    return {name, FeatureKind::continuous, 0};
}

RawData ingest(const std::string& dir, const RoadGraph& g) {
    namespace fs = std::filesystem;
    RawData raw;
    raw.n_nodes = g.n_nodes();
    raw.speeds = read_series((fs::path(dir) / "speeds.csv").string(), g, &raw.n_steps);

    // Feature files in canonical channel order: the known channels first,
    // any others alphabetically.
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string fn = entry.path().filename().string();
        if (fn.rfind("features_", 0) == 0 && fn.size() > 13 &&
            fn.substr(fn.size() - 4) == ".csv") {
            names.push_back(fn.substr(9, fn.size() - 13));
        }
    }
    const std::vector<std::string> canonical{"I", "O", "road_type", "MT"};
    std::vector<std::string> ordered;
    for (const auto& c : canonical) {
        if (std::find(names.begin(), names.end(), c) != names.end()) ordered.push_back(c);
    }
    std::sort(names.begin(), names.end());
    for (const auto& nm : names) {
        if (std::find(ordered.begin(), ordered.end(), nm) == ordered.end()) {
            ordered.push_back(nm);
        }
    }

    raw.features.resize(raw.n_steps * raw.n_nodes * ordered.size());
    for (std::size_t l = 0; l < ordered.size(); ++l) {
        std::size_t steps = 0;
        const auto series =
            read_series((fs::path(dir) / ("features_" + ordered[l] + ".csv")).string(), g, &steps);
        if (steps != raw.n_steps) {
            throw SchemaError("feature '" + ordered[l] + "' has " + std::to_string(steps) +
                              " steps, speeds.csv has " + std::to_string(raw.n_steps));
        }
        raw.channels.push_back(feature_channel_for(ordered[l]));
        for (std::size_t t = 0; t < raw.n_steps; ++t) {
            for (std::size_t node = 0; node < raw.n_nodes; ++node) {
                raw.features[(t * raw.n_nodes + node) * ordered.size() + l] =
                    series[t * raw.n_nodes + node];
            }
        }
    }
    return raw;
}

double NormalizationSpec::normalize_speed(double v) const { return apply_norm(speed, v); }

double NormalizationSpec::denormalize_speed(double v) const {
    if (speed.max <= speed.min) return speed.min;
    return speed.min + v * (speed.max - speed.min);
}

const FactorBlock& FactorLayout::block(const std::string& name) const {
    for (const auto& b : blocks) {
        if (b.name == name) return b;
    }
    throw ConfigError("factor layout has no block named '" + name + "'");
}

Dataset split_and_normalize(RawData raw, SplitRatios ratios, std::size_t min_split_len) {
    if (ratios.train <= 0.0 || ratios.val <= 0.0 || ratios.test <= 0.0 ||
        std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
        throw ConfigError("split ratios must be positive and sum to 1");
    }
    const std::size_t total = raw.n_steps;
    if (total == 0) {
        throw InsufficientDataError("dataset has no time steps");
    }
    const std::size_t n_train = static_cast<std::size_t>(std::floor(ratios.train * total));
    const std::size_t n_val = static_cast<std::size_t>(std::floor(ratios.val * total));
    const std::size_t n_test = total - n_train - n_val;
    if (min_split_len > 0 &&
        (n_train < min_split_len || n_val < min_split_len || n_test < min_split_len)) {
        throw InsufficientDataError(
            "splits of " + std::to_string(n_train) + "/" + std::to_string(n_val) + "/" +
            std::to_string(n_test) + " steps cannot hold a " + std::to_string(min_split_len) +
            "-step window");
    }

    Dataset ds;
    ds.norm.channels = raw.channels;
    ds.norm.speed = fit_norm(raw.speeds, 0, n_train, raw.n_nodes);
    ds.norm.feature_norms.resize(raw.channels.size());
    const std::size_t n_chan = raw.channels.size();
    for (std::size_t l = 0; l < n_chan; ++l) {
        if (raw.channels[l].kind == FeatureKind::continuous) {
            // per-channel min/max over the train split only
            ChannelNorm nm{raw.feature(0, 0, l), raw.feature(0, 0, l)};
            for (std::size_t t = 0; t < n_train; ++t) {
                for (std::size_t node = 0; node < raw.n_nodes; ++node) {
                    nm.min = std::min(nm.min, raw.feature(t, node, l));
                    nm.max = std::max(nm.max, raw.feature(t, node, l));
                }
            }
            ds.norm.feature_norms[l] = nm;
        }
    }

    ds.layout.blocks.push_back({"speed", 0, 1});
    std::size_t offset = 1;
    for (const auto& ch : raw.channels) {
        const std::size_t width =
            ch.kind == FeatureKind::categorical ? static_cast<std::size_t>(ch.categories) : 1;
        ds.layout.blocks.push_back({ch.name, offset, width});
        offset += width;
    }
    ds.layout.total = offset;
    const std::size_t lp = offset - 1;

    const auto make_split = [&](std::size_t t0, std::size_t len) {
        Split s;
        s.t0 = t0;
        s.len = len;
        s.n_nodes = raw.n_nodes;
        s.p = 1;
        s.lp = lp;
        s.x.resize(len * raw.n_nodes);
        s.z.assign(len * raw.n_nodes * lp, 0.0);
        for (std::size_t t = 0; t < len; ++t) {
            for (std::size_t node = 0; node < raw.n_nodes; ++node) {
                s.x[t * raw.n_nodes + node] = apply_norm(ds.norm.speed, raw.speed(t0 + t, node));
                double* zrow = s.z.data() + (t * raw.n_nodes + node) * lp;
                std::size_t zoff = 0;
                for (std::size_t l = 0; l < n_chan; ++l) {
                    const FeatureChannel& ch = raw.channels[l];
                    const double v = raw.feature(t0 + t, node, l);
                    switch (ch.kind) {
                        case FeatureKind::binary:
                        case FeatureKind::ratio:
                            zrow[zoff++] = v;
                            break;
                        case FeatureKind::categorical: {
                            const int cls = static_cast<int>(v);
                            for (int c = 1; c <= ch.categories; ++c) {
                                zrow[zoff++] = (c == cls) ? 1.0 : 0.0;
                            }
                            break;
                        }
                        case FeatureKind::continuous:
                            zrow[zoff++] = apply_norm(ds.norm.feature_norms[l], v);
                            break;
                    }
                }
            }
        }
        return s;
    };

    ds.train = make_split(0, n_train);
    ds.val = make_split(n_train, n_val);
    ds.test = make_split(n_train + n_val, n_test);
    ds.raw = std::move(raw);
    return ds;
}

WindowSource::WindowSource(const Split& split, std::size_t q, std::size_t t, std::size_t stride)
    : split_(&split), q_(q), t_(t), stride_(stride) {
    if (q == 0 || t == 0 || stride == 0) {
        throw ConfigError("window lengths and stride must be positive");
    }
    count_ = split.len >= q + t ? (split.len - q - t) / stride + 1 : 0;
}

StateWindow WindowSource::window(std::size_t k) const {
    if (k >= count_) {
        throw IndexError("window " + std::to_string(k) + " out of " + std::to_string(count_));
    }
    const Split& s = *split_;
    const std::size_t start = k * stride_;
    const std::size_t n = s.n_nodes, p = s.p, lp = s.lp;
    StateWindow w;
    w.t0 = s.t0 + start;
    w.x.assign(s.x.begin() + static_cast<std::ptrdiff_t>(start * n * p),
               s.x.begin() + static_cast<std::ptrdiff_t>((start + q_) * n * p));
    w.z.assign(s.z.begin() + static_cast<std::ptrdiff_t>(start * n * lp),
               s.z.begin() + static_cast<std::ptrdiff_t>((start + q_) * n * lp));
    w.y.assign(s.x.begin() + static_cast<std::ptrdiff_t>((start + q_) * n * p),
               s.x.begin() + static_cast<std::ptrdiff_t>((start + q_ + t_) * n * p));
    return w;
}

}  // namespace rcdgcn
