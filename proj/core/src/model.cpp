#include "rcdgcn/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rcdgcn/error.hpp"
#include "rcdgcn/rng.hpp"

namespace rcdgcn {

namespace {

constexpr char kMagic[4] = {'R', 'C', 'D', 'G'};
constexpr std::uint16_t kFormatVersion = 1;

Tensor fan_in_uniform(std::vector<std::size_t> shape, std::size_t fan_in, SplitMix64& rng) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> data(n);
    for (double& v : data) v = rng.uniform(-bound, bound);
    return Tensor::from(std::move(shape), std::move(data), /*requires_grad=*/true);
}

std::string dilations_str(const std::vector<std::size_t>& d) {
    std::string s;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(d[i]);
    }
    return s;
}

std::vector<std::size_t> parse_dilations(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(static_cast<std::size_t>(std::stoull(item)));
    }
    return out;
}

}  // namespace

std::string to_string(Variant v) {
    switch (v) {
        case Variant::rcdgcn: return "rcdgcn";
        case Variant::rcdgcn_r: return "rcdgcn_r";
        case Variant::fcn: return "fcn";
    }
    return "rcdgcn";
}

Variant variant_from_string(const std::string& s) {
    if (s == "rcdgcn") return Variant::rcdgcn;
    if (s == "rcdgcn_r") return Variant::rcdgcn_r;
    if (s == "fcn") return Variant::fcn;
    throw ConfigError("unknown model variant '" + s + "'");
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named_params() const {
    std::vector<std::pair<std::string, Tensor>> out;
    if (variant == Variant::fcn) {
        out.emplace_back("fcn.w1", fcn_w1);
        out.emplace_back("fcn.b1", fcn_b1);
        out.emplace_back("fcn.w2", fcn_w2);
        out.emplace_back("fcn.b2", fcn_b2);
        return out;
    }
    if (has_tab()) {
        out.emplace_back("tab.w_src", tab.w_src);
        out.emplace_back("tab.w_dst", tab.w_dst);
        if (tab.d_e > 1) out.emplace_back("tab.proj", tab.proj);
    }
    const auto add_stack = [&out](const char* prefix, const std::vector<TcnLayerParams>& stack) {
        for (std::size_t i = 0; i < stack.size(); ++i) {
            const std::string base = std::string(prefix) + "." + std::to_string(i);
            out.emplace_back(base + ".w1", stack[i].w1);
            out.emplace_back(base + ".w2", stack[i].w2);
        }
    };
    const auto add_gcn = [&out](const char* prefix, const GcnLayerParams& g) {
        for (std::size_t i = 0; i < g.w_gamma.size(); ++i) {
            out.emplace_back(std::string(prefix) + ".w" + std::to_string(i), g.w_gamma[i]);
        }
    };
    add_stack("tcn1", tcn1);
    add_gcn("gcn1", gcn1);
    add_stack("tcn2", tcn2);
    add_gcn("gcn2", gcn2);
    out.emplace_back("head.w", head);
    return out;
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : named_params()) n += t.numel();
    return n;
}

void ModelParams::zero_grads() const {
    for (auto& [name, t] : named_params()) {
        Tensor(t).zero_grad();
    }
}

ModelParams init_model(Variant variant, const Hyper& hyper, const RoadGraph& graph,
                       std::uint64_t seed) {
    if (hyper.n_nodes != graph.n_nodes()) {
        throw ConfigError("hyper names " + std::to_string(hyper.n_nodes) + " nodes, graph has " +
                          std::to_string(graph.n_nodes()));
    }
    if (hyper.q == 0 || hyper.horizon == 0 || hyper.p == 0) {
        throw ConfigError("q, horizon and p must be positive");
    }
    if (variant == Variant::rcdgcn && hyper.d_e == 0) {
        throw ConfigError("TAB embedding width must be positive");
    }
    if (variant != Variant::fcn && (hyper.tcn_channels == 0 || hyper.taps == 0 ||
                                    hyper.dilations.empty())) {
        throw ConfigError("TCN needs channels, taps and at least one dilation");
    }

    ModelParams m;
    m.variant = variant;
    m.hyper = hyper;
    m.rings = hop_masks(graph, hyper.max_hop);

    SplitMix64 rng(seed);
    const std::size_t n = hyper.n_nodes;
    const std::size_t qnp = hyper.q * n * hyper.p;
    const std::size_t tnp = hyper.horizon * n * hyper.p;

    if (variant == Variant::fcn) {
        m.fcn_w1 = fan_in_uniform({qnp, hyper.fcn_hidden}, qnp, rng);
        m.fcn_b1 = Tensor::zeros({1, hyper.fcn_hidden}, /*requires_grad=*/true);
        m.fcn_w2 = fan_in_uniform({hyper.fcn_hidden, tnp}, hyper.fcn_hidden, rng);
        m.fcn_b2 = Tensor::zeros({1, tnp}, /*requires_grad=*/true);
        return m;
    }

    if (variant == Variant::rcdgcn) {
        const std::size_t width = hyper.p + hyper.lp;
        m.tab.d_e = hyper.d_e;
        m.tab.w_src = fan_in_uniform({width, hyper.d_e}, width, rng);
        m.tab.w_dst = fan_in_uniform({width, hyper.d_e}, width, rng);
        m.tab.proj = hyper.d_e > 1 ? fan_in_uniform({hyper.d_e, 1}, hyper.d_e, rng)
                                   : Tensor::full({1, 1}, 1.0);
    } else {
        m.fixed_att = uniform_ring_attention(m.rings);
    }

    const std::size_t c = hyper.tcn_channels;
    const auto make_stack = [&](std::size_t c_in) {
        std::vector<TcnLayerParams> stack;
        std::size_t cin = c_in;
        for (std::size_t d : hyper.dilations) {
            TcnLayerParams l;
            l.dilation = d;
            l.w1 = fan_in_uniform({hyper.taps, cin, c}, hyper.taps * cin, rng);
            l.w2 = fan_in_uniform({hyper.taps, cin, c}, hyper.taps * cin, rng);
            stack.push_back(std::move(l));
            cin = c;
        }
        return stack;
    };
    const auto make_gcn = [&] {
        GcnLayerParams g;
        for (std::size_t i = 0; i <= hyper.max_hop; ++i) {
            g.w_gamma.push_back(fan_in_uniform({c, c}, c, rng));
        }
        return g;
    };

    m.tcn1 = make_stack(hyper.p);
    m.gcn1 = make_gcn();
    m.tcn2 = make_stack(c);
    m.gcn2 = make_gcn();
    m.head = fan_in_uniform({c, hyper.horizon * hyper.p}, c, rng);
    return m;
}

namespace {

// Constant (non-recorded) tensor views of the window buffers.
Tensor window_x(const StateWindow& w, const Hyper& h) {
    return Tensor::from({h.q, h.n_nodes, h.p}, w.x);
}

Tensor step_slice(const std::vector<double>& buf, std::size_t n, std::size_t c, std::size_t t) {
    std::vector<double> v(buf.begin() + static_cast<std::ptrdiff_t>(t * n * c),
                          buf.begin() + static_cast<std::ptrdiff_t>((t + 1) * n * c));
    return Tensor::from({n, c}, std::move(v));
}

}  // namespace

Tensor forward(const ModelParams& m, const StateWindow& w) {
    const Hyper& h = m.hyper;
    if (w.x.size() != h.q * h.n_nodes * h.p || w.y.size() != h.horizon * h.n_nodes * h.p) {
        throw DimensionError("forward: window does not match hyper (x " +
                             std::to_string(w.x.size()) + ", y " + std::to_string(w.y.size()) +
                             ")");
    }

    if (m.variant == Variant::fcn) {
        const Tensor flat = Tensor::from({1, h.q * h.n_nodes * h.p}, w.x);
        const Tensor hidden = relu(add(matmul(flat, m.fcn_w1), m.fcn_b1));
        const Tensor out = add(matmul(hidden, m.fcn_w2), m.fcn_b2);
        return reshape(out, {h.horizon, h.n_nodes, h.p});
    }

    // Attention: learned from the window for rcdgcn, fixed uniform rings for
    // the ablation.
    std::vector<AttentionMatrix> att;
    std::vector<std::vector<AttentionMatrix>> att_per_step;
    if (m.variant == Variant::rcdgcn) {
        if (w.z.size() != h.q * h.n_nodes * h.lp) {
            throw DimensionError("forward: feature block of " + std::to_string(w.z.size()) +
                                 " values does not match hyper");
        }
        if (h.per_step_attention) {
            att_per_step.resize(h.q);
            for (std::size_t t = 0; t < h.q; ++t) {
                const Tensor xt = step_slice(w.x, h.n_nodes, h.p, t);
                const Tensor zt = step_slice(w.z, h.n_nodes, h.lp, t);
                att_per_step[t] = tab_forward(xt, zt, m.tab, m.rings, h.attention_mode);
            }
        } else {
            // Most recent historical step feeds the attention block.
            const Tensor xt = step_slice(w.x, h.n_nodes, h.p, h.q - 1);
            const Tensor zt = step_slice(w.z, h.n_nodes, h.lp, h.q - 1);
            att = tab_forward(xt, zt, m.tab, m.rings, h.attention_mode);
        }
    } else {
        att = m.fixed_att;
    }

    Tensor x = window_x(w, h);
    for (const TcnLayerParams& l : m.tcn1) x = gated_tcn(x, l);
    x = graph_conv_seq(x, att, att_per_step, m.gcn1, Activation::relu);
    for (const TcnLayerParams& l : m.tcn2) x = gated_tcn(x, l);
    x = graph_conv_seq(x, att, att_per_step, m.gcn2, Activation::relu);

    const Tensor last = time_slice(x, h.q - 1);        // [N,C]
    const Tensor out = matmul(last, m.head);           // [N, T*P]
    return split_horizon(out, h.horizon, h.p);
}

std::vector<double> predict(const ModelParams& m, const StateWindow& w) {
    return forward(m, w).values();
}

// ---- checkpoint ------------------------------------------------------------

void save_checkpoint(const ModelParams& m, const std::string& path,
                     const std::map<std::string, std::string>& meta) {
    const Hyper& h = m.hyper;
    std::string manifest;
    manifest += "variant = " + to_string(m.variant) + "\n";
    manifest += "hyper.q = " + std::to_string(h.q) + "\n";
    manifest += "hyper.horizon = " + std::to_string(h.horizon) + "\n";
    manifest += "hyper.p = " + std::to_string(h.p) + "\n";
    manifest += "hyper.lp = " + std::to_string(h.lp) + "\n";
    manifest += "hyper.n_nodes = " + std::to_string(h.n_nodes) + "\n";
    manifest += "hyper.max_hop = " + std::to_string(h.max_hop) + "\n";
    manifest += "hyper.d_e = " + std::to_string(h.d_e) + "\n";
    manifest += "hyper.tcn_channels = " + std::to_string(h.tcn_channels) + "\n";
    manifest += "hyper.dilations = " + dilations_str(h.dilations) + "\n";
    manifest += "hyper.taps = " + std::to_string(h.taps) + "\n";
    manifest += "hyper.fcn_hidden = " + std::to_string(h.fcn_hidden) + "\n";
    manifest += std::string("hyper.attention_mode = ") +
                (h.attention_mode == AttentionMode::per_ring ? "per_ring" : "shared") + "\n";
    manifest += std::string("hyper.per_step_attention = ") +
                (h.per_step_attention ? "1" : "0") + "\n";
    for (const auto& [k, v] : meta) {
        manifest += "meta." + k + " = " + v + "\n";
    }
    const auto params = m.named_params();
    for (const auto& [name, t] : params) {
        manifest += "tensor " + name + " " + std::to_string(t.shape().size());
        for (std::size_t d : t.shape()) manifest += " " + std::to_string(d);
        manifest += "\n";
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    out.write(kMagic, 4);
    const std::uint16_t version = kFormatVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::uint32_t mlen = static_cast<std::uint32_t>(manifest.size());
    out.write(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
    out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
    for (const auto& [name, t] : params) {
        out.write(reinterpret_cast<const char*>(t.values().data()),
                  static_cast<std::streamsize>(t.numel() * sizeof(double)));
    }
    if (!out) {
        throw IoError("write failed for '" + path + "'");
    }
}

ModelParams load_checkpoint(const std::string& path, const RoadGraph& graph,
                            std::map<std::string, std::string>* meta) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CheckpointError("cannot open checkpoint '" + path + "'");
    }
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw CheckpointError("'" + path + "' is not a checkpoint (bad magic)");
    }
    std::uint16_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (!in || version != kFormatVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    std::uint32_t mlen = 0;
    in.read(reinterpret_cast<char*>(&mlen), sizeof(mlen));
    std::string manifest(mlen, '\0');
    in.read(manifest.data(), mlen);
    if (!in) {
        throw CheckpointError("truncated checkpoint manifest in '" + path + "'");
    }

    std::map<std::string, std::string> kv;
    std::vector<std::pair<std::string, std::vector<std::size_t>>> tensors;
    std::stringstream ss(manifest);
    std::string line;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        if (line.rfind("tensor ", 0) == 0) {
            std::stringstream ls(line.substr(7));
            std::string name;
            std::size_t rank = 0;
            ls >> name >> rank;
            std::vector<std::size_t> shape(rank);
            for (auto& d : shape) ls >> d;
            if (!ls) {
                throw CheckpointError("malformed tensor line '" + line + "'");
            }
            tensors.emplace_back(name, shape);
        } else {
            const auto eq = line.find(" = ");
            if (eq == std::string::npos) {
                throw CheckpointError("malformed manifest line '" + line + "'");
            }
            kv[line.substr(0, eq)] = line.substr(eq + 3);
        }
    }

    const auto need = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) {
            throw CheckpointError("manifest missing '" + key + "'");
        }
        return it->second;
    };

    Hyper h;
    const Variant variant = variant_from_string(need("variant"));
    h.q = std::stoull(need("hyper.q"));
    h.horizon = std::stoull(need("hyper.horizon"));
    h.p = std::stoull(need("hyper.p"));
    h.lp = std::stoull(need("hyper.lp"));
    h.n_nodes = std::stoull(need("hyper.n_nodes"));
    h.max_hop = std::stoull(need("hyper.max_hop"));
    h.d_e = std::stoull(need("hyper.d_e"));
    h.tcn_channels = std::stoull(need("hyper.tcn_channels"));
    h.dilations = parse_dilations(need("hyper.dilations"));
    h.taps = std::stoull(need("hyper.taps"));
    h.fcn_hidden = std::stoull(need("hyper.fcn_hidden"));
    h.attention_mode = need("hyper.attention_mode") == "shared" ? AttentionMode::shared
                                                                : AttentionMode::per_ring;
    h.per_step_attention = need("hyper.per_step_attention") == "1";

    if (h.n_nodes != graph.n_nodes()) {
        throw CheckpointError("checkpoint was trained on " + std::to_string(h.n_nodes) +
                              " nodes, graph has " + std::to_string(graph.n_nodes()));
    }
    if (meta != nullptr) {
        for (const auto& [k, v] : kv) {
            if (k.rfind("meta.", 0) == 0) (*meta)[k.substr(5)] = v;
        }
    }

    ModelParams m = init_model(variant, h, graph, /*seed=*/0);
    auto params = m.named_params();
    if (params.size() != tensors.size()) {
        throw CheckpointError("checkpoint lists " + std::to_string(tensors.size()) +
                              " tensors, model has " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& [name, t] = params[i];
        if (name != tensors[i].first || t.shape() != tensors[i].second) {
            throw CheckpointError("tensor mismatch at '" + tensors[i].first + "'");
        }
        Tensor handle = t;
        auto& buf = handle.mutable_values();
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(double)));
        if (!in) {
            throw CheckpointError("truncated tensor data in '" + path + "'");
        }
    }
    char extra = 0;
    if (in.read(&extra, 1)) {
        throw CheckpointError("trailing bytes after tensor data in '" + path + "'");
    }
    return m;
}

}  // namespace rcdgcn
