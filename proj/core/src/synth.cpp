#include "rcdgcn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "rcdgcn/csv.hpp"
#include "rcdgcn/error.hpp"

namespace rcdgcn {

namespace {

constexpr double kCapacityExponent = 1.5;  // lane-drop to speed-drop curvature
constexpr double kSpillbackFactor = 0.8;
constexpr int kRecoveryMinutes = 30;

double capacity_factor(const std::vector<IncidentEvent>& incidents, std::size_t node,
                       std::size_t t, std::size_t recovery_steps) {
    double f = 1.0;
    for (const IncidentEvent& e : incidents) {
        if (e.node != node) continue;
        const double floor = std::pow(e.open_lane_ratio, kCapacityExponent);
        if (t >= e.start && t <= e.end) {
            f = std::min(f, floor);
        } else if (t > e.end && t <= e.end + recovery_steps && recovery_steps > 0) {
            const double frac =
                static_cast<double>(t - e.end) / static_cast<double>(recovery_steps);
            f = std::min(f, floor + (1.0 - floor) * frac);
        }
    }
    return f;
}

}  // namespace

std::string to_string(IncidentKind k) {
    switch (k) {
        case IncidentKind::accident: return "accident";
        case IncidentKind::emergency_construction: return "emergency_construction";
        case IncidentKind::planned_construction: return "planned_construction";
    }
    return "accident";
}

IncidentKind incident_kind_from_string(const std::string& s) {
    if (s == "accident") return IncidentKind::accident;
    if (s == "emergency_construction") return IncidentKind::emergency_construction;
    if (s == "planned_construction") return IncidentKind::planned_construction;
    throw SchemaError("unknown incident kind '" + s + "'");
}

SyntheticData generate(const SyntheticScenario& s) {
    const std::size_t n = s.graph.n_nodes();
    const std::size_t horizon = s.horizon;
    if (n == 0 || horizon == 0) {
        throw ConfigError("scenario needs at least one node and one step");
    }
    if (s.free_flow.size() != n) {
        throw ConfigError("scenario free_flow must list one speed per node");
    }
    for (double ff : s.free_flow) {
        if (ff <= 0.0) throw ConfigError("free_flow speeds must be positive");
    }
    if (s.daily_profile.empty()) {
        throw ConfigError("scenario daily_profile is empty");
    }
    for (const IncidentEvent& e : s.incidents) {
        if (e.node >= n) {
            throw IndexError("incident node " + std::to_string(e.node) + " out of range 0.." +
                             std::to_string(n - 1));
        }
        if (e.start >= e.end || e.end >= horizon) {
            throw IndexError("incident span [" + std::to_string(e.start) + "," +
                             std::to_string(e.end) + "] outside horizon " +
                             std::to_string(horizon));
        }
        if (e.open_lane_ratio < 0.0 || e.open_lane_ratio > 1.0) {
            throw ConfigError("open_lane_ratio must lie in [0,1]");
        }
    }

    const std::size_t recovery_steps =
        s.step_minutes > 0 ? static_cast<std::size_t>(kRecoveryMinutes / s.step_minutes) : 0;
    const std::size_t period = s.daily_profile.size();

    // Successor lists once; spillback scans them every step.
    std::vector<std::vector<std::size_t>> succ(n);
    for (std::size_t i = 0; i < n; ++i) succ[i] = s.graph.successors(i);

    SyntheticData out;
    out.n_steps = horizon;
    out.n_nodes = n;
    out.speeds.resize(horizon * n);
    out.feature_names = s.feature_names;
    const std::size_t n_feat = s.feature_names.size();
    out.features.resize(horizon * n * n_feat);

    SplitMix64 rng(s.seed);
    for (std::size_t t = 0; t < horizon; ++t) {
        for (std::size_t node = 0; node < n; ++node) {
            const double base = s.free_flow[node] * s.daily_profile[t % period];
            const double cap = capacity_factor(s.incidents, node, t, recovery_steps);
            double cong = 1.0;
            if (t > 0) {
                for (std::size_t m : succ[node]) {
                    if (out.speed(t - 1, m) < 0.5 * s.free_flow[m]) {
                        cong = kSpillbackFactor;
                        break;
                    }
                }
            }
            double v = base * cap * cong;
            if (s.noise_sigma > 0.0) {
                v += rng.gaussian() * s.noise_sigma;
            }
            out.speeds[t * n + node] = std::clamp(v, 0.0, s.free_flow[node]);

            for (std::size_t l = 0; l < n_feat; ++l) {
                const std::string& name = s.feature_names[l];
                double fv = 0.0;
                if (name == "I" || name == "O") {
                    bool active = false;
                    double ratio = 1.0;
                    for (const IncidentEvent& e : s.incidents) {
                        if (e.node == node && t >= e.start && t <= e.end) {
                            active = true;
                            ratio = std::min(ratio, e.open_lane_ratio);
                        }
                    }
                    fv = name == "I" ? (active ? 1.0 : 0.0) : ratio;
                } else if (name == "road_type") {
                    fv = static_cast<double>(s.graph.attrs[node].road_type);
                } else if (name == "MT") {
                    fv = s.graph.attrs[node].aadt * s.graph.attrs[node].lanes;
                } else {
                    throw ConfigError("unknown feature channel '" + name + "'");
                }
                out.features[(t * n + node) * n_feat + l] = fv;
            }
        }
    }
    return out;
}

void export_dataset(const SyntheticData& d, const RoadGraph& g, const std::string& out_dir) {
    namespace fs = std::filesystem;
    if (d.n_nodes != g.n_nodes()) {
        throw DimensionError("dataset has " + std::to_string(d.n_nodes) + " nodes, graph has " +
                             std::to_string(g.n_nodes()));
    }
    if (d.speeds.size() != d.n_steps * d.n_nodes ||
        d.features.size() != d.n_steps * d.n_nodes * d.feature_names.size()) {
        throw DimensionError("dataset arrays are not shape-consistent");
    }
    std::error_code ec;
    fs::create_directories(out_dir, ec);

    const auto write_series = [&](const std::string& path, auto value_at) {
        csv::Writer w;
        w.header(g.node_ids);
        std::vector<std::string> row(d.n_nodes);
        for (std::size_t t = 0; t < d.n_steps; ++t) {
            for (std::size_t node = 0; node < d.n_nodes; ++node) {
                row[node] = csv::format_double(value_at(t, node));
            }
            w.row(row);
        }
        w.save(path);
    };

    write_series((fs::path(out_dir) / "speeds.csv").string(),
                 [&](std::size_t t, std::size_t node) { return d.speed(t, node); });
    for (std::size_t l = 0; l < d.feature_names.size(); ++l) {
        write_series((fs::path(out_dir) / ("features_" + d.feature_names[l] + ".csv")).string(),
                     [&](std::size_t t, std::size_t node) { return d.feature(t, node, l); });
    }
}

void save_incidents(const std::vector<IncidentEvent>& incidents, const RoadGraph& g,
                    const std::string& path) {
    csv::Writer w;
    w.header({"node_id", "start", "end", "open_lane_ratio", "kind"});
    for (const IncidentEvent& e : incidents) {
        w.row({g.node_ids[e.node], std::to_string(e.start), std::to_string(e.end),
               csv::format_double(e.open_lane_ratio), to_string(e.kind)});
    }
    w.save(path);
}

std::vector<IncidentEvent> load_incidents(const std::string& path, const RoadGraph& g) {
    const csv::Table t = csv::read_file(path);
    if (t.header != std::vector<std::string>{"node_id", "start", "end", "open_lane_ratio",
                                             "kind"}) {
        throw SchemaError("'" + path + "': unexpected incident header");
    }
    std::vector<IncidentEvent> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string where = path + ":" + std::to_string(r + 2);
        if (row.size() != 5) throw SchemaError("ragged row at " + where);
        IncidentEvent e;
        e.node = g.index_of(row[0]);
        e.start = static_cast<std::size_t>(csv::parse_double(row[1], where));
        e.end = static_cast<std::size_t>(csv::parse_double(row[2], where));
        e.open_lane_ratio = csv::parse_double(row[3], where);
        e.kind = incident_kind_from_string(row[4]);
        out.push_back(e);
    }
    return out;
}

RoadGraph random_graph(std::size_t n_nodes, std::size_t extra_edges, double two_way_fraction,
                       std::uint64_t seed) {
    if (n_nodes < 2) {
        throw ConfigError("random_graph needs at least 2 nodes");
    }
    SplitMix64 rng(seed);

    std::vector<std::string> ids(n_nodes);
    std::vector<NodeAttrs> attrs(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) {
        ids[i] = std::to_string(24000000 + 1013 * i);
        NodeAttrs a;
        const double u = rng.uniform01();
        a.road_type = u < 0.25 ? 1 : u < 0.55 ? 2 : u < 0.80 ? 3 : u < 0.92 ? 4 : 5;
        a.length_m = rng.uniform(200.0, 2500.0);
        a.lanes = 1 + static_cast<int>(rng.bounded(4));
        a.aadt = rng.uniform(5000.0, 150000.0);
        attrs[i] = a;
    }

    std::set<std::pair<std::size_t, std::size_t>> edge_set;
    for (std::size_t i = 0; i < n_nodes; ++i) {
        edge_set.emplace(i, (i + 1) % n_nodes);  // ring keeps everything reachable
    }
    for (std::size_t i = 0; i < n_nodes; ++i) {
        if (rng.uniform01() < two_way_fraction) {
            edge_set.emplace((i + 1) % n_nodes, i);
        }
    }
    std::size_t added = 0;
    std::size_t guard = 0;
    while (added < extra_edges && guard < 100 * (extra_edges + 1)) {
        ++guard;
        const std::size_t a = static_cast<std::size_t>(rng.bounded(n_nodes));
        const std::size_t b = static_cast<std::size_t>(rng.bounded(n_nodes));
        if (a == b) continue;
        if (edge_set.emplace(a, b).second) ++added;
    }

    std::vector<std::pair<std::size_t, std::size_t>> edges(edge_set.begin(), edge_set.end());
    return build_graph(std::move(ids), std::move(attrs), std::move(edges));
}

std::vector<double> default_free_flows(const RoadGraph& g, std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<double> out(g.n_nodes());
    for (std::size_t i = 0; i < g.n_nodes(); ++i) {
        double base = 30.0;
        switch (g.attrs[i].road_type) {
            case 1: base = 60.0; break;  // highway
            case 2: base = 45.0; break;  // arterial
            case 3: base = 30.0; break;  // minor road
            case 4: base = 35.0; break;  // ramp
            case 5: base = 50.0; break;  // tunnel
        }
        out[i] = base + rng.uniform(-4.0, 4.0);
    }
    return out;
}

std::vector<double> default_daily_profile() {
    std::vector<double> p(288);
    for (std::size_t s = 0; s < 288; ++s) {
        const double am = (static_cast<double>(s) - 102.0) / 18.0;   // ~08:30 peak
        const double pm = (static_cast<double>(s) - 210.0) / 22.0;   // ~17:30 peak
        p[s] = 1.0 - 0.45 * std::exp(-am * am) - 0.50 * std::exp(-pm * pm);
    }
    return p;
}

std::vector<IncidentEvent> random_incidents(std::size_t count, std::size_t horizon,
                                            std::size_t n_nodes, std::size_t dur_min,
                                            std::size_t dur_max, double full_closure_fraction,
                                            std::uint64_t seed) {
    if (dur_min == 0 || dur_max < dur_min || horizon <= dur_max + 8) {
        throw ConfigError("incident durations inconsistent with horizon");
    }
    SplitMix64 rng(seed);
    std::vector<IncidentEvent> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        IncidentEvent e;
        e.node = static_cast<std::size_t>(rng.bounded(n_nodes));
        const std::size_t dur = dur_min + static_cast<std::size_t>(
                                              rng.bounded(dur_max - dur_min + 1));
        e.start = static_cast<std::size_t>(rng.bounded(horizon - dur - 8));
        e.end = e.start + dur;
        const double u = rng.uniform01();
        if (u < full_closure_fraction) {
            e.open_lane_ratio = 0.0;
            e.kind = IncidentKind::planned_construction;
        } else if (u < full_closure_fraction + 0.5 * (1.0 - full_closure_fraction)) {
            e.open_lane_ratio = rng.uniform(0.2, 0.5);
            e.kind = IncidentKind::accident;
        } else {
            e.open_lane_ratio = rng.uniform(0.5, 0.8);
            e.kind = IncidentKind::emergency_construction;
        }
        out.push_back(e);
    }
    return out;
}

}  // namespace rcdgcn
