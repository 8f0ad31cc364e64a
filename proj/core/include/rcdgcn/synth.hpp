#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rcdgcn/graph.hpp"
#include "rcdgcn/rng.hpp"

namespace rcdgcn {

enum class IncidentKind { accident, emergency_construction, planned_construction };

std::string to_string(IncidentKind k);
IncidentKind incident_kind_from_string(const std::string& s);

/// A lane-closure event on one node. Active over steps [start, end]
/// inclusive; open_lane_ratio 1 means all lanes open, 0 a full closure.
struct IncidentEvent {
    std::size_t node = 0;
    std::size_t start = 0;
    std::size_t end = 0;
    double open_lane_ratio = 1.0;
    IncidentKind kind = IncidentKind::accident;
};

/**
 * Deterministic scenario for the synthetic speed generator. Speeds follow
 *
 *   speed(t,n) = free_flow(n) * profile(t mod 288) * capacity(t,n)
 *                * congestion(t,n) + gaussian(0, noise_sigma)
 *
 * clipped to [0, free_flow(n)], where
 *   capacity   = open_lane_ratio^1.5 while an incident is active, relaxing
 *                linearly back to 1 over a 30-minute window after it ends
 *                (the most restrictive incident governs when several overlap);
 *   congestion = 0.8 when any downstream neighbor ran below half its
 *                free-flow speed in the previous step, else 1 (one-step
 *                spillback).
 * Noise uses the SplitMix64/Box-Muller stream documented in rng.hpp, one
 * draw per (t, node) in row-major order, drawn only when noise_sigma > 0.
 */
struct SyntheticScenario {
    RoadGraph graph;
    std::size_t horizon = 0;  // total steps
    int step_minutes = 5;
    std::vector<double> free_flow;      // per node, mph
    std::vector<double> daily_profile;  // 288 multiplicative factors in (0,1]
    std::vector<IncidentEvent> incidents;
    double noise_sigma = 0.0;  // mph
    std::uint64_t seed = 0;
    std::vector<std::string> feature_names;  // subset of {I, O, road_type, MT}
};

/// Generated series: speeds [T,N] in mph and capacity features [T,N,L] in
/// the channel order of `feature_names`.
struct SyntheticData {
    std::size_t n_steps = 0;
    std::size_t n_nodes = 0;
    std::vector<double> speeds;
    std::vector<std::string> feature_names;
    std::vector<double> features;

    double speed(std::size_t t, std::size_t n) const { return speeds[t * n_nodes + n]; }
    double feature(std::size_t t, std::size_t n, std::size_t l) const {
        return features[(t * n_nodes + n) * feature_names.size() + l];
    }
};

/// Runs the scenario. Throws IndexError when an incident names a node or
/// step outside the scenario, ConfigError on malformed scenario fields.
SyntheticData generate(const SyntheticScenario& s);

/// Writes speeds.csv plus one features_<name>.csv per channel (rows = time
/// steps, columns = node ids).
void export_dataset(const SyntheticData& d, const RoadGraph& g, const std::string& out_dir);

/// Incident schedule round-trip (incidents.csv) so analysis can recover the
/// ground-truth events behind a dataset.
void save_incidents(const std::vector<IncidentEvent>& incidents, const RoadGraph& g,
                    const std::string& path);
std::vector<IncidentEvent> load_incidents(const std::string& path, const RoadGraph& g);

/// Seeded random road network: a directed ring (so every node has a
/// downstream neighbor) with extra chord edges and a share of two-way links.
RoadGraph random_graph(std::size_t n_nodes, std::size_t extra_edges, double two_way_fraction,
                       std::uint64_t seed);

/// Free-flow speed per node from its road type, with seeded jitter.
std::vector<double> default_free_flows(const RoadGraph& g, std::uint64_t seed);

/// Double-peaked 288-step weekday profile in (0,1].
std::vector<double> default_daily_profile();

/// Seeded incident schedule: `count` events over the horizon with durations
/// drawn from [dur_min, dur_max] steps and `full_closure_fraction` of them
/// full closures.
std::vector<IncidentEvent> random_incidents(std::size_t count, std::size_t horizon,
                                            std::size_t n_nodes, std::size_t dur_min,
                                            std::size_t dur_max, double full_closure_fraction,
                                            std::uint64_t seed);

}  // namespace rcdgcn
