#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "rcdgcn/mask.hpp"

namespace rcdgcn {

/// Per-segment static capacity attributes.
struct NodeAttrs {
    int road_type = 1;      // 1: highway, 2: arterial, 3: minor road, 4: ramp, 5: tunnel
    double length_m = 0.0;  // > 0
    int lanes = 1;          // >= 1
    double aadt = 0.0;      // vehicles/day, >= 0
};

/**
 * Directed road network over N sensor nodes. The adjacency matrix carries
 * self-loops (a segment always attends to its own state); the raw edge list
 * does not. Immutable after construction.
 */
struct RoadGraph {
    std::vector<std::string> node_ids;
    std::vector<NodeAttrs> attrs;
    std::vector<std::pair<std::size_t, std::size_t>> edges;  // from -> to, no self-loops
    BoolMatrix adjacency;                                    // N x N, diagonal set

    std::size_t n_nodes() const { return node_ids.size(); }

    /// Index of an external id; throws SchemaError when unknown.
    std::size_t index_of(const std::string& id) const;

    /// Downstream neighbors (successors) of a node, self excluded.
    std::vector<std::size_t> successors(std::size_t i) const;

private:
    friend RoadGraph build_graph(std::vector<std::string>, std::vector<NodeAttrs>,
                                 std::vector<std::pair<std::size_t, std::size_t>>);
    std::unordered_map<std::string, std::size_t> index_;
};

/// Assembles a validated RoadGraph from parts already expressed in node
/// indices. Throws SchemaError on duplicate ids or out-of-range endpoints.
RoadGraph build_graph(std::vector<std::string> node_ids, std::vector<NodeAttrs> attrs,
                      std::vector<std::pair<std::size_t, std::size_t>> edges);

/// Reads `nodes.csv` (node_id,road_type,length_m,lanes,aadt) and `edges.csv`
/// (from_id,to_id) from a dataset directory. Schema violations name the file
/// and line.
RoadGraph load_graph(const std::string& dir);
RoadGraph load_graph_files(const std::string& nodes_path, const std::string& edges_path);

/// Writes the two graph CSVs into a directory.
void save_graph(const RoadGraph& g, const std::string& dir);

/**
 * Hop ring mask: entry (i,j) is set iff the shortest self-loop-free path
 * from i to j has exactly `order` hops; order 0 is the identity.
 */
struct HopMask {
    std::size_t order = 0;
    BoolMatrix mask;
};

/// Ring masks for orders 0..max_order, computed by boolean matrix powering
/// of the adjacency.
std::vector<HopMask> hop_masks(const RoadGraph& g, std::size_t max_order);

}  // namespace rcdgcn
