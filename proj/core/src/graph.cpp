#include "rcdgcn/graph.hpp"

#include <charconv>
#include <filesystem>

#include "rcdgcn/csv.hpp"
#include "rcdgcn/error.hpp"

namespace rcdgcn {

namespace {

long parse_int(const std::string& cell, const std::string& where) {
    long v = 0;
    auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size() || cell.empty()) {
        throw SchemaError("non-integer cell '" + cell + "' at " + where);
    }
    return v;
}

void expect_header(const csv::Table& t, const std::vector<std::string>& want,
                   const std::string& path) {
    if (t.header != want) {
        std::string w;
        for (std::size_t i = 0; i < want.size(); ++i) w += (i ? "," : "") + want[i];
        throw SchemaError("'" + path + "': expected header '" + w + "'");
    }
}

}  // namespace

std::size_t RoadGraph::index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) {
        throw SchemaError("unknown node id '" + id + "'");
    }
    return it->second;
}

std::vector<std::size_t> RoadGraph::successors(std::size_t i) const {
    std::vector<std::size_t> out;
    for (const auto& [from, to] : edges) {
        if (from == i && to != i) out.push_back(to);
    }
    return out;
}

RoadGraph build_graph(std::vector<std::string> node_ids, std::vector<NodeAttrs> attrs,
                      std::vector<std::pair<std::size_t, std::size_t>> edges) {
    if (node_ids.size() != attrs.size()) {
        throw SchemaError("node id and attribute counts differ");
    }
    RoadGraph g;
    g.node_ids = std::move(node_ids);
    g.attrs = std::move(attrs);
    const std::size_t n = g.node_ids.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (!g.index_.emplace(g.node_ids[i], i).second) {
            throw SchemaError("duplicate node id '" + g.node_ids[i] + "'");
        }
    }
    g.adjacency = BoolMatrix::identity(n);
    for (const auto& [from, to] : edges) {
        if (from >= n || to >= n) {
            throw SchemaError("edge endpoint out of range");
        }
        if (from != to) g.adjacency.at(from, to) = 1;
    }
    g.edges = std::move(edges);
    return g;
}

RoadGraph load_graph(const std::string& dir) {
    namespace fs = std::filesystem;
    return load_graph_files((fs::path(dir) / "nodes.csv").string(),
                            (fs::path(dir) / "edges.csv").string());
}

RoadGraph load_graph_files(const std::string& nodes_path, const std::string& edges_path) {
    const csv::Table nodes = csv::read_file(nodes_path);
    expect_header(nodes, {"node_id", "road_type", "length_m", "lanes", "aadt"}, nodes_path);

    std::vector<std::string> ids;
    std::vector<NodeAttrs> attrs;
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t r = 0; r < nodes.rows.size(); ++r) {
        const auto& row = nodes.rows[r];
        const std::string where = nodes_path + ":" + std::to_string(r + 2);
        if (row.size() != 5) {
            throw SchemaError("ragged row at " + where);
        }
        if (!index.emplace(row[0], ids.size()).second) {
            throw SchemaError("duplicate node id '" + row[0] + "' at " + where);
        }
        NodeAttrs a;
        a.road_type = static_cast<int>(parse_int(row[1], where));
        a.length_m = csv::parse_double(row[2], where);
        a.lanes = static_cast<int>(parse_int(row[3], where));
        a.aadt = csv::parse_double(row[4], where);
        if (a.road_type < 1 || a.road_type > 5) {
            throw SchemaError("road_type must be 1..5 at " + where);
        }
        if (a.length_m <= 0.0) {
            throw SchemaError("length_m must be positive at " + where);
        }
        if (a.lanes < 1) {
            throw SchemaError("lanes must be >= 1 at " + where);
        }
        if (a.aadt < 0.0) {
            throw SchemaError("aadt must be >= 0 at " + where);
        }
        ids.push_back(row[0]);
        attrs.push_back(a);
    }

    const csv::Table edges = csv::read_file(edges_path);
    expect_header(edges, {"from_id", "to_id"}, edges_path);
    std::vector<std::pair<std::size_t, std::size_t>> edge_list;
    for (std::size_t r = 0; r < edges.rows.size(); ++r) {
        const auto& row = edges.rows[r];
        const std::string where = edges_path + ":" + std::to_string(r + 2);
        if (row.size() != 2) {
            throw SchemaError("ragged row at " + where);
        }
        auto from = index.find(row[0]);
        auto to = index.find(row[1]);
        if (from == index.end()) {
            throw SchemaError("edge references unknown node '" + row[0] + "' at " + where);
        }
        if (to == index.end()) {
            throw SchemaError("edge references unknown node '" + row[1] + "' at " + where);
        }
        edge_list.emplace_back(from->second, to->second);
    }
    return build_graph(std::move(ids), std::move(attrs), std::move(edge_list));
}

void save_graph(const RoadGraph& g, const std::string& dir) {
    namespace fs = std::filesystem;
    csv::Writer nodes;
    nodes.header({"node_id", "road_type", "length_m", "lanes", "aadt"});
    for (std::size_t i = 0; i < g.n_nodes(); ++i) {
        const NodeAttrs& a = g.attrs[i];
        nodes.row({g.node_ids[i], std::to_string(a.road_type), csv::format_double(a.length_m),
                   std::to_string(a.lanes), csv::format_double(a.aadt)});
    }
    nodes.save((fs::path(dir) / "nodes.csv").string());

    csv::Writer edges;
    edges.header({"from_id", "to_id"});
    for (const auto& [from, to] : g.edges) {
        edges.row({g.node_ids[from], g.node_ids[to]});
    }
    edges.save((fs::path(dir) / "edges.csv").string());
}

std::vector<HopMask> hop_masks(const RoadGraph& g, std::size_t max_order) {
    const std::size_t n = g.n_nodes();

    // Self-loop-free adjacency drives the ring distances.
    BoolMatrix step(n, n);
    for (const auto& [from, to] : g.edges) {
        if (from != to) step.at(from, to) = 1;
    }

    std::vector<HopMask> rings;
    rings.push_back({0, BoolMatrix::identity(n)});

    BoolMatrix reach = BoolMatrix::identity(n);  // <= gamma-1 hops
    for (std::size_t order = 1; order <= max_order; ++order) {
        // next = boolean reach . (I + step); ring = next AND NOT reach
        BoolMatrix next = reach;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < n; ++k) {
                if (!reach.at(i, k)) continue;
                const std::uint8_t* srow = step.v.data() + k * n;
                std::uint8_t* nrow = next.v.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) nrow[j] |= srow[j];
            }
        }
        BoolMatrix ring(n, n);
        for (std::size_t i = 0; i < n * n; ++i) {
            ring.v[i] = next.v[i] && !reach.v[i];
        }
        rings.push_back({order, std::move(ring)});
        reach = std::move(next);
    }
    return rings;
}

}  // namespace rcdgcn
