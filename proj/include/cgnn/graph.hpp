// Copyright 2026 the cgnn authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <queue>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cgnn/rng.hpp"

namespace cgnn {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

/// Immutable directed influence graph in CSR form, indexed in both edge
/// directions. An edge u -> v means "u can influence v"; the neighborhood
/// N(v) used by the diffusion machinery is the set of in-neighbors of v.
///
/// Construction canonicalizes the edge set: self-loops are dropped,
/// duplicates are merged, and adjacency lists are sorted ascending.
struct Graph {
    NodeId n_nodes = 0;
    std::vector<std::uint64_t> out_offsets;  // size n_nodes + 1
    std::vector<NodeId> out_targets;
    std::vector<std::uint64_t> in_offsets;  // size n_nodes + 1
    std::vector<NodeId> in_sources;
    std::vector<std::string> node_ids;  // stable external identifiers

    std::uint64_t n_edges() const { return out_targets.size(); }

    std::span<const NodeId> out_neighbors(NodeId u) const {
        return {out_targets.data() + out_offsets[u],
                static_cast<std::size_t>(out_offsets[u + 1] - out_offsets[u])};
    }
    std::span<const NodeId> in_neighbors(NodeId v) const {
        return {in_sources.data() + in_offsets[v],
                static_cast<std::size_t>(in_offsets[v + 1] - in_offsets[v])};
    }
    std::uint64_t out_degree(NodeId u) const { return out_offsets[u + 1] - out_offsets[u]; }
    std::uint64_t in_degree(NodeId v) const { return in_offsets[v + 1] - in_offsets[v]; }

    bool has_edge(NodeId u, NodeId v) const {
        auto nb = out_neighbors(u);
        return std::binary_search(nb.begin(), nb.end(), v);
    }

    std::vector<Edge> edge_list() const {
        std::vector<Edge> edges;
        edges.reserve(n_edges());
        for (NodeId u = 0; u < n_nodes; ++u)
            for (NodeId v : out_neighbors(u)) edges.emplace_back(u, v);
        return edges;
    }

    /// Builds a graph from an arbitrary edge list. Indices must be < n.
    /// `ids` may be empty, in which case decimal indices are used.
    static Graph from_edges(NodeId n, std::vector<Edge> edges,
                            std::vector<std::string> ids = {}) {
        for (const auto& [u, v] : edges)
            if (u >= n || v >= n)
                throw std::invalid_argument("Graph::from_edges: node index out of range");
        edges.erase(std::remove_if(edges.begin(), edges.end(),
                                   [](const Edge& e) { return e.first == e.second; }),
                    edges.end());
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

        Graph g;
        g.n_nodes = n;
        g.out_offsets.assign(n + 1, 0);
        g.in_offsets.assign(n + 1, 0);
        for (const auto& [u, v] : edges) {
            ++g.out_offsets[u + 1];
            ++g.in_offsets[v + 1];
        }
        for (NodeId i = 0; i < n; ++i) {
            g.out_offsets[i + 1] += g.out_offsets[i];
            g.in_offsets[i + 1] += g.in_offsets[i];
        }
        g.out_targets.resize(edges.size());
        g.in_sources.resize(edges.size());
        std::vector<std::uint64_t> cursor(g.in_offsets.begin(), g.in_offsets.end() - 1);
        std::uint64_t pos = 0;
        // Streaming edges sorted by source leaves every in-neighbor list
        // sorted as well.
        for (const auto& [u, v] : edges) {
            g.out_targets[pos++] = v;
            g.in_sources[cursor[v]++] = u;
        }
        if (ids.empty()) {
            g.node_ids.resize(n);
            for (NodeId i = 0; i < n; ++i) g.node_ids[i] = std::to_string(i);
        } else {
            if (ids.size() != n)
                throw std::invalid_argument("Graph::from_edges: ids size must match n");
            g.node_ids = std::move(ids);
        }
        return g;
    }

    /// Transpose consistency and sortedness; used by tests.
    bool validate() const {
        if (out_offsets.size() != n_nodes + 1u || in_offsets.size() != n_nodes + 1u) return false;
        if (out_targets.size() != in_sources.size()) return false;
        std::vector<Edge> a, b;
        for (NodeId u = 0; u < n_nodes; ++u) {
            auto nb = out_neighbors(u);
            if (!std::is_sorted(nb.begin(), nb.end())) return false;
            for (NodeId v : nb) {
                if (u == v) return false;
                a.emplace_back(u, v);
            }
        }
        for (NodeId v = 0; v < n_nodes; ++v) {
            auto nb = in_neighbors(v);
            if (!std::is_sorted(nb.begin(), nb.end())) return false;
            for (NodeId u : nb) b.emplace_back(u, v);
        }
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        if (a != b) return false;
        if (std::adjacent_find(a.begin(), a.end()) != a.end()) return false;
        return true;
    }
};

/// Per-node sorted unique undirected neighbor lists (union of in and out).
struct UndirectedView {
    std::vector<std::uint64_t> offsets;
    std::vector<NodeId> neighbors;

    std::span<const NodeId> of(NodeId v) const {
        return {neighbors.data() + offsets[v],
                static_cast<std::size_t>(offsets[v + 1] - offsets[v])};
    }
    std::uint64_t degree(NodeId v) const { return offsets[v + 1] - offsets[v]; }
};

inline UndirectedView undirected_view(const Graph& g) {
    UndirectedView u;
    u.offsets.assign(g.n_nodes + 1, 0);
    std::vector<NodeId> merged;
    for (NodeId v = 0; v < g.n_nodes; ++v) {
        auto out = g.out_neighbors(v);
        auto in = g.in_neighbors(v);
        merged.clear();
        std::set_union(out.begin(), out.end(), in.begin(), in.end(), std::back_inserter(merged));
        u.offsets[v + 1] = u.offsets[v] + merged.size();
        u.neighbors.insert(u.neighbors.end(), merged.begin(), merged.end());
    }
    return u;
}

namespace detail {

/// Component label per node on the undirected projection; returns the count.
inline std::uint32_t undirected_components(const UndirectedView& uv, NodeId n,
                                           std::vector<std::uint32_t>& label) {
    label.assign(n, UINT32_MAX);
    std::uint32_t count = 0;
    std::vector<NodeId> stack;
    for (NodeId s = 0; s < n; ++s) {
        if (label[s] != UINT32_MAX) continue;
        label[s] = count;
        stack.assign(1, s);
        while (!stack.empty()) {
            NodeId v = stack.back();
            stack.pop_back();
            for (NodeId w : uv.of(v)) {
                if (label[w] == UINT32_MAX) {
                    label[w] = count;
                    stack.push_back(w);
                }
            }
        }
        ++count;
    }
    return count;
}

}  // namespace detail

struct LccResult {
    Graph graph;
    std::vector<NodeId> old_of_new;   // original index of each kept node
    std::vector<std::int64_t> new_of_old;  // -1 for dropped nodes
};

/// Induced subgraph on the largest weakly connected component. Ties between
/// equally large components go to the one containing the smallest original
/// index. Kept nodes are re-densified in ascending original order.
inline LccResult largest_connected_component(const Graph& g) {
    if (g.n_nodes == 0)
        throw std::invalid_argument("largest_connected_component: empty graph");
    UndirectedView uv = undirected_view(g);
    std::vector<std::uint32_t> label;
    std::uint32_t count = detail::undirected_components(uv, g.n_nodes, label);
    std::vector<std::uint64_t> size(count, 0);
    for (NodeId v = 0; v < g.n_nodes; ++v) ++size[label[v]];
    // Components are discovered in order of their smallest member, so the
    // first maximum implements the tie-break.
    std::uint32_t best = 0;
    for (std::uint32_t c = 1; c < count; ++c)
        if (size[c] > size[best]) best = c;

    LccResult res;
    res.new_of_old.assign(g.n_nodes, -1);
    for (NodeId v = 0; v < g.n_nodes; ++v) {
        if (label[v] == best) {
            res.new_of_old[v] = static_cast<std::int64_t>(res.old_of_new.size());
            res.old_of_new.push_back(v);
        }
    }
    std::vector<Edge> edges;
    std::vector<std::string> ids;
    ids.reserve(res.old_of_new.size());
    for (NodeId nv = 0; nv < res.old_of_new.size(); ++nv) {
        NodeId old = res.old_of_new[nv];
        ids.push_back(g.node_ids[old]);
        for (NodeId w : g.out_neighbors(old))
            if (res.new_of_old[w] >= 0)
                edges.emplace_back(nv, static_cast<NodeId>(res.new_of_old[w]));
    }
    res.graph = Graph::from_edges(static_cast<NodeId>(res.old_of_new.size()), std::move(edges),
                                  std::move(ids));
    return res;
}

/// Removes floor(fraction * |E|) uniformly chosen directed edges, rejecting
/// any single removal that would increase the number of weakly connected
/// components. Throws if the target is not reached within |E| * 50 attempts.
inline Graph drop_edges_connected(const Graph& g, double fraction, std::uint64_t rng_seed) {
    if (fraction < 0.0 || fraction >= 1.0)
        throw std::invalid_argument("drop_edges_connected: fraction must be in [0, 1)");
    std::vector<Edge> edges = g.edge_list();
    const std::uint64_t initial = edges.size();
    const std::uint64_t target =
        static_cast<std::uint64_t>(fraction * static_cast<double>(initial));
    if (target == 0) return g;

    std::vector<std::uint32_t> label;
    {
        UndirectedView uv = undirected_view(g);
        detail::undirected_components(uv, g.n_nodes, label);
    }
    const std::uint32_t base_components =
        label.empty() ? 0 : *std::max_element(label.begin(), label.end()) + 1;

    auto components_of = [&](const std::vector<Edge>& es) {
        Graph h = Graph::from_edges(g.n_nodes, es);
        UndirectedView uv = undirected_view(h);
        std::vector<std::uint32_t> lbl;
        return detail::undirected_components(uv, g.n_nodes, lbl);
    };

    Rng rng(rng_seed);
    std::uint64_t removed = 0;
    std::uint64_t attempts = 0;
    const std::uint64_t max_attempts = initial * 50;
    while (removed < target && attempts < max_attempts) {
        ++attempts;
        std::size_t idx = static_cast<std::size_t>(rng.uniform_int(edges.size()));
        Edge picked = edges[idx];
        edges[idx] = edges.back();
        edges.pop_back();
        if (components_of(edges) > base_components) {
            edges.push_back(picked);  // removal would disconnect; reject
        } else {
            ++removed;
        }
    }
    if (removed < target) {
        std::ostringstream msg;
        msg << "drop_edges_connected: only removed " << removed << " of " << target
            << " edges after " << attempts << " attempts (achieved fraction "
            << (static_cast<double>(removed) / static_cast<double>(initial)) << ")";
        throw std::runtime_error(msg.str());
    }
    std::vector<std::string> ids = g.node_ids;
    return Graph::from_edges(g.n_nodes, std::move(edges), std::move(ids));
}

/// Histogram of min-hop distances from a source set, following out-edges.
struct HopHistogram {
    std::vector<std::uint64_t> count_at_hop;  // index = hop distance
    std::uint64_t unreachable = 0;

    std::uint64_t total() const {
        std::uint64_t t = unreachable;
        for (auto c : count_at_hop) t += c;
        return t;
    }
    double fraction_within(std::uint32_t max_hop) const {
        std::uint64_t t = total();
        if (t == 0) return 0.0;
        std::uint64_t within = 0;
        for (std::uint32_t h = 0; h < count_at_hop.size() && h <= max_hop; ++h)
            within += count_at_hop[h];
        return static_cast<double>(within) / static_cast<double>(t);
    }
};

inline HopHistogram hop_distance_distribution(const Graph& g, std::span<const NodeId> sources,
                                              std::span<const NodeId> targets) {
    if (sources.empty())
        throw std::invalid_argument("hop_distance_distribution: sources must be nonempty");
    std::vector<std::int64_t> dist(g.n_nodes, -1);
    std::queue<NodeId> q;
    for (NodeId s : sources) {
        if (s >= g.n_nodes)
            throw std::invalid_argument("hop_distance_distribution: source not in graph");
        if (dist[s] != 0) {
            dist[s] = 0;
            q.push(s);
        }
    }
    while (!q.empty()) {
        NodeId u = q.front();
        q.pop();
        for (NodeId v : g.out_neighbors(u)) {
            if (dist[v] < 0) {
                dist[v] = dist[u] + 1;
                q.push(v);
            }
        }
    }
    HopHistogram h;
    for (NodeId t : targets) {
        if (t >= g.n_nodes)
            throw std::invalid_argument("hop_distance_distribution: target not in graph");
        if (dist[t] < 0) {
            ++h.unreachable;
        } else {
            auto d = static_cast<std::size_t>(dist[t]);
            if (h.count_at_hop.size() <= d) h.count_at_hop.resize(d + 1, 0);
            ++h.count_at_hop[d];
        }
    }
    return h;
}

// ---------------------------------------------------------------------------
// Edge-list file format: UTF-8 text, one `src<TAB>dst` per line, ids are
// arbitrary strings. The loader densifies ids in first-appearance order; the
// sidecar id map is one `external_id<TAB>index` per line.
// ---------------------------------------------------------------------------

inline Graph load_edge_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open edge list: " + path);
    std::unordered_map<std::string, NodeId> index;
    std::vector<std::string> ids;
    std::vector<Edge> edges;
    std::string line;
    std::uint64_t lineno = 0;
    auto intern = [&](const std::string& s) {
        auto [it, inserted] = index.try_emplace(s, static_cast<NodeId>(ids.size()));
        if (inserted) ids.push_back(s);
        return it->second;
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 == line.size())
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected `src<TAB>dst`");
        NodeId u = intern(line.substr(0, tab));
        NodeId v = intern(line.substr(tab + 1));
        edges.emplace_back(u, v);
    }
    return Graph::from_edges(static_cast<NodeId>(ids.size()), std::move(edges), std::move(ids));
}

inline void save_edge_list(const Graph& g, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write edge list: " + path);
    for (NodeId u = 0; u < g.n_nodes; ++u)
        for (NodeId v : g.out_neighbors(u)) out << g.node_ids[u] << '\t' << g.node_ids[v] << '\n';
}

inline void save_id_map(const Graph& g, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write id map: " + path);
    for (NodeId i = 0; i < g.n_nodes; ++i) out << g.node_ids[i] << '\t' << i << '\n';
}

/// external id -> dense index, built from Graph::node_ids.
inline std::unordered_map<std::string, NodeId> id_index(const Graph& g) {
    std::unordered_map<std::string, NodeId> m;
    m.reserve(g.n_nodes);
    for (NodeId i = 0; i < g.n_nodes; ++i) m.emplace(g.node_ids[i], i);
    return m;
}

}  // namespace cgnn
