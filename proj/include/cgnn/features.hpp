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

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cgnn/graph.hpp"
#include "cgnn/matrix.hpp"

namespace cgnn {

constexpr std::size_t kNodeFeatureCount = 6;
constexpr std::array<const char*, kNodeFeatureCount> kNodeFeatureNames = {
    "coreness", "pagerank", "hub", "authority", "eigenvector", "clustering"};

/// Per-node structural feature table, one row per node, columns in
/// kNodeFeatureNames order.
struct NodeFeatures {
    Mat values;  // n_nodes x 6
};

struct ConvergenceError : std::runtime_error {
    explicit ConvergenceError(const std::string& feature)
        : std::runtime_error("power iteration did not converge for feature: " + feature) {}
};

namespace detail {
constexpr std::uint32_t kMaxPowerIterations = 10000;
constexpr double kPowerTolerance = 1e-9;

inline void l2_normalize(std::vector<double>& x) {
    double norm = 0.0;
    for (double v : x) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-300) return;  // all-zero stays all-zero (edgeless graphs)
    for (double& v : x) v /= norm;
}

inline double l1_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += std::fabs(a[i] - b[i]);
    return d;
}
}  // namespace detail

/// PageRank with uniform teleport and uniform dangling redistribution,
/// iterated until the L1 residual drops below 1e-9. The result sums to 1.
inline std::vector<double> pagerank(const Graph& g, double damping = 0.85) {
    const NodeId n = g.n_nodes;
    if (n == 0) throw std::invalid_argument("pagerank: empty graph");
    std::vector<double> pr(n, 1.0 / n), next(n);
    for (std::uint32_t iter = 0; iter < detail::kMaxPowerIterations; ++iter) {
        double dangling = 0.0;
        for (NodeId u = 0; u < n; ++u)
            if (g.out_degree(u) == 0) dangling += pr[u];
        const double base = (1.0 - damping) / n + damping * dangling / n;
        std::fill(next.begin(), next.end(), base);
        for (NodeId u = 0; u < n; ++u) {
            auto nb = g.out_neighbors(u);
            if (nb.empty()) continue;
            const double share = damping * pr[u] / static_cast<double>(nb.size());
            for (NodeId v : nb) next[v] += share;
        }
        double residual = detail::l1_diff(pr, next);
        pr.swap(next);
        if (residual < detail::kPowerTolerance) return pr;
    }
    throw ConvergenceError("pagerank");
}

struct HitsScores {
    std::vector<double> hub;
    std::vector<double> authority;
};

/// HITS by alternating power iteration, both vectors L2-normalized.
inline HitsScores hits(const Graph& g) {
    const NodeId n = g.n_nodes;
    if (n == 0) throw std::invalid_argument("hits: empty graph");
    std::vector<double> hub(n, 1.0 / std::sqrt(static_cast<double>(n)));
    std::vector<double> auth(n, 0.0), prev_hub(n);
    if (g.n_edges() == 0) return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    for (std::uint32_t iter = 0; iter < detail::kMaxPowerIterations; ++iter) {
        prev_hub = hub;
        for (NodeId v = 0; v < n; ++v) {
            double a = 0.0;
            for (NodeId u : g.in_neighbors(v)) a += hub[u];
            auth[v] = a;
        }
        detail::l2_normalize(auth);
        for (NodeId u = 0; u < n; ++u) {
            double h = 0.0;
            for (NodeId v : g.out_neighbors(u)) h += auth[v];
            hub[u] = h;
        }
        detail::l2_normalize(hub);
        if (detail::l1_diff(hub, prev_hub) < detail::kPowerTolerance) return {hub, auth};
    }
    throw ConvergenceError("hub/authority");
}

/// Eigenvector centrality of the undirected projection, computed with the
/// shifted iteration x <- (A + I) x to sidestep the bipartite oscillation of
/// plain power iteration. L2-normalized, entries nonnegative.
inline std::vector<double> eigenvector_centrality(const Graph& g) {
    const NodeId n = g.n_nodes;
    if (n == 0) throw std::invalid_argument("eigenvector_centrality: empty graph");
    UndirectedView uv = undirected_view(g);
    std::vector<double> x(n, 1.0 / std::sqrt(static_cast<double>(n))), next(n);
    for (std::uint32_t iter = 0; iter < detail::kMaxPowerIterations; ++iter) {
        for (NodeId v = 0; v < n; ++v) {
            double acc = x[v];
            for (NodeId w : uv.of(v)) acc += x[w];
            next[v] = acc;
        }
        detail::l2_normalize(next);
        double residual = detail::l1_diff(x, next);
        x.swap(next);
        if (residual < detail::kPowerTolerance) return x;
    }
    throw ConvergenceError("eigenvector centrality");
}

/// k-core numbers of the undirected projection (peeling in O(V + E)).
inline std::vector<double> coreness(const Graph& g) {
    const NodeId n = g.n_nodes;
    UndirectedView uv = undirected_view(g);
    std::vector<std::uint32_t> degree(n);
    std::uint32_t max_degree = 0;
    for (NodeId v = 0; v < n; ++v) {
        degree[v] = static_cast<std::uint32_t>(uv.degree(v));
        max_degree = std::max(max_degree, degree[v]);
    }
    // bucket sort nodes by degree
    std::vector<std::uint32_t> bin(max_degree + 2, 0), pos(n), vert(n);
    for (NodeId v = 0; v < n; ++v) ++bin[degree[v] + 1];
    for (std::uint32_t d = 1; d < bin.size(); ++d) bin[d] += bin[d - 1];
    std::vector<std::uint32_t> cursor(bin.begin(), bin.end() - 1);
    for (NodeId v = 0; v < n; ++v) {
        pos[v] = cursor[degree[v]]++;
        vert[pos[v]] = v;
    }
    std::vector<std::uint32_t> core(degree.begin(), degree.end());
    std::vector<std::uint32_t> bin_start(bin.begin(), bin.end() - 1);
    for (NodeId i = 0; i < n; ++i) {
        NodeId v = vert[i];
        for (NodeId w : uv.of(v)) {
            if (core[w] > core[v]) {
                // move w one bucket down
                std::uint32_t dw = core[w];
                std::uint32_t pw = pos[w];
                std::uint32_t pfirst = bin_start[dw];
                NodeId first = vert[pfirst];
                if (first != w) {
                    std::swap(vert[pfirst], vert[pw]);
                    pos[w] = pfirst;
                    pos[first] = pw;
                }
                ++bin_start[dw];
                --core[w];
            }
        }
    }
    return {core.begin(), core.end()};
}

/// Local clustering coefficients of the undirected projection.
inline std::vector<double> clustering_coefficients(const Graph& g) {
    const NodeId n = g.n_nodes;
    UndirectedView uv = undirected_view(g);
    std::vector<double> cc(n, 0.0);
    for (NodeId v = 0; v < n; ++v) {
        auto nb = uv.of(v);
        const std::uint64_t d = nb.size();
        if (d < 2) continue;
        std::uint64_t links = 0;
        for (std::size_t i = 0; i < nb.size(); ++i) {
            auto wi = uv.of(nb[i]);
            for (std::size_t j = i + 1; j < nb.size(); ++j)
                if (std::binary_search(wi.begin(), wi.end(), nb[j])) ++links;
        }
        cc[v] = 2.0 * static_cast<double>(links) / (static_cast<double>(d) * (d - 1));
    }
    return cc;
}

/// All six structural features, columns in kNodeFeatureNames order.
inline NodeFeatures compute_node_features(const Graph& g) {
    if (g.n_nodes == 0) throw std::invalid_argument("compute_node_features: empty graph");
    NodeFeatures f;
    f.values = Mat(g.n_nodes, kNodeFeatureCount);
    auto core = coreness(g);
    auto pr = pagerank(g);
    auto hs = hits(g);
    auto ev = eigenvector_centrality(g);
    auto cc = clustering_coefficients(g);
    for (NodeId v = 0; v < g.n_nodes; ++v) {
        f.values(v, 0) = core[v];
        f.values(v, 1) = pr[v];
        f.values(v, 2) = hs.hub[v];
        f.values(v, 3) = hs.authority[v];
        f.values(v, 4) = ev[v];
        f.values(v, 5) = cc[v];
    }
    return f;
}

/// Column-wise z-score standardization; constant columns become zero.
inline Mat zscore_columns(const Mat& m) {
    Mat out(m.rows, m.cols);
    for (std::size_t j = 0; j < m.cols; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < m.rows; ++i) mean += m(i, j);
        mean /= static_cast<double>(m.rows);
        double var = 0.0;
        for (std::size_t i = 0; i < m.rows; ++i) {
            double d = m(i, j) - mean;
            var += d * d;
        }
        double sd = std::sqrt(var / static_cast<double>(m.rows));
        if (sd < 1e-12) continue;  // constant feature carries no signal
        for (std::size_t i = 0; i < m.rows; ++i) out(i, j) = (m(i, j) - mean) / sd;
    }
    return out;
}

}  // namespace cgnn
