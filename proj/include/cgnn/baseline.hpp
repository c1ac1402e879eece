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
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "cgnn/cascade.hpp"
#include "cgnn/graph.hpp"
#include "cgnn/matrix.hpp"

namespace cgnn {

// Hand-crafted regression baseline: structural features of the cascade graph
// (induced on the early adopters) and the frontier graph (induced on their
// one-hop out-neighborhood), plus sparse per-node adopter indicators, fed to
// a linear model trained on the relative-square-error objective.

constexpr std::size_t kDenseFeatureCount = 14;
constexpr std::array<const char*, kDenseFeatureCount> kDenseFeatureNames = {
    "gc_mean_degree", "gc_p90_degree", "gc_leaf_count",  "gc_edge_density", "gc_nodes",
    "gc_edges",       "gc_triangles",  "gc_communities", "gc_coverage",     "gf_nodes",
    "gf_edges",       "gf_triangles",  "gf_communities", "gf_coverage"};

struct SubgraphPair {
    Graph cascade_graph;                 // induced on the observed adopters
    std::vector<NodeId> cascade_nodes;   // original ids, ascending
    Graph frontier_graph;                // induced on their one-hop out-neighborhood
    std::vector<NodeId> frontier_nodes;  // original ids, ascending; disjoint from adopters
};

namespace detail {

inline Graph induced_subgraph(const Graph& g, const std::vector<NodeId>& nodes) {
    std::vector<std::int64_t> local(g.n_nodes, -1);
    for (std::size_t i = 0; i < nodes.size(); ++i) local[nodes[i]] = static_cast<std::int64_t>(i);
    std::vector<Edge> edges;
    std::vector<std::string> ids;
    ids.reserve(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        ids.push_back(g.node_ids[nodes[i]]);
        for (NodeId w : g.out_neighbors(nodes[i]))
            if (local[w] >= 0)
                edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(local[w]));
    }
    return Graph::from_edges(static_cast<NodeId>(nodes.size()), std::move(edges), std::move(ids));
}

inline std::uint64_t triangle_count(const UndirectedView& uv, NodeId n) {
    // count each triangle once via the ordered-neighbor rule u < v < w
    std::uint64_t count = 0;
    for (NodeId u = 0; u < n; ++u) {
        auto nu = uv.of(u);
        for (std::size_t i = 0; i < nu.size(); ++i) {
            const NodeId v = nu[i];
            if (v <= u) continue;
            auto nv = uv.of(v);
            for (std::size_t j = i + 1; j < nu.size(); ++j) {
                const NodeId w = nu[j];
                if (w <= v) continue;
                if (std::binary_search(nv.begin(), nv.end(), w)) ++count;
            }
        }
    }
    return count;
}

struct CommunitySummary {
    std::uint64_t count = 0;
    double coverage = 0.0;  // fraction of nodes in communities of size >= 2
};

/// Greedy modularity maximization (pairwise merges while the best gain is
/// positive) on the undirected projection. Deterministic: ties break toward
/// the smallest community index pair.
inline CommunitySummary communities_greedy_modularity(const Graph& g) {
    const NodeId n = g.n_nodes;
    CommunitySummary out;
    if (n == 0) return out;
    UndirectedView uv = undirected_view(g);
    const double m2 = static_cast<double>(uv.neighbors.size());  // 2m
    if (m2 == 0.0) {
        out.count = n;
        out.coverage = 0.0;
        return out;
    }
    const double m = m2 / 2.0;

    std::vector<std::uint32_t> comm(n);
    for (NodeId v = 0; v < n; ++v) comm[v] = v;
    std::vector<double> degree_sum(n, 0.0);
    for (NodeId v = 0; v < n; ++v) degree_sum[v] = static_cast<double>(uv.degree(v));
    // e[a][b]: number of edges between communities a and b (a < b)
    std::map<std::pair<std::uint32_t, std::uint32_t>, double> between;
    for (NodeId v = 0; v < n; ++v)
        for (NodeId w : uv.of(v))
            if (v < w) between[{v, w}] += 1.0;

    std::vector<bool> alive(n, true);
    for (;;) {
        double best_gain = 1e-12;
        std::pair<std::uint32_t, std::uint32_t> best{0, 0};
        for (const auto& [key, edges] : between) {
            const auto& [a, b] = key;
            if (!alive[a] || !alive[b] || edges == 0.0) continue;
            const double gain = edges / m - degree_sum[a] * degree_sum[b] / (2.0 * m * m);
            if (gain > best_gain) {
                best_gain = gain;
                best = key;
            }
        }
        if (best.first == best.second) break;
        const auto [a, b] = best;
        // merge b into a
        for (NodeId v = 0; v < n; ++v)
            if (comm[v] == b) comm[v] = a;
        degree_sum[a] += degree_sum[b];
        alive[b] = false;
        std::map<std::pair<std::uint32_t, std::uint32_t>, double> next;
        for (const auto& [key, edges] : between) {
            auto [x, y] = key;
            if (x == b) x = a;
            if (y == b) y = a;
            if (x == y) continue;
            if (x > y) std::swap(x, y);
            next[{x, y}] += edges;
        }
        between = std::move(next);
    }

    std::map<std::uint32_t, std::uint64_t> sizes;
    for (NodeId v = 0; v < n; ++v) ++sizes[comm[v]];
    out.count = sizes.size();
    std::uint64_t covered = 0;
    for (const auto& [c, sz] : sizes)
        if (sz >= 2) covered += sz;
    out.coverage = static_cast<double>(covered) / static_cast<double>(n);
    return out;
}

/// Dense structural block for one subgraph: nodes, edges, triangles,
/// community count, coverage.
inline void substructure_block(const Graph& sub, double* out) {
    UndirectedView uv = undirected_view(sub);
    auto comm = communities_greedy_modularity(sub);
    out[0] = static_cast<double>(sub.n_nodes);
    out[1] = static_cast<double>(sub.n_edges());
    out[2] = static_cast<double>(triangle_count(uv, sub.n_nodes));
    out[3] = static_cast<double>(comm.count);
    out[4] = comm.coverage;
}

}  // namespace detail

/// g_c = induced subgraph on the observed adopters; g_f = induced subgraph on
/// the adopters' one-hop out-neighborhood excluding the adopters themselves.
inline SubgraphPair build_subgraphs(const Graph& g, const Cascade& c) {
    if (c.observed_active.empty())
        throw std::invalid_argument("build_subgraphs: no observed adopters");
    SubgraphPair out;
    out.cascade_nodes = c.observed_active;
    std::vector<bool> is_adopter(g.n_nodes, false);
    for (NodeId v : c.observed_active) {
        if (v >= g.n_nodes) throw std::invalid_argument("build_subgraphs: adopter not in graph");
        is_adopter[v] = true;
    }
    std::vector<bool> in_frontier(g.n_nodes, false);
    for (NodeId v : c.observed_active)
        for (NodeId w : g.out_neighbors(v))
            if (!is_adopter[w]) in_frontier[w] = true;
    for (NodeId v = 0; v < g.n_nodes; ++v)
        if (in_frontier[v]) out.frontier_nodes.push_back(v);
    out.cascade_graph = detail::induced_subgraph(g, out.cascade_nodes);
    out.frontier_graph = detail::induced_subgraph(g, out.frontier_nodes);
    return out;
}

struct CascadeFeatures {
    std::array<double, kDenseFeatureCount> dense{};
    std::vector<NodeId> adopter_ids;  // sparse indicator block, global node ids
};

inline CascadeFeatures extract_features(const Graph& g, const Cascade& c) {
    SubgraphPair sub = build_subgraphs(g, c);
    CascadeFeatures f;
    const Graph& gc = sub.cascade_graph;

    // total degree (in + out) per node of g_c
    std::vector<double> degree(gc.n_nodes);
    double degree_total = 0.0;
    std::uint64_t leaves = 0;
    for (NodeId v = 0; v < gc.n_nodes; ++v) {
        degree[v] = static_cast<double>(gc.out_degree(v) + gc.in_degree(v));
        degree_total += degree[v];
        if (gc.out_degree(v) + gc.in_degree(v) == 1) ++leaves;
    }
    std::sort(degree.begin(), degree.end());
    const std::size_t nc = gc.n_nodes;
    f.dense[0] = degree_total / static_cast<double>(nc);
    f.dense[1] = degree[(9 * nc + 9) / 10 - 1];  // nearest-rank 90th percentile
    f.dense[2] = static_cast<double>(leaves);
    f.dense[3] = nc > 1 ? static_cast<double>(gc.n_edges()) /
                              (static_cast<double>(nc) * static_cast<double>(nc - 1))
                        : 0.0;
    detail::substructure_block(gc, f.dense.data() + 4);
    if (sub.frontier_graph.n_nodes > 0) {
        detail::substructure_block(sub.frontier_graph, f.dense.data() + 9);
    }
    (void)uvc;
    f.adopter_ids = c.observed_active;
    return f;
}

// ---------------------------------------------------------------------------
// Feature matrix file: CSV with a header row; the sparse indicator block is a
// trailing quoted column of space-separated `id:1` pairs.
// ---------------------------------------------------------------------------

inline void save_feature_matrix(const std::vector<CascadeFeatures>& feats,
                                const std::vector<std::string>& cascade_ids, const Graph& g,
                                const std::string& path) {
    if (feats.size() != cascade_ids.size())
        throw std::invalid_argument("save_feature_matrix: id/feature count mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write feature matrix: " + path);
    out << "cascade_id";
    for (const char* name : kDenseFeatureNames) out << ',' << name;
    out << ",adopters\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < feats.size(); ++i) {
        out << cascade_ids[i];
        for (double v : feats[i].dense) out << ',' << v;
        out << ",\"";
        for (std::size_t j = 0; j < feats[i].adopter_ids.size(); ++j) {
            if (j) out << ' ';
            out << g.node_ids[feats[i].adopter_ids[j]] << ":1";
        }
        out << "\"\n";
    }
}

// ---------------------------------------------------------------------------
// Linear model on [standardized dense block | bias | sparse adopter block],
// trained by full-batch gradient descent on MRSE + l2 * ||w||^2 with separate
// learning rates for the dense and sparse groups. Predictions are clipped
// below at the observed adopter count.
// ---------------------------------------------------------------------------

struct RidgeConfig {
    double lr_dense = 0.005;
    double lr_sparse = 1e-4;
    double l2 = 1e-6;
    std::uint32_t max_epochs = 3000;
    std::uint32_t patience = 50;
};

struct RidgeItems {
    std::vector<CascadeFeatures> features;
    std::vector<double> targets;          // true final popularity
    std::vector<double> observed_counts;  // |C_T| per item, the prediction floor
};

struct RidgeResult {
    std::vector<double> dense_weights;  // kDenseFeatureCount
    double bias = 0.0;
    std::vector<double> sparse_weights;  // one per graph node
    std::vector<double> train_pred, val_pred, test_pred;
    double val_mrse = 0.0;
    std::uint32_t best_epoch = 0;
};

inline RidgeResult ridge_fit_predict(const Graph& g, const RidgeItems& train,
                                     const RidgeItems& val, const RidgeItems& test,
                                     const RidgeConfig& cfg) {
    const std::size_t n_train = train.features.size();
    if (n_train == 0 || val.features.empty())
        throw std::invalid_argument("ridge_fit_predict: train and val must be nonempty");

    // standardize the dense block with train statistics
    std::array<double, kDenseFeatureCount> mean{}, sd{};
    for (const auto& f : train.features)
        for (std::size_t j = 0; j < kDenseFeatureCount; ++j) mean[j] += f.dense[j];
    for (std::size_t j = 0; j < kDenseFeatureCount; ++j) mean[j] /= static_cast<double>(n_train);
    for (const auto& f : train.features)
        for (std::size_t j = 0; j < kDenseFeatureCount; ++j) {
            const double d = f.dense[j] - mean[j];
            sd[j] += d * d;
        }
    for (std::size_t j = 0; j < kDenseFeatureCount; ++j) {
        sd[j] = std::sqrt(sd[j] / static_cast<double>(n_train));
        if (sd[j] < 1e-12) sd[j] = 1.0;
    }
    auto standardized = [&](const CascadeFeatures& f, std::size_t j) {
        return (f.dense[j] - mean[j]) / sd[j];
    };

    std::vector<double> w_dense(kDenseFeatureCount, 0.0);
    double bias = 0.0;
    std::vector<double> w_sparse(g.n_nodes, 0.0);

    auto predict_raw = [&](const CascadeFeatures& f) {
        double y = bias;
        for (std::size_t j = 0; j < kDenseFeatureCount; ++j)
            y += w_dense[j] * standardized(f, j);
        for (NodeId v : f.adopter_ids) y += w_sparse[v];
        return y;
    };
    auto mrse_of = [&](const RidgeItems& items) {
        double acc = 0.0;
        for (std::size_t i = 0; i < items.features.size(); ++i) {
            const double pred =
                std::max(predict_raw(items.features[i]), items.observed_counts[i]);
            const double rel = (pred - items.targets[i]) / items.targets[i];
            acc += rel * rel;
        }
        return acc / static_cast<double>(items.features.size());
    };

    RidgeResult best;
    best.val_mrse = std::numeric_limits<double>::infinity();
    std::uint32_t since_best = 0;
    std::vector<double> gd(kDenseFeatureCount);
    std::vector<double> gs(g.n_nodes);

    for (std::uint32_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::fill(gd.begin(), gd.end(), 0.0);
        std::fill(gs.begin(), gs.end(), 0.0);
        double gb = 0.0;
        double train_loss = 0.0;
        for (std::size_t i = 0; i < n_train; ++i) {
            const CascadeFeatures& f = train.features[i];
            const double t = train.targets[i];
            const double y = predict_raw(f);
            const double rel = (y - t) / t;
            train_loss += rel * rel;
            const double dy = 2.0 * rel / (t * static_cast<double>(n_train));
            gb += dy;
            for (std::size_t j = 0; j < kDenseFeatureCount; ++j) gd[j] += dy * standardized(f, j);
            for (NodeId v : f.adopter_ids) gs[v] += dy;
        }
        train_loss /= static_cast<double>(n_train);
        if (!std::isfinite(train_loss))
            throw std::runtime_error(
                "ridge_fit_predict: training diverged (non-finite loss at epoch " +
                std::to_string(epoch) + "; lower the learning rates)");
        for (std::size_t j = 0; j < kDenseFeatureCount; ++j)
            w_dense[j] -= cfg.lr_dense * (gd[j] + 2.0 * cfg.l2 * w_dense[j]);
        bias -= cfg.lr_dense * gb;  // bias is not regularized
        for (NodeId v = 0; v < g.n_nodes; ++v)
            w_sparse[v] -= cfg.lr_sparse * (gs[v] + 2.0 * cfg.l2 * w_sparse[v]);

        const double vm = mrse_of(val);
        if (vm < best.val_mrse) {
            best.val_mrse = vm;
            best.best_epoch = epoch;
            best.dense_weights = w_dense;
            best.bias = bias;
            best.sparse_weights = w_sparse;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    if (best.dense_weights.empty()) {
        best.dense_weights = w_dense;
        best.bias = bias;
        best.sparse_weights = w_sparse;
    }

    // final predictions from the best checkpoint
    w_dense = best.dense_weights;
    bias = best.bias;
    w_sparse = best.sparse_weights;
    auto emit = [&](const RidgeItems& items, std::vector<double>& out) {
        out.resize(items.features.size());
        for (std::size_t i = 0; i < items.features.size(); ++i)
            out[i] = std::max(predict_raw(items.features[i]), items.observed_counts[i]);
    };
    emit(train, best.train_pred);
    emit(val, best.val_pred);
    emit(test, best.test_pred);
    return best;
}

}  // namespace cgnn
