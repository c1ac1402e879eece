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

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cgnn/graph.hpp"
#include "cgnn/matrix.hpp"
#include "cgnn/rng.hpp"

namespace cgnn {

struct DeepWalkConfig {
    std::uint32_t dim = 32;
    std::uint32_t walks_per_node = 10;
    std::uint32_t walk_length = 40;
    std::uint32_t window = 5;
    std::uint32_t negatives = 5;
    std::uint32_t epochs = 5;
    double lr_start = 0.025;
    double lr_end = 1e-4;
};

/// Random-walk node embeddings: truncated uniform walks on the undirected
/// projection, then skip-gram with negative sampling over the walk corpus.
/// Single-threaded and bit-deterministic for a given rng_seed. Returns the
/// input-side vectors (n_nodes x dim).
inline Mat deepwalk_embeddings(const Graph& g, const DeepWalkConfig& cfg, std::uint64_t rng_seed) {
    if (cfg.dim < 1) throw std::invalid_argument("deepwalk_embeddings: dim >= 1 required");
    if (g.n_nodes == 0) throw std::invalid_argument("deepwalk_embeddings: empty graph");
    const NodeId n = g.n_nodes;
    const std::uint32_t dim = cfg.dim;
    UndirectedView uv = undirected_view(g);
    Rng rng(rng_seed);

    // walk corpus; walks shorter than walk_length are kept (dead ends truncate)
    std::vector<std::vector<NodeId>> corpus;
    corpus.reserve(static_cast<std::size_t>(n) * cfg.walks_per_node);
    std::vector<NodeId> order(n);
    for (NodeId v = 0; v < n; ++v) order[v] = v;
    for (std::uint32_t pass = 0; pass < cfg.walks_per_node; ++pass) {
        rng.shuffle(order);
        for (NodeId start : order) {
            std::vector<NodeId> walk;
            walk.reserve(cfg.walk_length);
            NodeId cur = start;
            walk.push_back(cur);
            for (std::uint32_t step = 1; step < cfg.walk_length; ++step) {
                auto nb = uv.of(cur);
                if (nb.empty()) break;
                cur = nb[rng.uniform_int(nb.size())];
                walk.push_back(cur);
            }
            corpus.push_back(std::move(walk));
        }
    }

    // unigram^0.75 negative-sampling distribution over corpus frequencies
    std::vector<double> cumulative(n, 0.0);
    {
        std::vector<std::uint64_t> freq(n, 0);
        for (const auto& w : corpus)
            for (NodeId v : w) ++freq[v];
        double acc = 0.0;
        for (NodeId v = 0; v < n; ++v) {
            acc += std::pow(static_cast<double>(freq[v]), 0.75);
            cumulative[v] = acc;
        }
        if (acc <= 0.0) throw std::runtime_error("deepwalk_embeddings: empty walk corpus");
    }
    auto draw_negative = [&]() -> NodeId {
        double x = rng.uniform01() * cumulative.back();
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), x);
        return static_cast<NodeId>(it - cumulative.begin());
    };

    Mat in_vec(n, dim);
    Mat out_vec(n, dim);  // stays zero-initialized
    for (double& x : in_vec.data) x = rng.uniform(-0.5 / dim, 0.5 / dim);

    // count the center/context pairs once so the lr schedule is exact
    std::uint64_t total_pairs = 0;
    for (const auto& w : corpus) {
        const std::int64_t len = static_cast<std::int64_t>(w.size());
        for (std::int64_t i = 0; i < len; ++i) {
            std::int64_t lo = std::max<std::int64_t>(0, i - cfg.window);
            std::int64_t hi = std::min<std::int64_t>(len - 1, i + cfg.window);
            total_pairs += static_cast<std::uint64_t>(hi - lo);
        }
    }
    total_pairs *= cfg.epochs;
    if (total_pairs == 0) return in_vec;

    std::vector<double> grad_center(dim);
    std::uint64_t done = 0;
    for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (const auto& walk : corpus) {
            const std::int64_t len = static_cast<std::int64_t>(walk.size());
            for (std::int64_t i = 0; i < len; ++i) {
                const NodeId center = walk[i];
                double* ic = in_vec.row_ptr(center);
                std::int64_t lo = std::max<std::int64_t>(0, i - cfg.window);
                std::int64_t hi = std::min<std::int64_t>(len - 1, i + cfg.window);
                for (std::int64_t j = lo; j <= hi; ++j) {
                    if (j == i) continue;
                    const double progress =
                        static_cast<double>(done) / static_cast<double>(total_pairs);
                    const double lr = cfg.lr_start + (cfg.lr_end - cfg.lr_start) * progress;
                    ++done;
                    const NodeId target = walk[j];
                    std::fill(grad_center.begin(), grad_center.end(), 0.0);
                    // positive pair, then `negatives` noise nodes
                    for (std::uint32_t s = 0; s <= cfg.negatives; ++s) {
                        NodeId out;
                        double label;
                        if (s == 0) {
                            out = target;
                            label = 1.0;
                        } else {
                            out = draw_negative();
                            if (out == target) continue;
                            label = 0.0;
                        }
                        double* ov = out_vec.row_ptr(out);
                        double z = dot(ic, ov, dim);
                        double sig = 1.0 / (1.0 + std::exp(-z));
                        double err = lr * (label - sig);
                        for (std::uint32_t d = 0; d < dim; ++d) {
                            grad_center[d] += err * ov[d];
                            ov[d] += err * ic[d];
                        }
                    }
                    for (std::uint32_t d = 0; d < dim; ++d) ic[d] += grad_center[d];
                }
            }
        }
    }
    return in_vec;
}

inline Mat deepwalk_embeddings(const Graph& g, std::uint32_t dim, std::uint64_t rng_seed) {
    DeepWalkConfig cfg;
    cfg.dim = dim;
    return deepwalk_embeddings(g, cfg, rng_seed);
}

}  // namespace cgnn
