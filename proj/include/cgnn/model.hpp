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
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cgnn/binio.hpp"
#include "cgnn/cascade.hpp"
#include "cgnn/graph.hpp"
#include "cgnn/matrix.hpp"
#include "cgnn/rng.hpp"

namespace cgnn {

// Two coupled message-passing networks over the influence graph. The state
// network keeps a scalar activation state s_v per user; the influence network
// keeps a vector representation r_v per user. Each layer:
//
//   state side      gate(u, v) = beta . [Ws r_u || Ws r_v]
//                   a_v  = sum_{u in N(v)} gate(u, v) s_u + p_v
//                   s_v' = 1 for observed adopters, else
//                          logistic(mu_s s_v + mu_a a_v)
//   influence side  e_uv = gamma . [Wr r_u || Wr r_v]
//                   alpha_uv = softmax over in-neighbors of v
//                   b_v  = sum_{u in N(v)} StateGate(s_u) alpha_uv Wr r_u
//                   r_v' = tanh(zeta_r Wr r_v + zeta_b b_v)
//
// where N(v) is the set of in-neighbors of v and StateGate is a small
// 1 -> 8 -> 8 -> 1 MLP (tanh hidden, softplus output). The prediction is the
// sum of the final states over all users.
//
// All whole-set floating-point reductions are done in ascending value order
// (see sorted_sum), so relabeling nodes permutes every per-node quantity and
// leaves the prediction bit-identical.

constexpr std::uint32_t kGateHidden = 8;

struct ModelConfig {
    std::uint32_t hidden = 38;    // representation width, constant across layers
    std::uint32_t n_layers = 2;   // message-passing depth K
    std::uint32_t n_nodes = 0;    // for the per-user self-activation vector
    bool share_w = false;         // one transform matrix per layer for both networks
};

struct TensorSpec {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 1;

    std::size_t size() const { return rows * cols; }
};

/// Offsets of every trainable tensor inside the flat parameter vector.
/// Declaration order is the serialization order.
struct ParamLayout {
    ModelConfig config;
    struct Layer {
        std::size_t w_s, beta, w_r, gamma;
        std::size_t mu_s, mu_a, zeta_r, zeta_b;
        std::size_t gate_w1, gate_b1, gate_w2, gate_b2, gate_w3, gate_b3;
    };
    std::vector<Layer> layer;
    std::size_t p = 0;  // self-activation vector, n_nodes entries
    std::size_t total = 0;
    std::vector<TensorSpec> tensors;
};

inline ParamLayout build_layout(const ModelConfig& cfg) {
    if (cfg.n_layers < 1) throw std::invalid_argument("model: n_layers >= 1 required");
    if (cfg.hidden < 1) throw std::invalid_argument("model: hidden >= 1 required");
    ParamLayout lay;
    lay.config = cfg;
    const std::size_t h = cfg.hidden;
    std::size_t at = 0;
    auto add = [&](const std::string& name, std::size_t rows, std::size_t cols) {
        lay.tensors.push_back({name, at, rows, cols});
        std::size_t off = at;
        at += rows * cols;
        return off;
    };
    for (std::uint32_t k = 0; k < cfg.n_layers; ++k) {
        ParamLayout::Layer L{};
        const std::string suffix = "." + std::to_string(k);
        L.w_s = add("w_s" + suffix, h, h);
        L.beta = add("beta" + suffix, 2 * h, 1);
        L.w_r = cfg.share_w ? L.w_s : add("w_r" + suffix, h, h);
        L.gamma = add("gamma" + suffix, 2 * h, 1);
        L.mu_s = add("mu_s" + suffix, 1, 1);
        L.mu_a = add("mu_a" + suffix, 1, 1);
        L.zeta_r = add("zeta_r" + suffix, 1, 1);
        L.zeta_b = add("zeta_b" + suffix, 1, 1);
        L.gate_w1 = add("gate_w1" + suffix, kGateHidden, 1);
        L.gate_b1 = add("gate_b1" + suffix, kGateHidden, 1);
        L.gate_w2 = add("gate_w2" + suffix, kGateHidden, kGateHidden);
        L.gate_b2 = add("gate_b2" + suffix, kGateHidden, 1);
        L.gate_w3 = add("gate_w3" + suffix, 1, kGateHidden);
        L.gate_b3 = add("gate_b3" + suffix, 1, 1);
        lay.layer.push_back(L);
    }
    lay.p = add("p", cfg.n_nodes, 1);
    lay.total = at;
    return lay;
}

/// All trainable tensors in one flat vector addressed through the layout.
struct ModelParams {
    ParamLayout layout;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    const double* at(std::size_t offset) const { return values.data() + offset; }
    double* at(std::size_t offset) { return values.data() + offset; }
    std::span<const double> self_activation() const {
        return {values.data() + layout.p, layout.config.n_nodes};
    }
};

/// Glorot-uniform weights, unit scalar weights, zero biases and zero
/// self-activation. Fill order is declaration order, so results are
/// deterministic per seed.
inline ModelParams init_params(std::uint32_t h0, std::uint32_t n_layers, std::uint32_t n_nodes,
                               std::uint64_t rng_seed, bool share_w = false) {
    ModelConfig cfg{h0, n_layers, n_nodes, share_w};
    ModelParams params;
    params.layout = build_layout(cfg);
    params.values.assign(params.layout.total, 0.0);
    Rng rng(rng_seed);
    auto glorot = [&](const TensorSpec& t, std::size_t fan_in, std::size_t fan_out) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (std::size_t i = 0; i < t.size(); ++i)
            params.values[t.offset + i] = rng.uniform(-limit, limit);
    };
    for (const TensorSpec& t : params.layout.tensors) {
        if (t.name.starts_with("w_s") || t.name.starts_with("w_r")) {
            glorot(t, h0, h0);
        } else if (t.name.starts_with("beta") || t.name.starts_with("gamma")) {
            glorot(t, 2 * h0, 1);
        } else if (t.name.starts_with("mu_") || t.name.starts_with("zeta_")) {
            params.values[t.offset] = 1.0;
        } else if (t.name.starts_with("gate_w1")) {
            glorot(t, 1, kGateHidden);
        } else if (t.name.starts_with("gate_w2")) {
            glorot(t, kGateHidden, kGateHidden);
        } else if (t.name.starts_with("gate_w3")) {
            glorot(t, kGateHidden, 1);
        }
        // gate biases and p stay zero
    }
    return params;
}

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------

/// Per-parameter-set products that do not depend on the cascade: layer-0
/// transforms of the shared initial representations and the layer-0 attention
/// (which depends only on r0). Sharing one cache across a batch removes the
/// dominant matrix cost from every forward but the first.
struct Layer0Cache {
    std::vector<double> wr_s, wr_r;          // n x h
    std::vector<double> g1, g2, c1, c2;      // n
    std::vector<double> e, alpha;            // per in-edge, in-CSR order
};

namespace detail {

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }
inline double softplus(double z) { return z > 30.0 ? z : std::log1p(std::exp(z)); }

/// wr = W r for every node; g1/g2 are the two halves of the 2h gating vector
/// applied to wr.
inline void node_transforms(const Graph& g, const double* w, const double* gate_vec,
                            const Mat* r0, const std::vector<double>* r_prev, std::uint32_t h,
                            std::vector<double>& wr, std::vector<double>& half1,
                            std::vector<double>& half2) {
    const NodeId n = g.n_nodes;
    wr.resize(static_cast<std::size_t>(n) * h);
    half1.resize(n);
    half2.resize(n);
    for (NodeId v = 0; v < n; ++v) {
        const double* rv = r0 ? r0->row_ptr(v) : r_prev->data() + static_cast<std::size_t>(v) * h;
        double* out = wr.data() + static_cast<std::size_t>(v) * h;
        matvec(w, h, h, rv, out);
        half1[v] = dot(gate_vec, out, h);
        half2[v] = dot(gate_vec + h, out, h);
    }
}

/// Softmax attention over in-neighbors; e and alpha in in-CSR edge order.
inline void attention(const Graph& g, const std::vector<double>& c1,
                      const std::vector<double>& c2, std::vector<double>& e,
                      std::vector<double>& alpha, std::vector<double>& scratch) {
    e.resize(g.in_sources.size());
    alpha.resize(g.in_sources.size());
    for (NodeId v = 0; v < g.n_nodes; ++v) {
        const std::uint64_t begin = g.in_offsets[v], end = g.in_offsets[v + 1];
        if (begin == end) continue;
        double m = -std::numeric_limits<double>::infinity();
        for (std::uint64_t idx = begin; idx < end; ++idx) {
            e[idx] = c1[g.in_sources[idx]] + c2[v];
            m = std::max(m, e[idx]);
        }
        scratch.clear();
        for (std::uint64_t idx = begin; idx < end; ++idx) {
            alpha[idx] = std::exp(e[idx] - m);
            scratch.push_back(alpha[idx]);
        }
        const double denom = sorted_sum(scratch);
        for (std::uint64_t idx = begin; idx < end; ++idx) alpha[idx] /= denom;
    }
}

}  // namespace detail

inline Layer0Cache make_layer0_cache(const Graph& g, const ModelParams& params, const Mat& r0) {
    const auto& L = params.layout.layer[0];
    const std::uint32_t h = params.layout.config.hidden;
    Layer0Cache c;
    std::vector<double> scratch;
    detail::node_transforms(g, params.at(L.w_s), params.at(L.beta), &r0, nullptr, h, c.wr_s, c.g1,
                            c.g2);
    if (params.layout.config.share_w) {
        c.wr_r = c.wr_s;
        const double* gamma = params.at(L.gamma);
        c.c1.resize(g.n_nodes);
        c.c2.resize(g.n_nodes);
        for (NodeId v = 0; v < g.n_nodes; ++v) {
            const double* wr = c.wr_r.data() + static_cast<std::size_t>(v) * h;
            c.c1[v] = dot(gamma, wr, h);
            c.c2[v] = dot(gamma + h, wr, h);
        }
    } else {
        detail::node_transforms(g, params.at(L.w_r), params.at(L.gamma), &r0, nullptr, h, c.wr_r,
                                c.c1, c.c2);
    }
    detail::attention(g, c.c1, c.c2, c.e, c.alpha, scratch);
    return c;
}

/// Every intermediate quantity of one forward pass, retained for the exact
/// backward pass. Layer-0 transform products live in the shared cache.
struct ForwardTrace {
    double prediction = 0.0;
    std::uint32_t n_layers = 0;
    std::uint32_t hidden = 0;
    std::shared_ptr<const Layer0Cache> layer0;

    std::vector<std::vector<double>> s;  // K+1 vectors of n
    std::vector<std::vector<double>> r;  // K vectors of n*h (r at layers 1..K)

    // per layer k = 0..K-1 (cascade-dependent)
    std::vector<std::vector<double>> a;         // n
    std::vector<std::vector<double>> sum_s_in;  // n
    std::vector<std::vector<double>> b;         // n*h
    std::vector<std::vector<double>> gate_h1;   // n*kGateHidden (tanh outputs)
    std::vector<std::vector<double>> gate_h2;   // n*kGateHidden
    std::vector<std::vector<double>> gate_z3;   // n (pre-softplus)
    std::vector<std::vector<double>> gate_out;  // n

    // per layer k = 1..K-1 (k = 0 lives in layer0); indexed by k-1
    std::vector<std::vector<double>> wr_s, wr_r;          // n*h
    std::vector<std::vector<double>> g1, g2, c1, c2;      // n
    std::vector<std::vector<double>> e, alpha;            // per in-edge
};

inline ForwardTrace forward(const Graph& g, const ModelParams& params, const Cascade& cascade,
                            const Mat& r0, std::shared_ptr<const Layer0Cache> cache = nullptr) {
    const ModelConfig& cfg = params.layout.config;
    const std::uint32_t h = cfg.hidden;
    const std::uint32_t K = cfg.n_layers;
    const NodeId n = g.n_nodes;
    if (cfg.n_nodes != n) throw std::invalid_argument("forward: params built for different graph");
    if (r0.rows != n || r0.cols != h)
        throw std::invalid_argument("forward: r0 must be n_nodes x hidden");
    if (cascade.observed_active.empty())
        throw std::invalid_argument("forward: cascade has no observed adopters");
    for (NodeId v : cascade.observed_active)
        if (v >= n) throw std::invalid_argument("forward: observed adopter not in graph");

    if (!cache) cache = std::make_shared<const Layer0Cache>(make_layer0_cache(g, params, r0));

    std::vector<bool> is_seed(n, false);  // "seed" here = observed adopter, clamped to 1
    for (NodeId v : cascade.observed_active) is_seed[v] = true;

    ForwardTrace t;
    t.n_layers = K;
    t.hidden = h;
    t.layer0 = cache;
    t.s.resize(K + 1);
    t.r.resize(K);
    t.a.resize(K);
    t.sum_s_in.resize(K);
    t.b.resize(K);
    t.gate_h1.resize(K);
    t.gate_h2.resize(K);
    t.gate_z3.resize(K);
    t.gate_out.resize(K);
    if (K > 1) {
        t.wr_s.resize(K - 1);
        t.wr_r.resize(K - 1);
        t.g1.resize(K - 1);
        t.g2.resize(K - 1);
        t.c1.resize(K - 1);
        t.c2.resize(K - 1);
        t.e.resize(K - 1);
        t.alpha.resize(K - 1);
    }

    t.s[0].assign(n, 0.0);
    for (NodeId v : cascade.observed_active) t.s[0][v] = 1.0;

    std::vector<double> scratch;
    std::vector<std::pair<double, const double*>> ventries;

    for (std::uint32_t k = 0; k < K; ++k) {
        const auto& L = params.layout.layer[k];
        const std::vector<double>* wr_s;
        const std::vector<double>* wr_r;
        const std::vector<double>* g1;
        const std::vector<double>* g2;
        const std::vector<double>* c1;
        const std::vector<double>* c2;
        const std::vector<double>* alpha;
        if (k == 0) {
            wr_s = &cache->wr_s;
            wr_r = &cache->wr_r;
            g1 = &cache->g1;
            g2 = &cache->g2;
            c1 = &cache->c1;
            c2 = &cache->c2;
            alpha = &cache->alpha;
        } else {
            detail::node_transforms(g, params.at(L.w_s), params.at(L.beta), nullptr, &t.r[k - 1],
                                    h, t.wr_s[k - 1], t.g1[k - 1], t.g2[k - 1]);
            if (cfg.share_w) {
                t.wr_r[k - 1] = t.wr_s[k - 1];
                const double* gamma = params.at(L.gamma);
                t.c1[k - 1].resize(n);
                t.c2[k - 1].resize(n);
                for (NodeId v = 0; v < n; ++v) {
                    const double* wr = t.wr_r[k - 1].data() + static_cast<std::size_t>(v) * h;
                    t.c1[k - 1][v] = dot(gamma, wr, h);
                    t.c2[k - 1][v] = dot(gamma + h, wr, h);
                }
            } else {
                detail::node_transforms(g, params.at(L.w_r), params.at(L.gamma), nullptr,
                                        &t.r[k - 1], h, t.wr_r[k - 1], t.c1[k - 1], t.c2[k - 1]);
            }
            detail::attention(g, t.c1[k - 1], t.c2[k - 1], t.e[k - 1], t.alpha[k - 1], scratch);
            wr_s = &t.wr_s[k - 1];
            wr_r = &t.wr_r[k - 1];
            g1 = &t.g1[k - 1];
            g2 = &t.g2[k - 1];
            c1 = &t.c1[k - 1];
            c2 = &t.c2[k - 1];
            alpha = &t.alpha[k - 1];
        }
        (void)c1;
        (void)c2;

        const std::vector<double>& s_k = t.s[k];
        const double mu_s = params.values[L.mu_s];
        const double mu_a = params.values[L.mu_a];
        const double zeta_r = params.values[L.zeta_r];
        const double zeta_b = params.values[L.zeta_b];
        const double* p = params.at(params.layout.p);

        // state gate per node (input is the scalar state)
        auto& gh1 = t.gate_h1[k];
        auto& gh2 = t.gate_h2[k];
        auto& gz3 = t.gate_z3[k];
        auto& gout = t.gate_out[k];
        gh1.resize(static_cast<std::size_t>(n) * kGateHidden);
        gh2.resize(static_cast<std::size_t>(n) * kGateHidden);
        gz3.resize(n);
        gout.resize(n);
        {
            const double* w1 = params.at(L.gate_w1);
            const double* b1 = params.at(L.gate_b1);
            const double* w2 = params.at(L.gate_w2);
            const double* b2 = params.at(L.gate_b2);
            const double* w3 = params.at(L.gate_w3);
            const double b3 = params.values[L.gate_b3];
            for (NodeId v = 0; v < n; ++v) {
                double* h1 = gh1.data() + static_cast<std::size_t>(v) * kGateHidden;
                double* h2 = gh2.data() + static_cast<std::size_t>(v) * kGateHidden;
                for (std::uint32_t i = 0; i < kGateHidden; ++i)
                    h1[i] = std::tanh(w1[i] * s_k[v] + b1[i]);
                for (std::uint32_t i = 0; i < kGateHidden; ++i) {
                    double z = b2[i] + dot(w2 + i * kGateHidden, h1, kGateHidden);
                    h2[i] = std::tanh(z);
                }
                gz3[v] = b3 + dot(w3, h2, kGateHidden);
                gout[v] = detail::softplus(gz3[v]);
            }
        }

        // state aggregation and update
        auto& a_k = t.a[k];
        auto& sum_k = t.sum_s_in[k];
        a_k.resize(n);
        sum_k.resize(n);
        auto& s_next = t.s[k + 1];
        s_next.resize(n);
        for (NodeId v = 0; v < n; ++v) {
            const std::uint64_t begin = g.in_offsets[v], end = g.in_offsets[v + 1];
            scratch.clear();
            for (std::uint64_t idx = begin; idx < end; ++idx)
                scratch.push_back(s_k[g.in_sources[idx]]);
            sum_k[v] = sorted_sum(scratch);
            scratch.clear();
            for (std::uint64_t idx = begin; idx < end; ++idx) {
                const NodeId u = g.in_sources[idx];
                scratch.push_back((*g1)[u] * s_k[u]);
            }
            a_k[v] = sorted_sum(scratch) + (*g2)[v] * sum_k[v] + p[v];
            s_next[v] = is_seed[v] ? 1.0 : detail::logistic(mu_s * s_k[v] + mu_a * a_k[v]);
        }

        // influence aggregation and update
        auto& b_k = t.b[k];
        b_k.assign(static_cast<std::size_t>(n) * h, 0.0);
        auto& r_next = t.r[k];
        r_next.resize(static_cast<std::size_t>(n) * h);
        for (NodeId v = 0; v < n; ++v) {
            const std::uint64_t begin = g.in_offsets[v], end = g.in_offsets[v + 1];
            double* bv = b_k.data() + static_cast<std::size_t>(v) * h;
            if (begin != end) {
                ventries.clear();
                for (std::uint64_t idx = begin; idx < end; ++idx) {
                    const NodeId u = g.in_sources[idx];
                    ventries.emplace_back(gout[u] * (*alpha)[idx],
                                          wr_r->data() + static_cast<std::size_t>(u) * h);
                }
                std::sort(ventries.begin(), ventries.end(),
                          [h](const auto& x, const auto& y) {
                              if (x.first != y.first) return x.first < y.first;
                              return std::lexicographical_compare(x.second, x.second + h, y.second,
                                                                  y.second + h);
                          });
                for (const auto& [coef, vec] : ventries)
                    for (std::uint32_t d = 0; d < h; ++d) bv[d] += coef * vec[d];
            }
            const double* wrv = wr_r->data() + static_cast<std::size_t>(v) * h;
            double* rv = r_next.data() + static_cast<std::size_t>(v) * h;
            for (std::uint32_t d = 0; d < h; ++d)
                rv[d] = std::tanh(zeta_r * wrv[d] + zeta_b * bv[d]);
        }

        for (NodeId v = 0; v < n; ++v)
            if (!std::isfinite(s_next[v]))
                throw std::runtime_error("forward: non-finite state at layer " +
                                         std::to_string(k));
        for (double x : r_next)
            if (!std::isfinite(x))
                throw std::runtime_error("forward: non-finite influence representation at layer " +
                                         std::to_string(k));
    }

    scratch = t.s[K];
    t.prediction = sorted_sum(scratch);
    return t;
}

// ---------------------------------------------------------------------------
// Checkpoint file: magic "CGNN1", then u32 K, u32 hidden per layer boundary
// (K + 1 values), u8 share_w, u32 n_nodes, then every tensor as f64
// little-endian in declaration order.
// ---------------------------------------------------------------------------

inline void save_checkpoint(const ModelParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    const ModelConfig& cfg = params.layout.config;
    out.write("CGNN1", 5);
    write_u32(out, cfg.n_layers);
    for (std::uint32_t k = 0; k <= cfg.n_layers; ++k) write_u32(out, cfg.hidden);
    write_u8(out, cfg.share_w ? 1 : 0);
    write_u32(out, cfg.n_nodes);
    for (double v : params.values) write_f64(out, v);
    if (!out) throw std::runtime_error("short write: " + path);
}

inline ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[5];
    if (!in.read(magic, 5) || std::string(magic, 5) != "CGNN1")
        throw std::runtime_error(path + ": not a CGNN1 checkpoint");
    ModelConfig cfg;
    cfg.n_layers = read_u32(in);
    if (cfg.n_layers < 1 || cfg.n_layers > 64)
        throw std::runtime_error(path + ": corrupt layer count");
    std::uint32_t h0 = 0;
    for (std::uint32_t k = 0; k <= cfg.n_layers; ++k) {
        std::uint32_t h = read_u32(in);
        if (k == 0) h0 = h;
        else if (h != h0)
            throw std::runtime_error(path + ": layers must share one hidden width");
    }
    cfg.hidden = h0;
    cfg.share_w = read_u8(in) != 0;
    cfg.n_nodes = read_u32(in);
    ModelParams params;
    params.layout = build_layout(cfg);
    params.values.resize(params.layout.total);
    for (double& v : params.values) v = read_f64(in);
    return params;
}

}  // namespace cgnn
