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
#include <span>
#include <stdexcept>
#include <vector>

#include "cgnn/model.hpp"

namespace cgnn {

constexpr double kStateClip = 1e-7;  // probability clip for the user-level term

struct LossBreakdown {
    double total = 0.0;
    double mrse = 0.0;
    double l_user = 0.0;
    double l2 = 0.0;
    double eta = 0.0;
    double lambda = 0.0;
};

struct BatchItem {
    const ForwardTrace* trace;
    const Cascade* cascade;
};

/// total = MRSE + eta * (squared L2 over all trainable parameters)
///       + lambda * (mean per-user binary cross entropy against the final
///         activation indicators, states clipped to [1e-7, 1 - 1e-7]).
inline LossBreakdown loss(std::span<const BatchItem> batch, const ModelParams& params, double eta,
                          double lambda) {
    if (batch.empty()) throw std::invalid_argument("loss: empty batch");
    const double m = static_cast<double>(batch.size());
    const std::uint32_t n = params.layout.config.n_nodes;
    LossBreakdown out;
    out.eta = eta;
    out.lambda = lambda;
    std::vector<bool> final_state(n);
    for (const BatchItem& item : batch) {
        const double truth = static_cast<double>(item.cascade->final_size);
        if (item.cascade->final_size < 1)
            throw std::invalid_argument("loss: cascade final_size must be >= 1");
        const double rel = (item.trace->prediction - truth) / truth;
        out.mrse += rel * rel / m;

        std::fill(final_state.begin(), final_state.end(), false);
        for (NodeId v : item.cascade->final_active) final_state[v] = true;
        const std::vector<double>& s_final = item.trace->s[item.trace->n_layers];
        double ce = 0.0;
        for (std::uint32_t v = 0; v < n; ++v) {
            double s = std::min(1.0 - kStateClip, std::max(kStateClip, s_final[v]));
            ce -= final_state[v] ? std::log(s) : std::log(1.0 - s);
        }
        out.l_user += ce / (m * static_cast<double>(n));
    }
    for (double v : params.values) out.l2 += v * v;
    out.total = out.mrse + eta * out.l2 + lambda * out.l_user;
    return out;
}

/// Exact reverse-mode gradient of loss(...).total with respect to every
/// parameter, shaped like ModelParams::values. Accumulation order is fixed
/// (batch order, then ascending node index), so results are reproducible.
/// All traces in the batch must have been produced by `params` on `r0`.
inline std::vector<double> gradients(const Graph& g, const ModelParams& params, const Mat& r0,
                                     std::span<const BatchItem> batch, double eta, double lambda) {
    if (batch.empty()) throw std::invalid_argument("gradients: empty batch");
    const ModelConfig& cfg = params.layout.config;
    const std::uint32_t h = cfg.hidden;
    const std::uint32_t K = cfg.n_layers;
    const NodeId n = g.n_nodes;
    const double m = static_cast<double>(batch.size());
    for (const BatchItem& item : batch) {
        if (!item.trace || !item.trace->layer0)
            throw std::invalid_argument("gradients: missing forward trace");
        if (item.trace->n_layers != K || item.trace->hidden != h)
            throw std::invalid_argument("gradients: trace does not match params");
    }

    std::vector<double> grad(params.layout.total, 0.0);
    const std::size_t nh = static_cast<std::size_t>(n) * h;

    // deferred layer-0 outer products (r0 is shared across the batch)
    std::vector<double> acc_dwr_s0(nh, 0.0), acc_dwr_r0(nh, 0.0);

    // per-item scratch
    std::vector<double> ds_next(n), ds_cur(n), da(n), dg1(n), dg2(n), dc1(n), dc2(n), dgate(n);
    std::vector<double> dr_next(nh), dr_cur(nh), dwr_s(nh), dwr_r(nh), db(h), dy(h);
    std::vector<double> dalpha(g.in_sources.size()), de(g.in_sources.size());
    std::vector<double> gate_dz1(kGateHidden), gate_dz2(kGateHidden), gate_dh1(kGateHidden),
        gate_dh2(kGateHidden);
    std::vector<bool> is_seed(n), final_state(n);

    for (const BatchItem& item : batch) {
        const ForwardTrace& t = *item.trace;
        const Cascade& cascade = *item.cascade;
        const Layer0Cache& cache = *t.layer0;

        std::fill(is_seed.begin(), is_seed.end(), false);
        for (NodeId v : cascade.observed_active) is_seed[v] = true;
        std::fill(final_state.begin(), final_state.end(), false);
        for (NodeId v : cascade.final_active) final_state[v] = true;

        // dL/ds^K: sum pooling plus the user-level cross entropy
        const double truth = static_cast<double>(cascade.final_size);
        const double dpred = 2.0 * (t.prediction - truth) / (truth * truth * m);
        const std::vector<double>& s_final = t.s[K];
        for (NodeId v = 0; v < n; ++v) {
            double d = dpred;
            if (lambda != 0.0) {
                const double s = s_final[v];
                if (s > kStateClip && s < 1.0 - kStateClip) {
                    const double y = final_state[v] ? 1.0 : 0.0;
                    d -= lambda / (m * static_cast<double>(n)) * (y / s - (1.0 - y) / (1.0 - s));
                }
            }
            ds_next[v] = d;
        }
        std::fill(dr_next.begin(), dr_next.end(), 0.0);  // loss does not read r^K

        for (std::uint32_t k = K; k-- > 0;) {
            const auto& L = params.layout.layer[k];
            const bool first = (k == 0);
            // dr^{k+1} is identically zero at the top layer (the loss reads
            // only states), so the whole influence side has zero gradient
            // there and can be skipped.
            const bool influence_active = (k + 1 < K);
            const std::vector<double>& s_k = t.s[k];
            const std::vector<double>& s_next = t.s[k + 1];
            const std::vector<double>& r_next = t.r[k];
            const std::vector<double>& wr_s = first ? cache.wr_s : t.wr_s[k - 1];
            const std::vector<double>& wr_r = first ? cache.wr_r : t.wr_r[k - 1];
            const std::vector<double>& g1 = first ? cache.g1 : t.g1[k - 1];
            const std::vector<double>& g2 = first ? cache.g2 : t.g2[k - 1];
            const std::vector<double>& alpha = first ? cache.alpha : t.alpha[k - 1];
            const double mu_s = params.values[L.mu_s];
            const double mu_a = params.values[L.mu_a];
            const double zeta_r = params.values[L.zeta_r];
            const double zeta_b = params.values[L.zeta_b];

            // clamped states are constants: no gradient enters them
            for (NodeId v = 0; v < n; ++v)
                if (is_seed[v]) ds_next[v] = 0.0;

            std::fill(ds_cur.begin(), ds_cur.end(), 0.0);
            std::fill(dwr_s.begin(), dwr_s.end(), 0.0);
            std::fill(dwr_r.begin(), dwr_r.end(), 0.0);
            std::fill(dg1.begin(), dg1.end(), 0.0);
            std::fill(dg2.begin(), dg2.end(), 0.0);
            std::fill(dc1.begin(), dc1.end(), 0.0);
            std::fill(dc2.begin(), dc2.end(), 0.0);
            std::fill(dgate.begin(), dgate.end(), 0.0);

            // state update: s^{k+1} = logistic(mu_s s + mu_a a)
            double dmu_s = 0.0, dmu_a = 0.0;
            for (NodeId v = 0; v < n; ++v) {
                if (is_seed[v]) {
                    da[v] = 0.0;
                    continue;
                }
                const double sv = s_next[v];
                const double dz = ds_next[v] * sv * (1.0 - sv);
                dmu_s += dz * s_k[v];
                dmu_a += dz * t.a[k][v];
                ds_cur[v] += dz * mu_s;
                da[v] = dz * mu_a;
            }
            grad[L.mu_s] += dmu_s;
            grad[L.mu_a] += dmu_a;

            // state aggregation: a_v = sum_u g1_u s_u + g2_v S_v + p_v
            for (NodeId v = 0; v < n; ++v) {
                const double dav = da[v];
                if (dav != 0.0) {
                    grad[params.layout.p + v] += dav;
                    dg2[v] += dav * t.sum_s_in[k][v];
                    const double g2v = g2[v];
                    for (std::uint64_t idx = g.in_offsets[v]; idx < g.in_offsets[v + 1]; ++idx) {
                        const NodeId u = g.in_sources[idx];
                        dg1[u] += dav * s_k[u];
                        ds_cur[u] += dav * (g1[u] + g2v);
                    }
                }
            }

            // influence update: r^{k+1} = tanh(zeta_r wr_r + zeta_b b)
            double dzeta_r = 0.0, dzeta_b = 0.0;
            for (NodeId v = 0; influence_active && v < n; ++v) {
                const double* rv = r_next.data() + static_cast<std::size_t>(v) * h;
                const double* drv = dr_next.data() + static_cast<std::size_t>(v) * h;
                const double* wrv = wr_r.data() + static_cast<std::size_t>(v) * h;
                const double* bv = t.b[k].data() + static_cast<std::size_t>(v) * h;
                double* dwrv = dwr_r.data() + static_cast<std::size_t>(v) * h;
                for (std::uint32_t d = 0; d < h; ++d) {
                    const double dyd = drv[d] * (1.0 - rv[d] * rv[d]);
                    dy[d] = dyd;
                    dzeta_r += dyd * wrv[d];
                    dzeta_b += dyd * bv[d];
                    dwrv[d] += zeta_r * dyd;
                }
                // influence aggregation: b_v = sum_u gate_u alpha_uv wr_r_u
                const double* gout = t.gate_out[k].data();
                for (std::uint64_t idx = g.in_offsets[v]; idx < g.in_offsets[v + 1]; ++idx) {
                    const NodeId u = g.in_sources[idx];
                    const double* wru = wr_r.data() + static_cast<std::size_t>(u) * h;
                    double* dwru = dwr_r.data() + static_cast<std::size_t>(u) * h;
                    double dcoef = 0.0;
                    const double zb = zeta_b;
                    for (std::uint32_t d = 0; d < h; ++d) {
                        const double dbd = zb * dy[d];
                        dcoef += dbd * wru[d];
                        dwru[d] += gout[u] * alpha[idx] * dbd;
                    }
                    dgate[u] += alpha[idx] * dcoef;
                    dalpha[idx] = gout[u] * dcoef;
                }
            }
            grad[L.zeta_r] += dzeta_r;
            grad[L.zeta_b] += dzeta_b;

            // softmax backward, then e_uv = c1_u + c2_v
            for (NodeId v = 0; influence_active && v < n; ++v) {
                const std::uint64_t begin = g.in_offsets[v], end = g.in_offsets[v + 1];
                if (begin == end) continue;
                double inner = 0.0;
                for (std::uint64_t idx = begin; idx < end; ++idx)
                    inner += alpha[idx] * dalpha[idx];
                for (std::uint64_t idx = begin; idx < end; ++idx) {
                    const double dei = alpha[idx] * (dalpha[idx] - inner);
                    de[idx] = dei;
                    dc1[g.in_sources[idx]] += dei;
                    dc2[v] += dei;
                }
            }

            // state gate MLP backward
            if (influence_active) {
                const double* w1 = params.at(L.gate_w1);
                const double* w2 = params.at(L.gate_w2);
                const double* w3 = params.at(L.gate_w3);
                for (NodeId v = 0; v < n; ++v) {
                    const double dg = dgate[v];
                    if (dg == 0.0) continue;
                    const double* h1 = t.gate_h1[k].data() + static_cast<std::size_t>(v) * kGateHidden;
                    const double* h2 = t.gate_h2[k].data() + static_cast<std::size_t>(v) * kGateHidden;
                    const double dz3 = dg * detail::logistic(t.gate_z3[k][v]);
                    grad[L.gate_b3] += dz3;
                    for (std::uint32_t i = 0; i < kGateHidden; ++i) {
                        grad[L.gate_w3 + i] += dz3 * h2[i];
                        gate_dh2[i] = dz3 * w3[i];
                    }
                    for (std::uint32_t i = 0; i < kGateHidden; ++i) {
                        gate_dz2[i] = gate_dh2[i] * (1.0 - h2[i] * h2[i]);
                        grad[L.gate_b2 + i] += gate_dz2[i];
                    }
                    std::fill(gate_dh1.begin(), gate_dh1.end(), 0.0);
                    for (std::uint32_t i = 0; i < kGateHidden; ++i) {
                        const double dz2i = gate_dz2[i];
                        const double* w2row = w2 + i * kGateHidden;
                        double* gw2row = grad.data() + L.gate_w2 + i * kGateHidden;
                        for (std::uint32_t j = 0; j < kGateHidden; ++j) {
                            gw2row[j] += dz2i * h1[j];
                            gate_dh1[j] += dz2i * w2row[j];
                        }
                    }
                    for (std::uint32_t i = 0; i < kGateHidden; ++i) {
                        const double dz1i = gate_dh1[i] * (1.0 - h1[i] * h1[i]);
                        grad[L.gate_w1 + i] += dz1i * s_k[v];
                        grad[L.gate_b1 + i] += dz1i;
                        ds_cur[v] += dz1i * w1[i];
                    }
                }
            }

            // gating vectors and the transform products
            {
                const double* beta = params.at(L.beta);
                const double* gamma = params.at(L.gamma);
                for (NodeId v = 0; v < n; ++v) {
                    const double* wsv = wr_s.data() + static_cast<std::size_t>(v) * h;
                    double* dwsv = dwr_s.data() + static_cast<std::size_t>(v) * h;
                    const double d1 = dg1[v], d2 = dg2[v];
                    for (std::uint32_t d = 0; d < h; ++d) {
                        grad[L.beta + d] += d1 * wsv[d];
                        grad[L.beta + h + d] += d2 * wsv[d];
                        dwsv[d] += d1 * beta[d] + d2 * beta[h + d];
                    }
                    if (influence_active) {
                        const double* wrv = wr_r.data() + static_cast<std::size_t>(v) * h;
                        double* dwrv = dwr_r.data() + static_cast<std::size_t>(v) * h;
                        const double d3 = dc1[v], d4 = dc2[v];
                        for (std::uint32_t d = 0; d < h; ++d) {
                            grad[L.gamma + d] += d3 * wrv[d];
                            grad[L.gamma + h + d] += d4 * wrv[d];
                            dwrv[d] += d3 * gamma[d] + d4 * gamma[h + d];
                        }
                    }
                }
            }

            // through the transforms: wr = W r
            if (!first) {
                const std::vector<double>& r_k = t.r[k - 1];
                std::fill(dr_cur.begin(), dr_cur.end(), 0.0);
                for (NodeId v = 0; v < n; ++v) {
                    const double* rv = r_k.data() + static_cast<std::size_t>(v) * h;
                    double* drv = dr_cur.data() + static_cast<std::size_t>(v) * h;
                    const double* dwsv = dwr_s.data() + static_cast<std::size_t>(v) * h;
                    outer_add(grad.data() + L.w_s, h, h, dwsv, rv);
                    matvec_transpose_add(params.at(L.w_s), h, h, dwsv, drv);
                    if (influence_active) {
                        const double* dwrv = dwr_r.data() + static_cast<std::size_t>(v) * h;
                        outer_add(grad.data() + L.w_r, h, h, dwrv, rv);
                        matvec_transpose_add(params.at(L.w_r), h, h, dwrv, drv);
                    }
                }
                dr_next.swap(dr_cur);
            } else {
                for (std::size_t i = 0; i < nh; ++i) acc_dwr_s0[i] += dwr_s[i];
                if (influence_active)
                    for (std::size_t i = 0; i < nh; ++i) acc_dwr_r0[i] += dwr_r[i];
            }

            if (k > 0) {
                // s^k at clamped nodes is a constant input to this layer
                for (NodeId v = 0; v < n; ++v)
                    if (is_seed[v]) ds_cur[v] = 0.0;
                ds_next.swap(ds_cur);
            }
        }
    }

    // deferred layer-0 transform gradients against the shared r0
    {
        const auto& L0 = params.layout.layer[0];
        for (NodeId v = 0; v < n; ++v) {
            const double* rv = r0.row_ptr(v);
            outer_add(grad.data() + L0.w_s, h, h, acc_dwr_s0.data() + static_cast<std::size_t>(v) * h,
                      rv);
            outer_add(grad.data() + L0.w_r, h, h, acc_dwr_r0.data() + static_cast<std::size_t>(v) * h,
                      rv);
        }
    }

    if (eta != 0.0)
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += eta * 2.0 * params.values[i];
    return grad;
}

}  // namespace cgnn
