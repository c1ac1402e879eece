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

/// First/second moment accumulators mirroring the flat parameter vector.
struct OptimizerState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;

    static OptimizerState zeros(std::size_t size) {
        OptimizerState s;
        s.m.assign(size, 0.0);
        s.v.assign(size, 0.0);
        return s;
    }
};

struct AdamConfig {
    double lr_other = 5e-3;   // every tensor except the self-activation vector
    double lr_self = 1e-3;    // per-user self-activation parameters
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One Adam update with bias correction. The self-activation segment of the
/// parameter vector uses its own learning rate; everything else uses
/// lr_other. Pure in (params, grads, state, cfg).
inline void adam_step(ModelParams& params, std::span<const double> grads, OptimizerState& state,
                      const AdamConfig& cfg) {
    const std::size_t size = params.values.size();
    if (grads.size() != size || state.m.size() != size || state.v.size() != size)
        throw std::invalid_argument("adam_step: shape mismatch");
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bias1 = 1.0 - std::pow(cfg.beta1, t);
    const double bias2 = 1.0 - std::pow(cfg.beta2, t);
    const std::size_t p_begin = params.layout.p;
    for (std::size_t i = 0; i < size; ++i) {
        const double gi = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * gi;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * gi * gi;
        const double mhat = state.m[i] / bias1;
        const double vhat = state.v[i] / bias2;
        const double lr = i >= p_begin ? cfg.lr_self : cfg.lr_other;
        params.values[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

}  // namespace cgnn
