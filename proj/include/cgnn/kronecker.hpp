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
#include <vector>

#include "cgnn/graph.hpp"
#include "cgnn/rng.hpp"

namespace cgnn {

/// Stochastic Kronecker graph configuration. seed_matrix is row-major
/// [t00, t01, t10, t11]; entry t_ab is the bit-level probability that a
/// source bit a connects to a destination bit b.
struct KroneckerConfig {
    std::array<double, 4> seed_matrix{0.9, 0.5, 0.5, 0.1};
    std::uint32_t iterations = 11;
    std::uint64_t rng_seed = 1;
};

namespace detail {

// Pairs (u, v) are grouped by the per-bit pattern counts (c00, c01, c10, c11).
// Every pair in a class has the same edge probability, classes partition the
// pair space, and pairs within a class are indexed by multiset-permutation
// rank. Independent Bernoulli sampling then reduces to geometric skips per
// class, which keeps generation O(expected edges) instead of O(4^k).
struct PatternClass {
    std::array<std::uint32_t, 4> counts;
    double probability;
    std::uint64_t n_pairs;
};

inline std::uint64_t binomial_u64(std::uint32_t n, std::uint32_t k) {
    if (k > n) return 0;
    if (k > n - k) k = n - k;
    std::uint64_t result = 1;
    for (std::uint32_t i = 1; i <= k; ++i) {
        result = result * (n - k + i) / i;  // exact: partial products are binomials
    }
    return result;
}

inline std::uint64_t multinomial4(std::uint32_t n, const std::array<std::uint32_t, 4>& c) {
    return binomial_u64(n, c[0]) * binomial_u64(n - c[0], c[1]) *
           binomial_u64(n - c[0] - c[1], c[2]);
}

/// Decodes the `rank`-th pair (lexicographic over per-position patterns
/// 00 < 01 < 10 < 11, most significant bit first) of a pattern class.
inline Edge unrank_pair(std::uint64_t rank, std::array<std::uint32_t, 4> counts,
                        std::uint32_t k) {
    std::uint64_t u = 0, v = 0;
    for (std::uint32_t pos = 0; pos < k; ++pos) {
        const std::uint32_t remaining = k - pos - 1;
        for (std::uint32_t pattern = 0; pattern < 4; ++pattern) {
            if (counts[pattern] == 0) continue;
            --counts[pattern];
            std::uint64_t block = multinomial4(remaining, counts);
            if (rank < block) {
                u = (u << 1) | (pattern >> 1);
                v = (v << 1) | (pattern & 1);
                break;
            }
            rank -= block;
            ++counts[pattern];
        }
    }
    return {static_cast<NodeId>(u), static_cast<NodeId>(v)};
}

}  // namespace detail

/// Expected number of directed edges (self-loops excluded) under `cfg`;
/// closed form over pattern classes. Used for sanity guards and reporting.
inline double kronecker_expected_edges(const KroneckerConfig& cfg) {
    const auto& t = cfg.seed_matrix;
    double all = std::pow(t[0] + t[1] + t[2] + t[3], cfg.iterations);
    double loops = std::pow(t[0] + t[3], cfg.iterations);
    return all - loops;
}

/// Samples a stochastic Kronecker graph on 2^iterations nodes: each ordered
/// pair (u, v), u != v, becomes an edge independently with probability
/// prod_i seed[u_i][v_i] over bit positions i. Deterministic per rng_seed.
inline Graph generate_kronecker(const KroneckerConfig& cfg) {
    if (cfg.iterations < 1) throw std::invalid_argument("generate_kronecker: iterations >= 1");
    if (cfg.iterations > 20)
        throw std::invalid_argument("generate_kronecker: iterations > 20 rejected");
    for (double p : cfg.seed_matrix)
        if (!(p >= 0.0 && p <= 1.0))
            throw std::invalid_argument("generate_kronecker: seed entries must be in [0,1]");
    if (kronecker_expected_edges(cfg) > 1e8)
        throw std::invalid_argument("generate_kronecker: expected edge count exceeds 1e8");

    const std::uint32_t k = cfg.iterations;
    const NodeId n = static_cast<NodeId>(1u << k);
    Rng rng(cfg.rng_seed);
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(kronecker_expected_edges(cfg) * 1.3) + 16);

    std::array<std::uint32_t, 4> c{};
    for (c[0] = 0; c[0] <= k; ++c[0]) {
        for (c[1] = 0; c[1] + c[0] <= k; ++c[1]) {
            for (c[2] = 0; c[2] + c[1] + c[0] <= k; ++c[2]) {
                c[3] = k - c[0] - c[1] - c[2];
                if (c[1] == 0 && c[2] == 0) continue;  // u == v: self-loop class
                double p = 1.0;
                for (int i = 0; i < 4; ++i) p *= std::pow(cfg.seed_matrix[i], c[i]);
                if (p <= 0.0) continue;
                const std::uint64_t n_pairs = detail::multinomial4(k, c);
                if (p >= 1.0) {
                    for (std::uint64_t r = 0; r < n_pairs; ++r)
                        edges.push_back(detail::unrank_pair(r, c, k));
                    continue;
                }
                const double log1mp = std::log1p(-p);
                std::uint64_t r = 0;
                for (;;) {
                    double v01 = 1.0 - rng.uniform01();  // (0, 1]
                    double skip = std::floor(std::log(v01) / log1mp);
                    if (skip >= static_cast<double>(n_pairs - r)) break;
                    r += static_cast<std::uint64_t>(skip);
                    edges.push_back(detail::unrank_pair(r, c, k));
                    ++r;
                    if (r >= n_pairs) break;
                }
            }
        }
    }
    return Graph::from_edges(n, std::move(edges));
}

}  // namespace cgnn
