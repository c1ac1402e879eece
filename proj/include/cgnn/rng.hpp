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
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace cgnn {

/// SplitMix64 step; used to whiten seeds and derive independent stream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Deterministic RNG. All distributions are implemented directly on the raw
/// 64-bit stream: the std:: distribution adaptors are implementation-defined
/// and would break the same-seed/same-bytes reproducibility contract.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(whiten(seed)) {}

    /// Independent substream `index` of master seed `seed`. Streams derived
    /// this way are used for per-cascade RNG so simulations can run in any
    /// order (or in parallel) with identical results.
    static Rng stream(std::uint64_t seed, std::uint64_t index) {
        std::uint64_t s = seed;
        std::uint64_t a = splitmix64(s);
        s = index ^ 0x5851f42d4c957f2dull;
        std::uint64_t b = splitmix64(s);
        return Rng(a ^ (b + 0x2545f4914f6cdd1dull));
    }

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform double in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Unbiased uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
        const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
        for (;;) {
            std::uint64_t x = gen_();
            if (x >= threshold) return x % n;
        }
    }

    /// Standard normal via Box-Muller (no state caching).
    double normal() {
        double u1 = 1.0 - uniform01();  // (0, 1]
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// k distinct values from [0, n), ascending.
    std::vector<std::uint32_t> sample_without_replacement(std::uint32_t n, std::uint32_t k) {
        if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
        std::vector<std::uint32_t> pool(n);
        std::iota(pool.begin(), pool.end(), 0u);
        for (std::uint32_t i = 0; i < k; ++i) {
            std::uint32_t j = i + static_cast<std::uint32_t>(uniform_int(n - i));
            std::swap(pool[i], pool[j]);
        }
        pool.resize(k);
        std::sort(pool.begin(), pool.end());
        return pool;
    }

private:
    static std::uint64_t whiten(std::uint64_t seed) {
        std::uint64_t s = seed;
        return splitmix64(s);
    }

    std::mt19937_64 gen_;
};

}  // namespace cgnn
