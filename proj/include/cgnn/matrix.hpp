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
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace cgnn {

/// Dense row-major matrix of doubles. Deliberately minimal: the model works
/// on flat parameter vectors, this type only carries node-feature and
/// embedding tables around.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    const double* row_ptr(std::size_t i) const { return data.data() + i * cols; }
    double* row_ptr(std::size_t i) { return data.data() + i * cols; }

    bool all_finite() const {
        for (double x : data)
            if (!std::isfinite(x)) return false;
        return true;
    }
};

/// y = W x with W row-major (out_dim x in_dim).
inline void matvec(const double* w, std::size_t out_dim, std::size_t in_dim, const double* x,
                   double* y) {
    for (std::size_t i = 0; i < out_dim; ++i) {
        const double* wrow = w + i * in_dim;
        double acc = 0.0;
        for (std::size_t j = 0; j < in_dim; ++j) acc += wrow[j] * x[j];
        y[i] = acc;
    }
}

/// y += W^T g, i.e. the input-side pullback of matvec.
inline void matvec_transpose_add(const double* w, std::size_t out_dim, std::size_t in_dim,
                                 const double* g, double* y) {
    for (std::size_t i = 0; i < out_dim; ++i) {
        const double* wrow = w + i * in_dim;
        const double gi = g[i];
        for (std::size_t j = 0; j < in_dim; ++j) y[j] += wrow[j] * gi;
    }
}

/// W += g x^T (outer-product accumulation into a row-major matrix).
inline void outer_add(double* w, std::size_t out_dim, std::size_t in_dim, const double* g,
                      const double* x) {
    for (std::size_t i = 0; i < out_dim; ++i) {
        double* wrow = w + i * in_dim;
        const double gi = g[i];
        for (std::size_t j = 0; j < in_dim; ++j) wrow[j] += gi * x[j];
    }
}

inline double dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

/// Sum of `buf` in ascending value order. The result depends only on the
/// multiset of values, which keeps whole-graph reductions bit-identical under
/// node relabeling. `buf` is sorted in place.
inline double sorted_sum(std::vector<double>& buf) {
    std::sort(buf.begin(), buf.end());
    double acc = 0.0;
    for (double x : buf) acc += x;
    return acc;
}

}  // namespace cgnn
