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

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include "cgnn/matrix.hpp"

namespace cgnn {

// Little-endian primitives. All binary file formats in this project are
// little-endian regardless of host order.

inline void write_u32(std::ostream& out, std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap32(v);
    out.write(reinterpret_cast<const char*>(&v), 4);
}

inline void write_u8(std::ostream& out, std::uint8_t v) {
    out.write(reinterpret_cast<const char*>(&v), 1);
}

inline void write_f64(std::ostream& out, double d) {
    std::uint64_t v = std::bit_cast<std::uint64_t>(d);
    if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap64(v);
    out.write(reinterpret_cast<const char*>(&v), 8);
}

inline std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), 4)) throw std::runtime_error("unexpected EOF");
    if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap32(v);
    return v;
}

inline std::uint8_t read_u8(std::istream& in) {
    std::uint8_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), 1)) throw std::runtime_error("unexpected EOF");
    return v;
}

inline double read_f64(std::istream& in) {
    std::uint64_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), 8)) throw std::runtime_error("unexpected EOF");
    if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap64(v);
    return std::bit_cast<double>(v);
}

// Matrix file: [u32 n][u32 d][f64 x n*d] row-major, little-endian. Used for
// node features and embeddings.

inline void save_matrix(const Mat& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write matrix file: " + path);
    write_u32(out, static_cast<std::uint32_t>(m.rows));
    write_u32(out, static_cast<std::uint32_t>(m.cols));
    for (double v : m.data) write_f64(out, v);
    if (!out) throw std::runtime_error("short write: " + path);
}

inline Mat load_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open matrix file: " + path);
    std::uint32_t n = read_u32(in);
    std::uint32_t d = read_u32(in);
    Mat m(n, d);
    for (double& v : m.data) v = read_f64(in);
    return m;
}

}  // namespace cgnn
