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
#include <cassert>
#include <cstdint>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cgnn/graph.hpp"
#include "cgnn/rng.hpp"

#include <nlohmann/json.hpp>

namespace cgnn {

/// One information item: who adopted it and when, the prefix observed within
/// the observation window, and the final outcome.
struct Cascade {
    std::string id;
    std::vector<std::pair<NodeId, std::uint32_t>> activations;  // (node, step), sorted
    std::vector<NodeId> observed_active;                        // sorted; activation step < T
    std::vector<NodeId> final_active;                           // sorted
    std::uint32_t final_size = 0;

    std::vector<NodeId> seeds() const {
        std::vector<NodeId> s;
        for (const auto& [node, step] : activations)
            if (step == 0) s.push_back(node);
        std::sort(s.begin(), s.end());
        return s;
    }
};

/// seeds subset-of observed subset-of final, sizes consistent, no repeats.
inline bool cascade_invariants_hold(const Cascade& c) {
    if (c.final_size != c.final_active.size()) return false;
    if (c.observed_active.empty()) return false;
    if (!std::is_sorted(c.observed_active.begin(), c.observed_active.end())) return false;
    if (!std::is_sorted(c.final_active.begin(), c.final_active.end())) return false;
    if (std::adjacent_find(c.final_active.begin(), c.final_active.end()) != c.final_active.end())
        return false;
    auto sd = c.seeds();
    if (sd.empty()) return false;
    if (!std::includes(c.observed_active.begin(), c.observed_active.end(), sd.begin(), sd.end()))
        return false;
    if (!std::includes(c.final_active.begin(), c.final_active.end(), c.observed_active.begin(),
                       c.observed_active.end()))
        return false;
    std::vector<NodeId> from_acts;
    for (const auto& [node, step] : c.activations) from_acts.push_back(node);
    std::sort(from_acts.begin(), from_acts.end());
    if (std::adjacent_find(from_acts.begin(), from_acts.end()) != from_acts.end()) return false;
    return from_acts == c.final_active;
}

/// Seed-set size n drawn with P(n) proportional to n^-exponent on
/// {1..max_size}; members uniform without replacement.
inline std::vector<NodeId> sample_seed_set_with(const Graph& g, double exponent,
                                                std::uint32_t max_size, Rng& rng) {
    if (exponent <= 1.0) throw std::invalid_argument("sample_seed_set: exponent must be > 1");
    if (max_size < 1 || max_size > g.n_nodes)
        throw std::invalid_argument("sample_seed_set: max_size must be in [1, n_nodes]");
    double total = 0.0;
    std::vector<double> cumulative(max_size);
    for (std::uint32_t s = 1; s <= max_size; ++s) {
        total += std::pow(static_cast<double>(s), -exponent);
        cumulative[s - 1] = total;
    }
    double x = rng.uniform01() * total;
    std::uint32_t size = static_cast<std::uint32_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), x) - cumulative.begin() + 1);
    if (size > max_size) size = max_size;
    return rng.sample_without_replacement(g.n_nodes, size);
}

inline std::vector<NodeId> sample_seed_set(const Graph& g, double exponent,
                                           std::uint32_t max_size, std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    return sample_seed_set_with(g, exponent, max_size, rng);
}

/// Discrete-step independent-cascade simulation. A node activated at step t
/// gets one chance, at step t + 1, to activate each inactive out-neighbor v
/// with probability 1 / in_degree(v). Runs to exhaustion; the observed prefix
/// is every activation at step < t_observe.
inline Cascade simulate_ic_with(const Graph& g, std::span<const NodeId> seeds,
                                std::uint32_t t_observe, Rng& rng) {
    if (seeds.empty()) throw std::invalid_argument("simulate_ic: seeds must be nonempty");
    if (t_observe < 1) throw std::invalid_argument("simulate_ic: t_observe >= 1 required");
    std::vector<bool> active(g.n_nodes, false);
    Cascade c;
    std::vector<NodeId> frontier;
    for (NodeId s : seeds) {
        if (s >= g.n_nodes) throw std::invalid_argument("simulate_ic: seed node not in graph");
        if (!active[s]) {
            active[s] = true;
            frontier.push_back(s);
        }
    }
    std::sort(frontier.begin(), frontier.end());
    for (NodeId s : frontier) c.activations.emplace_back(s, 0u);

    std::uint32_t step = 0;
    std::vector<NodeId> next;
    while (!frontier.empty()) {
        ++step;
        next.clear();
        for (NodeId u : frontier) {
            for (NodeId v : g.out_neighbors(u)) {
                if (active[v]) continue;
                const std::uint64_t d = g.in_degree(v);
                assert(d > 0);  // v has the in-edge u -> v
                if (rng.uniform01() < 1.0 / static_cast<double>(d)) {
                    active[v] = true;
                    next.push_back(v);
                }
            }
        }
        std::sort(next.begin(), next.end());
        for (NodeId v : next) c.activations.emplace_back(v, step);
        frontier.swap(next);
    }
    for (const auto& [node, t] : c.activations) {
        if (t < t_observe) c.observed_active.push_back(node);
        c.final_active.push_back(node);
    }
    std::sort(c.observed_active.begin(), c.observed_active.end());
    std::sort(c.final_active.begin(), c.final_active.end());
    c.final_size = static_cast<std::uint32_t>(c.final_active.size());
    return c;
}

inline Cascade simulate_ic(const Graph& g, std::span<const NodeId> seeds, std::uint32_t t_observe,
                           std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    return simulate_ic_with(g, seeds, t_observe, rng);
}

/// Exact expected final size of the IC process by live-edge enumeration:
/// every edge u -> v is live independently with probability 1/in_degree(v),
/// and the final set is exactly the set reachable from the seeds over live
/// edges. Exponential in |E|; the 20-edge cap keeps it a test oracle.
inline double exact_expected_spread(const Graph& g, std::span<const NodeId> seeds) {
    if (seeds.empty()) throw std::invalid_argument("exact_expected_spread: seeds nonempty");
    const std::uint64_t m = g.n_edges();
    if (m > 20) throw std::invalid_argument("exact_expected_spread: more than 20 edges");
    std::vector<Edge> edges = g.edge_list();
    std::vector<double> prob(m);
    for (std::size_t e = 0; e < m; ++e)
        prob[e] = 1.0 / static_cast<double>(g.in_degree(edges[e].second));

    std::vector<NodeId> stack;
    std::vector<bool> reached(g.n_nodes);
    double expected = 0.0;
    for (std::uint64_t mask = 0; mask < (1ull << m); ++mask) {
        double p = 1.0;
        for (std::size_t e = 0; e < m; ++e) p *= (mask >> e) & 1 ? prob[e] : 1.0 - prob[e];
        if (p == 0.0) continue;
        std::fill(reached.begin(), reached.end(), false);
        stack.clear();
        for (NodeId s : seeds) {
            if (s >= g.n_nodes)
                throw std::invalid_argument("exact_expected_spread: seed not in graph");
            if (!reached[s]) {
                reached[s] = true;
                stack.push_back(s);
            }
        }
        std::uint64_t count = stack.size();
        while (!stack.empty()) {
            NodeId u = stack.back();
            stack.pop_back();
            for (std::size_t e = 0; e < m; ++e) {
                if (edges[e].first == u && ((mask >> e) & 1) && !reached[edges[e].second]) {
                    reached[edges[e].second] = true;
                    stack.push_back(edges[e].second);
                    ++count;
                }
            }
        }
        expected += p * static_cast<double>(count);
    }
    return expected;
}

enum class Split : std::uint8_t { train = 0, val = 1, test = 2 };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        default: return "test";
    }
}

struct SplitFractions {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

/// Cascades plus their train/val/test assignment (parallel arrays).
struct Dataset {
    std::vector<Cascade> cascades;
    std::vector<Split> split;

    std::vector<std::size_t> indices_of(Split s) const {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < split.size(); ++i)
            if (split[i] == s) idx.push_back(i);
        return idx;
    }
};

struct DatasetConfig {
    std::uint64_t n_cascades = 1;
    std::uint32_t min_active = 3;
    SplitFractions fractions{};
    std::uint64_t rng_seed = 1;
    double seed_exponent = 2.5;
    std::uint32_t max_seed_size = 100;
    std::uint32_t t_observe = 2;
    std::uint32_t threads = 1;
};

/// Generates cascades (power-law seed sets + IC), filters out those whose
/// final active count is below min_active, and splits the survivors.
/// Cascade i always uses RNG stream(rng_seed, i + 1) and the split uses
/// stream(rng_seed, 0), so results are independent of thread count.
inline Dataset generate_dataset(const Graph& g, const DatasetConfig& cfg) {
    if (cfg.n_cascades < 1) throw std::invalid_argument("generate_dataset: n_cascades >= 1");
    if (cfg.min_active < 1) throw std::invalid_argument("generate_dataset: min_active >= 1");
    const double fsum = cfg.fractions.train + cfg.fractions.val + cfg.fractions.test;
    if (cfg.fractions.train < 0 || cfg.fractions.val < 0 || cfg.fractions.test < 0 ||
        std::fabs(fsum - 1.0) > 1e-9)
        throw std::invalid_argument("generate_dataset: split fractions must sum to 1");

    std::vector<Cascade> all(cfg.n_cascades);
    auto worker = [&](std::uint64_t begin, std::uint64_t end) {
        for (std::uint64_t i = begin; i < end; ++i) {
            Rng rng = Rng::stream(cfg.rng_seed, i + 1);
            auto seeds = sample_seed_set_with(g, cfg.seed_exponent, cfg.max_seed_size, rng);
            all[i] = simulate_ic_with(g, seeds, cfg.t_observe, rng);
            all[i].id = "c" + std::to_string(i);
        }
    };
    const std::uint32_t threads = std::max(1u, cfg.threads);
    if (threads == 1 || cfg.n_cascades < 2 * threads) {
        worker(0, cfg.n_cascades);
    } else {
        std::vector<std::thread> pool;
        const std::uint64_t chunk = (cfg.n_cascades + threads - 1) / threads;
        for (std::uint32_t t = 0; t < threads; ++t) {
            std::uint64_t b = t * chunk;
            std::uint64_t e = std::min<std::uint64_t>(b + chunk, cfg.n_cascades);
            if (b < e) pool.emplace_back(worker, b, e);
        }
        for (auto& th : pool) th.join();
    }

    Dataset ds;
    for (auto& c : all)
        if (c.final_size >= cfg.min_active) ds.cascades.push_back(std::move(c));
    if (ds.cascades.empty())
        throw std::runtime_error("generate_dataset: no cascade survived the min_active filter");

    const std::size_t n = ds.cascades.size();
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng split_rng = Rng::stream(cfg.rng_seed, 0);
    split_rng.shuffle(perm);
    std::size_t n_train = static_cast<std::size_t>(cfg.fractions.train * n + 0.5);
    std::size_t n_val = static_cast<std::size_t>(cfg.fractions.val * n + 0.5);
    n_train = std::min(n_train, n);
    n_val = std::min(n_val, n - n_train);
    ds.split.assign(n, Split::test);
    for (std::size_t i = 0; i < n_train; ++i) ds.split[perm[i]] = Split::train;
    for (std::size_t i = n_train; i < n_train + n_val; ++i) ds.split[perm[i]] = Split::val;
    return ds;
}

// ---------------------------------------------------------------------------
// Cascade file: one JSON object per line,
//   {"id": str, "activations": [[node_id, t], ...],
//    "observed": [node_id, ...], "final": [node_id, ...]}
// with node ids as external strings resolved through the graph id map.
// Split file: `cascade_id<TAB>{train|val|test}` per line.
// ---------------------------------------------------------------------------

inline void save_cascades(const std::vector<Cascade>& cascades, const Graph& g,
                          const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write cascade file: " + path);
    for (const auto& c : cascades) {
        nlohmann::ordered_json j;
        j["id"] = c.id;
        auto& acts = j["activations"] = nlohmann::ordered_json::array();
        for (const auto& [node, t] : c.activations)
            acts.push_back(nlohmann::ordered_json::array({g.node_ids[node], t}));
        auto& obs = j["observed"] = nlohmann::ordered_json::array();
        for (NodeId v : c.observed_active) obs.push_back(g.node_ids[v]);
        auto& fin = j["final"] = nlohmann::ordered_json::array();
        for (NodeId v : c.final_active) fin.push_back(g.node_ids[v]);
        out << j.dump() << '\n';
    }
}

inline std::vector<Cascade> load_cascades(const std::string& path, const Graph& g) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open cascade file: " + path);
    auto index = id_index(g);
    auto resolve = [&](const std::string& id) -> NodeId {
        auto it = index.find(id);
        if (it == index.end())
            throw std::runtime_error(path + ": node id not present in graph: " + id);
        return it->second;
    };
    std::vector<Cascade> cascades;
    std::string line;
    std::uint64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad JSON: " +
                                     e.what());
        }
        Cascade c;
        c.id = j.at("id").get<std::string>();
        for (const auto& a : j.at("activations"))
            c.activations.emplace_back(resolve(a.at(0).get<std::string>()),
                                       a.at(1).get<std::uint32_t>());
        for (const auto& v : j.at("observed"))
            c.observed_active.push_back(resolve(v.get<std::string>()));
        for (const auto& v : j.at("final")) c.final_active.push_back(resolve(v.get<std::string>()));
        std::sort(c.observed_active.begin(), c.observed_active.end());
        std::sort(c.final_active.begin(), c.final_active.end());
        std::sort(c.activations.begin(), c.activations.end(),
                  [](const auto& a, const auto& b) {
                      return a.second != b.second ? a.second < b.second : a.first < b.first;
                  });
        c.final_size = static_cast<std::uint32_t>(c.final_active.size());
        cascades.push_back(std::move(c));
    }
    return cascades;
}

inline void save_split(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write split file: " + path);
    for (std::size_t i = 0; i < ds.cascades.size(); ++i)
        out << ds.cascades[i].id << '\t' << split_name(ds.split[i]) << '\n';
}

/// Loads a split file and aligns it with `cascades` by id.
inline std::vector<Split> load_split(const std::string& path,
                                     const std::vector<Cascade>& cascades) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open split file: " + path);
    std::map<std::string, Split> by_id;
    std::string line;
    std::uint64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected `id<TAB>split`");
        std::string name = line.substr(tab + 1);
        Split s;
        if (name == "train") s = Split::train;
        else if (name == "val") s = Split::val;
        else if (name == "test") s = Split::test;
        else
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": split must be train|val|test, got `" + name + "`");
        by_id.emplace(line.substr(0, tab), s);
    }
    std::vector<Split> split(cascades.size());
    for (std::size_t i = 0; i < cascades.size(); ++i) {
        auto it = by_id.find(cascades[i].id);
        if (it == by_id.end())
            throw std::runtime_error(path + ": no split entry for cascade " + cascades[i].id);
        split[i] = it->second;
    }
    return split;
}

}  // namespace cgnn
