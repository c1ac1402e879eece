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
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cgnn/adam.hpp"
#include "cgnn/cascade.hpp"
#include "cgnn/gradients.hpp"
#include "cgnn/model.hpp"

namespace cgnn {

struct TrainConfig {
    double lr_self = 1e-3;   // self-activation parameters
    double lr_other = 5e-3;  // everything else
    double l2 = 1e-6;        // eta
    double lambda = 0.5;     // weight of the user-level cross entropy
    std::uint32_t layers = 2;
    std::uint32_t batch_size = 16;
    std::uint32_t max_epochs = 500;
    std::uint32_t patience = 10;
    std::uint64_t seed = 1;
    bool share_w = false;

    void validate() const {
        if (lr_self <= 0.0 || lr_other <= 0.0)
            throw std::invalid_argument("train config: learning rates must be positive");
        if (patience < 1) throw std::invalid_argument("train config: patience >= 1 required");
        if (batch_size < 1) throw std::invalid_argument("train config: batch_size >= 1 required");
        if (layers < 1) throw std::invalid_argument("train config: layers >= 1 required");
    }
};

/// Flat `key = value` config file; unknown keys are rejected so typos fail
/// loudly. Missing keys keep their defaults.
inline TrainConfig load_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    TrainConfig cfg;
    std::string line;
    std::uint64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        auto eq = line.find('=');
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t");
            auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        if (eq == std::string::npos) {
            if (!trim(line).empty())
                throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                         ": expected `key = value`");
            continue;
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "lr_self") cfg.lr_self = std::stod(value);
            else if (key == "lr_other") cfg.lr_other = std::stod(value);
            else if (key == "l2") cfg.l2 = std::stod(value);
            else if (key == "lambda") cfg.lambda = std::stod(value);
            else if (key == "layers") cfg.layers = static_cast<std::uint32_t>(std::stoul(value));
            else if (key == "batch_size")
                cfg.batch_size = static_cast<std::uint32_t>(std::stoul(value));
            else if (key == "max_epochs")
                cfg.max_epochs = static_cast<std::uint32_t>(std::stoul(value));
            else if (key == "patience")
                cfg.patience = static_cast<std::uint32_t>(std::stoul(value));
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "share_w") cfg.share_w = (value == "true" || value == "1");
            else
                throw std::runtime_error("unknown key `" + key + "`");
        } catch (const std::runtime_error&) {
            throw;
        } catch (const std::exception&) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad value for `" +
                                     key + "`");
        }
    }
    return cfg;
}

inline void save_train_config(const TrainConfig& cfg, std::ostream& out) {
    out << "lr_self = " << cfg.lr_self << "\n";
    out << "lr_other = " << cfg.lr_other << "\n";
    out << "l2 = " << cfg.l2 << "\n";
    out << "lambda = " << cfg.lambda << "\n";
    out << "layers = " << cfg.layers << "\n";
    out << "batch_size = " << cfg.batch_size << "\n";
    out << "max_epochs = " << cfg.max_epochs << "\n";
    out << "patience = " << cfg.patience << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "share_w = " << (cfg.share_w ? "true" : "false") << "\n";
}

struct EpochLog {
    std::uint32_t epoch = 0;
    double train_mrse = 0.0;
    double train_l_user = 0.0;
    double train_total = 0.0;
    double val_mrse = 0.0;
};

struct FitResult {
    ModelParams params;  // best-validation checkpoint
    std::vector<EpochLog> log;
    double best_val_mrse = 0.0;
    std::uint32_t best_epoch = 0;
    bool diverged = false;
};

/// Mean relative square error of forward predictions over `indices`.
inline double predict_mrse(const Graph& g, const ModelParams& params, const Mat& r0,
                           const Dataset& ds, const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw std::invalid_argument("predict_mrse: empty index set");
    auto cache = std::make_shared<const Layer0Cache>(make_layer0_cache(g, params, r0));
    double acc = 0.0;
    for (std::size_t i : indices) {
        const Cascade& c = ds.cascades[i];
        ForwardTrace t = forward(g, params, c, r0, cache);
        const double rel = (t.prediction - c.final_size) / static_cast<double>(c.final_size);
        acc += rel * rel;
    }
    return acc / static_cast<double>(indices.size());
}

/// Mini-batch Adam over the train split with early stopping on validation
/// MRSE. Keeps the best-validation checkpoint; a non-finite training loss
/// aborts with the last good checkpoint.
inline FitResult fit(const Graph& g, const Mat& r0, const Dataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    const auto train_idx = ds.indices_of(Split::train);
    const auto val_idx = ds.indices_of(Split::val);
    if (train_idx.empty() || val_idx.empty())
        throw std::invalid_argument("fit: dataset needs nonempty train and val splits");

    ModelParams params = init_params(static_cast<std::uint32_t>(r0.cols), cfg.layers, g.n_nodes,
                                     cfg.seed, cfg.share_w);
    OptimizerState opt = OptimizerState::zeros(params.size());
    AdamConfig adam;
    adam.lr_other = cfg.lr_other;
    adam.lr_self = cfg.lr_self;

    FitResult res;
    res.params = params;
    res.best_val_mrse = std::numeric_limits<double>::infinity();
    res.best_epoch = 0;
    if (cfg.max_epochs == 0) {
        res.best_val_mrse = predict_mrse(g, params, r0, ds, val_idx);
        return res;
    }

    Rng shuffle_rng = Rng::stream(cfg.seed, 0x5u);
    std::vector<std::size_t> order = train_idx;
    std::vector<ForwardTrace> traces;
    std::vector<BatchItem> batch;
    std::uint32_t since_best = 0;

    for (std::uint32_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double ep_mrse = 0.0, ep_user = 0.0, ep_total = 0.0;
        std::size_t n_seen = 0;
        bool bad = false;
        for (std::size_t pos = 0; pos < order.size() && !bad; pos += cfg.batch_size) {
            const std::size_t take = std::min<std::size_t>(cfg.batch_size, order.size() - pos);
            auto cache = std::make_shared<const Layer0Cache>(make_layer0_cache(g, params, r0));
            traces.clear();
            traces.reserve(take);
            batch.clear();
            for (std::size_t j = 0; j < take; ++j) {
                const Cascade& c = ds.cascades[order[pos + j]];
                traces.push_back(forward(g, params, c, r0, cache));
                batch.push_back({&traces.back(), &c});
            }
            LossBreakdown lb = loss(batch, params, cfg.l2, cfg.lambda);
            if (!std::isfinite(lb.total)) {
                bad = true;
                break;
            }
            ep_mrse += lb.mrse * take;
            ep_user += lb.l_user * take;
            ep_total += lb.total * take;
            n_seen += take;
            auto grads = gradients(g, params, r0, batch, cfg.l2, cfg.lambda);
            adam_step(params, grads, opt, adam);
        }
        if (bad) {
            res.diverged = true;
            break;
        }
        EpochLog entry;
        entry.epoch = epoch;
        entry.train_mrse = ep_mrse / n_seen;
        entry.train_l_user = ep_user / n_seen;
        entry.train_total = ep_total / n_seen;
        entry.val_mrse = predict_mrse(g, params, r0, ds, val_idx);
        res.log.push_back(entry);
        if (entry.val_mrse < res.best_val_mrse) {
            res.best_val_mrse = entry.val_mrse;
            res.best_epoch = epoch;
            res.params = params;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    if (res.best_epoch == 0) res.best_val_mrse = predict_mrse(g, res.params, r0, ds, val_idx);
    return res;
}

inline void save_train_log(const std::vector<EpochLog>& log, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write training log: " + path);
    for (const EpochLog& e : log) {
        nlohmann::ordered_json j;
        j["epoch"] = e.epoch;
        j["train_mrse"] = e.train_mrse;
        j["l_user"] = e.train_l_user;
        j["train_total"] = e.train_total;
        j["val_mrse"] = e.val_mrse;
        out << j.dump() << '\n';
    }
}

struct GridSpec {
    std::vector<double> lr_self{1e-3};
    std::vector<double> lr_other{5e-3};
    std::vector<double> l2{1e-6};
    std::vector<std::uint32_t> layers{2};
};

struct GridRow {
    TrainConfig config;
    double val_mrse = 0.0;
    std::uint32_t best_epoch = 0;
};

struct GridResult {
    TrainConfig best;
    double best_val_mrse = 0.0;
    std::vector<GridRow> table;
};

/// Exhaustive product over the grids, each point trained with fit(). The
/// winner is the smallest validation MRSE; ties break toward smaller layer
/// count, then smaller lr_other.
inline GridResult grid_search(const Graph& g, const Mat& r0, const Dataset& ds,
                              const GridSpec& grids, const TrainConfig& base) {
    if (grids.lr_self.empty() || grids.lr_other.empty() || grids.l2.empty() ||
        grids.layers.empty())
        throw std::invalid_argument("grid_search: grids must be nonempty");
    GridResult out;
    bool have_best = false;
    for (std::uint32_t layers : grids.layers) {
        for (double l2 : grids.l2) {
            for (double lr_other : grids.lr_other) {
                for (double lr_self : grids.lr_self) {
                    TrainConfig cfg = base;
                    cfg.layers = layers;
                    cfg.l2 = l2;
                    cfg.lr_other = lr_other;
                    cfg.lr_self = lr_self;
                    FitResult fr = fit(g, r0, ds, cfg);
                    out.table.push_back({cfg, fr.best_val_mrse, fr.best_epoch});
                    const GridRow& row = out.table.back();
                    bool better = !have_best || row.val_mrse < out.best_val_mrse;
                    if (!better && row.val_mrse == out.best_val_mrse) {
                        better = row.config.layers < out.best.layers ||
                                 (row.config.layers == out.best.layers &&
                                  row.config.lr_other < out.best.lr_other);
                    }
                    if (better) {
                        out.best = cfg;
                        out.best_val_mrse = row.val_mrse;
                        have_best = true;
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace cgnn
