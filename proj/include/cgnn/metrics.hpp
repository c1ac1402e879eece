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
#include <iomanip>
#include <ostream>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace cgnn {

/// Popularity-prediction error metrics over one evaluation split.
struct MetricsReport {
    double mrse = 0.0;         // mean relative square error
    double mrse_median = 0.0;  // median of the per-item RSE distribution
    double mape = 0.0;         // mean absolute percentage error
    double wro_perc = 0.0;     // fraction with relative error >= epsilon
    std::uint64_t n_items = 0;
    double epsilon = 0.5;
};

/// pairs are (predicted, true) final popularities; every true value must be
/// >= 1. The wrong-percentage boundary case |err| / n == epsilon counts as
/// wrong; an even item count takes the mean of the two middle RSE values.
inline MetricsReport compute_metrics(std::span<const std::pair<double, double>> pairs,
                                     double epsilon = 0.5) {
    if (pairs.empty()) throw std::invalid_argument("compute_metrics: no prediction pairs");
    MetricsReport rep;
    rep.epsilon = epsilon;
    rep.n_items = pairs.size();
    std::vector<double> rse;
    rse.reserve(pairs.size());
    for (const auto& [pred, truth] : pairs) {
        if (!(truth >= 1.0))
            throw std::invalid_argument("compute_metrics: true popularity must be >= 1");
        const double rel = (pred - truth) / truth;
        rse.push_back(rel * rel);
        rep.mrse += rel * rel;
        rep.mape += std::fabs(rel);
        if (std::fabs(rel) >= epsilon) rep.wro_perc += 1.0;
    }
    const double m = static_cast<double>(pairs.size());
    rep.mrse /= m;
    rep.mape /= m;
    rep.wro_perc /= m;
    std::sort(rse.begin(), rse.end());
    const std::size_t mid = rse.size() / 2;
    rep.mrse_median = rse.size() % 2 == 1 ? rse[mid] : 0.5 * (rse[mid - 1] + rse[mid]);
    return rep;
}

inline nlohmann::ordered_json metrics_to_json(const MetricsReport& rep) {
    nlohmann::ordered_json j;
    j["mrse"] = rep.mrse;
    j["mrse_median"] = rep.mrse_median;
    j["mape"] = rep.mape;
    j["wro_perc"] = rep.wro_perc;
    j["n_items"] = rep.n_items;
    j["epsilon"] = rep.epsilon;
    return j;
}

inline void print_metrics_table(const MetricsReport& rep, std::ostream& out) {
    out << std::left << std::setw(12) << "metric" << std::right << std::setw(12) << "value"
        << "\n";
    auto row = [&](const char* name, double v) {
        out << std::left << std::setw(12) << name << std::right << std::setw(12) << std::fixed
            << std::setprecision(6) << v << "\n";
    };
    row("MRSE", rep.mrse);
    row("mRSE", rep.mrse_median);
    row("MAPE", rep.mape);
    row("WroPerc", rep.wro_perc);
    out << std::left << std::setw(12) << "items" << std::right << std::setw(12) << rep.n_items
        << "\n";
    out.unsetf(std::ios::fixed);
}

}  // namespace cgnn
