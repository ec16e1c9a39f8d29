#pragma once

// Independent reference computations shared by the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "hgmp/hetgraph.hpp"

namespace hgmp::testing {

/// round(r * ratio * total) clamped to [0, type_count], via std::round.
inline std::size_t count_oracle(double r, double ratio, std::size_t total, std::size_t type_count) {
    const double v = std::round(r * ratio * static_cast<double>(total));
    return static_cast<std::size_t>(std::min(std::max(v, 0.0), static_cast<double>(type_count)));
}

/// Textbook contrastive loss: no max-shift, explicit cosine, explicit double loop.
inline double brute_force_contrastive(const std::vector<RowVector>& z, double t) {
    const std::size_t m = z.size();
    auto cosine = [&](std::size_t a, std::size_t b) { return z[a].dot(z[b]) / (z[a].norm() * z[b].norm()); };
    double total = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
        const std::size_t pos = a % 2 == 0 ? a + 1 : a - 1;
        double denom = 0.0;
        for (std::size_t b = 0; b < m; ++b)
            if (b != a) denom += std::exp(cosine(a, b) / t);
        total += -std::log(std::exp(cosine(a, pos) / t) / denom);
    }
    return total / static_cast<double>(m);
}

inline double accuracy(const std::vector<int>& preds, const std::vector<int>& golds) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) hit += preds[i] == golds[i];
    return static_cast<double>(hit) / static_cast<double>(preds.size());
}

inline std::multiset<std::size_t> dst_multiset(const std::vector<Edge>& edges) {
    std::multiset<std::size_t> out;
    for (const auto& e : edges) out.insert(e.dst);
    return out;
}

}  // namespace hgmp::testing
