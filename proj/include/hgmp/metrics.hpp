#pragma once

// Micro/macro F1 for single-label multi-class predictions.
//
// Macro-F1 averages over all classes 0..C-1. A class with no gold items and
// no predictions scores F1 = 0 and still counts in the mean.

#include <span>
#include <vector>

#include "hgmp/error.hpp"

namespace hgmp {

struct Confusion {
    std::vector<std::size_t> tp, fp, fn;
    std::size_t total = 0;
};

inline Confusion confusion(std::span<const int> preds, std::span<const int> golds, std::size_t num_classes) {
    if (preds.empty() || preds.size() != golds.size())
        throw DomainError("metrics need equal-length, nonempty label sequences");
    Confusion c{std::vector<std::size_t>(num_classes, 0), std::vector<std::size_t>(num_classes, 0),
                std::vector<std::size_t>(num_classes, 0), preds.size()};
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const int p = preds[i], g = golds[i];
        if (p < 0 || g < 0 || static_cast<std::size_t>(p) >= num_classes || static_cast<std::size_t>(g) >= num_classes)
            throw DomainError("label out of range at position " + std::to_string(i));
        if (p == g) {
            ++c.tp[static_cast<std::size_t>(p)];
        } else {
            ++c.fp[static_cast<std::size_t>(p)];
            ++c.fn[static_cast<std::size_t>(g)];
        }
    }
    return c;
}

inline double micro_f1(std::span<const int> preds, std::span<const int> golds, std::size_t num_classes) {
    const auto c = confusion(preds, golds, num_classes);
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t k = 0; k < num_classes; ++k) {
        tp += static_cast<double>(c.tp[k]);
        fp += static_cast<double>(c.fp[k]);
        fn += static_cast<double>(c.fn[k]);
    }
    return 2.0 * tp / (2.0 * tp + fp + fn);
}

inline double macro_f1(std::span<const int> preds, std::span<const int> golds, std::size_t num_classes) {
    const auto c = confusion(preds, golds, num_classes);
    double sum = 0.0;
    for (std::size_t k = 0; k < num_classes; ++k) {
        const double denom = 2.0 * static_cast<double>(c.tp[k]) + static_cast<double>(c.fp[k] + c.fn[k]);
        sum += denom > 0.0 ? 2.0 * static_cast<double>(c.tp[k]) / denom : 0.0;
    }
    return sum / static_cast<double>(num_classes);
}

}  // namespace hgmp
