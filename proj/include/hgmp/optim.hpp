#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "hgmp/hetgraph.hpp"

namespace hgmp {

enum class OptimizerKind { sgd, adam };

inline const char* to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

inline OptimizerKind parse_optimizer(std::string_view s) {
    if (s == "sgd" || s == "gd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer '" + std::string(s) + "' (expected sgd or adam)");
}

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::sgd;
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Plain gradient descent or Adam over a fixed list of arrays.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

    void step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads) {
        if (params.size() != grads.size()) throw DomainError("optimizer: parameter/gradient count mismatch");
        if (cfg_.kind == OptimizerKind::sgd) {
            for (std::size_t i = 0; i < params.size(); ++i) *params[i] -= cfg_.lr * *grads[i];
            return;
        }
        if (m_.empty()) {
            for (const auto* g : grads) {
                m_.push_back(Matrix::Zero(g->rows(), g->cols()));
                v_.push_back(Matrix::Zero(g->rows(), g->cols()));
            }
        }
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * *grads[i];
            v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i]->cwiseProduct(*grads[i]);
            *params[i] -= (cfg_.lr * (m_[i] / c1).array() / ((v_[i] / c2).array().sqrt() + cfg_.eps)).matrix();
        }
    }

private:
    OptimizerConfig cfg_;
    std::vector<Matrix> m_, v_;
    long long t_ = 0;
};

}  // namespace hgmp
