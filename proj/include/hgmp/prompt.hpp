#pragma once

// Per-node-type feature prompts tuned against a frozen encoder.
//
// Every node of type t has its raw features rescaled elementwise by the
// shared vector p_t before encoding. A single affine head maps z_G to class
// scores; prompts and head are trained jointly with cross-entropy on the
// support set while the encoder stays untouched.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hgmp/encoder.hpp"
#include "hgmp/optim.hpp"
#include "hgmp/taskbuilder.hpp"

namespace hgmp {

/// multiply: x * p (the method). add: x + p, kept for comparison runs.
enum class PromptMode { multiply, add };
enum class PromptInit { ones, random };

inline const char* to_string(PromptMode m) { return m == PromptMode::multiply ? "multiply" : "add"; }

inline PromptMode parse_prompt_mode(std::string_view s) {
    if (s == "multiply") return PromptMode::multiply;
    if (s == "add") return PromptMode::add;
    throw ConfigError("unknown prompt mode '" + std::string(s) + "'");
}

inline PromptInit parse_prompt_init(std::string_view s) {
    if (s == "ones") return PromptInit::ones;
    if (s == "random") return PromptInit::random;
    throw ConfigError("unknown prompt init '" + std::string(s) + "'");
}

struct PromptBank {
    std::vector<std::string> type_names;
    std::vector<Matrix> vectors;  ///< 1 x d_t each
    PromptMode mode = PromptMode::multiply;
};

struct TaskHead {
    Matrix weight;  ///< h x C
    Matrix bias;    ///< 1 x C
};

/// ones: the identity for the chosen mode (1 for multiply, 0 for add).
/// random: identity plus U(-0.05, 0.05) noise.
inline PromptBank init_prompts(const Schema& schema, PromptInit init, std::uint64_t seed,
                               PromptMode mode = PromptMode::multiply) {
    PromptBank bank;
    bank.mode = mode;
    const double identity = mode == PromptMode::multiply ? 1.0 : 0.0;
    Rng rng = make_rng(seed);
    std::uniform_real_distribution<double> noise(-0.05, 0.05);
    for (const auto& t : schema.node_types) {
        bank.type_names.push_back(t.name);
        Matrix v = Matrix::Constant(1, static_cast<Eigen::Index>(t.dim), identity);
        if (init == PromptInit::random)
            for (Eigen::Index j = 0; j < v.cols(); ++j) v(0, j) += noise(rng);
        bank.vectors.push_back(std::move(v));
    }
    return bank;
}

inline TaskHead init_head(std::size_t hidden, std::size_t num_classes, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    return {detail::glorot(static_cast<Eigen::Index>(hidden), static_cast<Eigen::Index>(num_classes), rng),
            Matrix::Zero(1, static_cast<Eigen::Index>(num_classes))};
}

inline void check_bank(const PromptBank& bank, std::span<const Matrix> features) {
    if (bank.vectors.size() != features.size())
        throw DomainError("prompt bank has " + std::to_string(bank.vectors.size()) + " vectors for " +
                          std::to_string(features.size()) + " node types");
    for (std::size_t t = 0; t < features.size(); ++t)
        if (bank.vectors[t].cols() != features[t].cols())
            throw DomainError("prompt dimension mismatch for node type '" + bank.type_names[t] + "': " +
                              std::to_string(bank.vectors[t].cols()) + " vs " + std::to_string(features[t].cols()));
}

inline std::vector<Matrix> prompted_features(std::span<const Matrix> features, const PromptBank& bank) {
    check_bank(bank, features);
    std::vector<Matrix> out;
    out.reserve(features.size());
    for (std::size_t t = 0; t < features.size(); ++t) {
        if (bank.mode == PromptMode::multiply)
            out.push_back(features[t].array().rowwise() * bank.vectors[t].row(0).array());
        else
            out.push_back(features[t].rowwise() + bank.vectors[t].row(0));
    }
    return out;
}

/// Copy of `g` with every feature row combined with its type's prompt.
inline HetGraph apply_prompts(const HetGraph& g, const PromptBank& bank) {
    HetGraph out = g;
    out.features = prompted_features(g.features, bank);
    return out;
}

struct Prediction {
    int label = 0;
    RowVector scores;
};

inline RowVector head_scores(const RowVector& z, const TaskHead& head) { return z * head.weight + head.bias; }

/// Argmax of the scores; ties go to the lowest class id.
inline int argmax_lowest(const RowVector& scores) {
    int best = 0;
    for (Eigen::Index c = 1; c < scores.size(); ++c)
        if (scores(c) > scores(best)) best = static_cast<int>(c);
    return best;
}

inline Prediction predict(const HetGraph& g, const EncoderParams& encoder, const PromptBank& bank,
                          const TaskHead& head) {
    if (head.weight.rows() != static_cast<Eigen::Index>(encoder.config.hidden))
        throw DomainError("task head input size does not match encoder hidden size");
    const auto features = prompted_features(g.features, bank);
    const auto tr = encoder_forward(share_structure(g), features, encoder);
    Prediction p;
    p.scores = head_scores(tr.z, head);
    p.label = argmax_lowest(p.scores);
    return p;
}

inline Prediction predict(const InducedSubgraph& sub, const EncoderParams& encoder, const PromptBank& bank,
                          const TaskHead& head) {
    return predict(sub.graph, encoder, bank, head);
}

struct TuneConfig {
    std::size_t steps = 200;
    OptimizerConfig optimizer{OptimizerKind::adam, 0.01};
    bool train_prompts = true;  ///< false keeps the bank fixed (head-only tuning)
    std::size_t batch_size = 0;  ///< 0 = full support set per step
    std::uint64_t seed = 0;      ///< orders mini-batches
};

struct TuneResult {
    PromptBank bank;
    TaskHead head;
    std::vector<double> trace;  ///< loss before each step
};

/// Mean cross-entropy over `items` with gradients for bank and head.
struct SupportGradients {
    double loss = 0.0;
    std::vector<Matrix> prompts;
    Matrix head_weight;
    Matrix head_bias;
};

inline SupportGradients support_loss_and_grad(std::span<const HetGraph* const> graphs, std::span<const int> labels,
                                              std::span<const StructurePtr> structures,
                                              const EncoderParams& encoder, const PromptBank& bank,
                                              const TaskHead& head) {
    SupportGradients g;
    g.head_weight = Matrix::Zero(head.weight.rows(), head.weight.cols());
    g.head_bias = Matrix::Zero(1, head.weight.cols());
    for (const auto& v : bank.vectors) g.prompts.push_back(Matrix::Zero(1, v.cols()));
    const double inv = 1.0 / static_cast<double>(graphs.size());
    for (std::size_t i = 0; i < graphs.size(); ++i) {
        const auto& raw = graphs[i]->features;
        const auto features = prompted_features(raw, bank);
        const auto tr = encoder_forward(structures[i], features, encoder);
        const RowVector scores = head_scores(tr.z, head);
        const double mx = scores.maxCoeff();
        const RowVector e = (scores.array() - mx).exp().matrix();
        const double sum = e.sum();
        const auto y = static_cast<Eigen::Index>(labels[i]);
        g.loss += inv * (std::log(sum) + mx - scores(y));
        RowVector dscores = e / sum;
        dscores(y) -= 1.0;
        dscores *= inv;
        g.head_weight.noalias() += tr.z.transpose() * dscores;
        g.head_bias += dscores;
        const RowVector dz = dscores * head.weight.transpose();
        std::vector<Matrix> dinputs;
        encoder_backward(tr, encoder, dz, nullptr, &dinputs);
        for (std::size_t t = 0; t < raw.size(); ++t) {
            if (raw[t].rows() == 0) continue;
            if (bank.mode == PromptMode::multiply)
                g.prompts[t] += dinputs[t].cwiseProduct(raw[t]).colwise().sum();
            else
                g.prompts[t] += dinputs[t].colwise().sum();
        }
    }
    return g;
}

inline TuneResult tune(const FewShotTask& task, const EncoderParams& encoder, PromptBank bank, TaskHead head,
                       const TuneConfig& cfg) {
    if (!encoder.frozen) throw DomainError("tune: refusing to tune against an unfrozen encoder");
    if (task.support.empty()) throw DomainError("tune: empty support set");
    const auto n_classes = head.weight.cols();
    std::vector<const HetGraph*> graphs;
    std::vector<int> labels;
    std::vector<StructurePtr> structures;
    for (const auto& s : task.support) {
        if (!s.label || *s.label < 0 || *s.label >= n_classes)
            throw DomainError("tune: support item without a valid label");
        graphs.push_back(&s.graph);
        labels.push_back(*s.label);
        structures.push_back(share_structure(s.graph));
    }

    Optimizer opt(cfg.optimizer);
    std::vector<Matrix*> params{&head.weight, &head.bias};
    if (cfg.train_prompts)
        for (auto& v : bank.vectors) params.push_back(&v);

    TuneResult out;
    Rng rng = make_rng(cfg.seed);
    std::vector<std::size_t> order(graphs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t cursor = order.size();
    const std::size_t batch = cfg.batch_size == 0 ? graphs.size() : std::min(cfg.batch_size, graphs.size());
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        std::vector<const HetGraph*> bg;
        std::vector<int> bl;
        std::vector<StructurePtr> bs;
        if (batch == graphs.size()) {
            auto grads = support_loss_and_grad(graphs, labels, structures, encoder, bank, head);
            out.trace.push_back(grads.loss);
            std::vector<const Matrix*> gp{&grads.head_weight, &grads.head_bias};
            if (cfg.train_prompts)
                for (const auto& p : grads.prompts) gp.push_back(&p);
            opt.step(params, gp);
            continue;
        }
        for (std::size_t k = 0; k < batch; ++k) {
            if (cursor == order.size()) {
                shuffle_in_place(order, rng);
                cursor = 0;
            }
            const std::size_t i = order[cursor++];
            bg.push_back(graphs[i]);
            bl.push_back(labels[i]);
            bs.push_back(structures[i]);
        }
        auto grads = support_loss_and_grad(bg, bl, bs, encoder, bank, head);
        out.trace.push_back(grads.loss);
        std::vector<const Matrix*> gp{&grads.head_weight, &grads.head_bias};
        if (cfg.train_prompts)
            for (const auto& p : grads.prompts) gp.push_back(&p);
        opt.step(params, gp);
    }
    out.bank = std::move(bank);
    out.head = std::move(head);
    return out;
}

/// Same container family as encoder checkpoints.
inline nlohmann::json prompt_to_json(const PromptBank& bank, const TaskHead& head, const std::string& fingerprint) {
    nlohmann::json j;
    j["format"] = "hgmp-prompt/1";
    j["schema_fingerprint"] = fingerprint;
    j["mode"] = to_string(bank.mode);
    j["params"] = nlohmann::json::array();
    for (std::size_t t = 0; t < bank.vectors.size(); ++t)
        j["params"].push_back(detail::matrix_json("prompt." + bank.type_names[t], bank.vectors[t]));
    j["params"].push_back(detail::matrix_json("task_head.weight", head.weight));
    j["params"].push_back(detail::matrix_json("task_head.bias", head.bias));
    return j;
}

inline void save_prompt(const PromptBank& bank, const TaskHead& head, const std::string& fingerprint,
                        const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    detail::write_text(path, prompt_to_json(bank, head, fingerprint).dump(1) + "\n");
}

inline std::pair<PromptBank, TaskHead> load_prompt(const fs::path& path, const Schema& expected) {
    const auto j = detail::read_json(path);
    const std::string where = path.string();
    try {
        if (j.at("format") != "hgmp-prompt/1") throw IoError(where + ": not a prompt checkpoint");
        if (j.at("schema_fingerprint") != schema_fingerprint(expected))
            throw ConfigError(where + ": schema fingerprint does not match dataset schema");
        std::map<std::string, const nlohmann::json*> by_name;
        for (const auto& e : j.at("params")) by_name[e.at("name").get<std::string>()] = &e;
        auto shape_of = [&](const std::string& name) {
            const auto it = by_name.find(name);
            if (it == by_name.end()) throw IoError(where + ": missing '" + name + "'");
            const auto s = it->second->at("shape").get<std::vector<Eigen::Index>>();
            Matrix m(s.at(0), s.at(1));
            detail::fill_matrix(*it->second, m, where);
            return m;
        };
        PromptBank bank;
        bank.mode = parse_prompt_mode(j.at("mode").get<std::string>());
        for (const auto& t : expected.node_types) {
            bank.type_names.push_back(t.name);
            bank.vectors.push_back(shape_of("prompt." + t.name));
        }
        TaskHead head{shape_of("task_head.weight"), shape_of("task_head.bias")};
        return {std::move(bank), std::move(head)};
    } catch (const nlohmann::json::exception& e) {
        throw IoError(where + ": malformed prompt checkpoint: " + e.what());
    }
}

}  // namespace hgmp
