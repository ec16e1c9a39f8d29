#pragma once

// End-to-end few-shot runs: build tasks, pre-train, tune prompts per seed,
// score the query set. Also the four-way ablation and shot sweeps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hgmp/augment.hpp"
#include "hgmp/encoder.hpp"
#include "hgmp/metrics.hpp"
#include "hgmp/pretrain.hpp"
#include "hgmp/prompt.hpp"
#include "hgmp/taskbuilder.hpp"

namespace hgmp {

struct PipelineConfig {
    int tau = 2;
    TwoTargetRule edge_rule = TwoTargetRule::skip;
    std::size_t shots = 10;
    double query_fraction = 1.0;
    std::uint64_t seed = 0;  ///< encoder init, corpus sampling and pre-training
    EncoderConfig encoder{};
    PretrainConfig pretrain{};
    std::size_t pretrain_corpus = 0;  ///< max corpus size; 0 = every target node
    TuneConfig tune{};
    PromptMode prompt_mode = PromptMode::multiply;
    PromptInit prompt_init = PromptInit::ones;
    bool het_augmentation = true;
    bool het_prompt = true;
};

struct SeedResult {
    std::uint64_t seed = 0;
    double micro = 0.0;
    double macro = 0.0;
    double final_support_loss = 0.0;
};

struct RunResult {
    TaskKind kind = TaskKind::node;
    std::string variant = "HGMP";
    std::size_t shots = 0;
    std::vector<SeedResult> per_seed;
    double micro_mean = 0.0, micro_std = 0.0;
    double macro_mean = 0.0, macro_std = 0.0;
    std::string config_fingerprint;
};

struct AblationVariant {
    const char* name;
    bool het_augmentation;
    bool het_prompt;
};

inline constexpr AblationVariant kAblationVariants[] = {
    {"VARIANT 1", false, false},
    {"VARIANT 2", false, true},
    {"VARIANT 3", true, false},
    {"HGMP", true, true},
};

// ---------------------------------------------------------------------------
// config (de)serialization

inline nlohmann::json to_json(const PipelineConfig& c) {
    nlohmann::json j;
    j["tau"] = c.tau;
    j["edge_rule"] = c.edge_rule == TwoTargetRule::skip ? "skip" : "first_endpoint";
    j["shots"] = c.shots;
    j["query_fraction"] = c.query_fraction;
    j["seed"] = c.seed;
    j["backbone"] = to_string(c.encoder.backbone);
    j["hidden"] = c.encoder.hidden;
    j["latent"] = c.encoder.latent;
    j["layers"] = c.encoder.layers;
    j["activation"] = to_string(c.encoder.activation);
    j["ratio"] = c.pretrain.augment.ratio;
    nlohmann::json v1 = nlohmann::json::array(), v2 = nlohmann::json::array();
    for (auto s : c.pretrain.augment.view1) v1.push_back(to_string(s));
    for (auto s : c.pretrain.augment.view2) v2.push_back(to_string(s));
    j["view1"] = v1;
    j["view2"] = v2;
    j["temperature"] = c.pretrain.temperature;
    j["batch_size"] = c.pretrain.batch_size;
    j["epochs"] = c.pretrain.epochs;
    j["pretrain_optimizer"] = to_string(c.pretrain.optimizer.kind);
    j["pretrain_lr"] = c.pretrain.optimizer.lr;
    j["pretrain_corpus"] = c.pretrain_corpus;
    j["steps"] = c.tune.steps;
    j["tune_optimizer"] = to_string(c.tune.optimizer.kind);
    j["lr"] = c.tune.optimizer.lr;
    j["tune_batch_size"] = c.tune.batch_size;
    j["prompt_mode"] = to_string(c.prompt_mode);
    j["prompt_init"] = c.prompt_init == PromptInit::ones ? "ones" : "random";
    j["het_augmentation"] = c.het_augmentation;
    j["het_prompt"] = c.het_prompt;
    return j;
}

/// Reads the keys above; absent keys keep their defaults.
inline PipelineConfig pipeline_from_json(const nlohmann::json& j, PipelineConfig c = {}) {
    try {
        c.tau = j.value("tau", c.tau);
        if (j.contains("edge_rule")) {
            const auto r = j["edge_rule"].get<std::string>();
            if (r == "skip")
                c.edge_rule = TwoTargetRule::skip;
            else if (r == "first_endpoint")
                c.edge_rule = TwoTargetRule::first_endpoint;
            else
                throw ConfigError("unknown edge_rule '" + r + "'");
        }
        c.shots = j.value("shots", c.shots);
        c.query_fraction = j.value("query_fraction", c.query_fraction);
        c.seed = j.value("seed", c.seed);
        if (j.contains("backbone")) c.encoder.backbone = parse_backbone(j["backbone"].get<std::string>());
        c.encoder.hidden = j.value("hidden", c.encoder.hidden);
        c.encoder.latent = j.value("latent", c.encoder.latent);
        c.encoder.layers = j.value("layers", c.encoder.layers);
        if (j.contains("activation")) c.encoder.activation = parse_activation(j["activation"].get<std::string>());
        c.pretrain.augment.ratio = j.value("ratio", c.pretrain.augment.ratio);
        auto strategies = [](const nlohmann::json& a) {
            std::vector<AugmentStrategy> out;
            for (const auto& s : a) out.push_back(parse_strategy(s.get<std::string>()));
            return out;
        };
        if (j.contains("view1")) c.pretrain.augment.view1 = strategies(j["view1"]);
        if (j.contains("view2")) c.pretrain.augment.view2 = strategies(j["view2"]);
        c.pretrain.temperature = j.value("temperature", c.pretrain.temperature);
        c.pretrain.batch_size = j.value("batch_size", c.pretrain.batch_size);
        c.pretrain.epochs = j.value("epochs", c.pretrain.epochs);
        if (j.contains("pretrain_optimizer"))
            c.pretrain.optimizer.kind = parse_optimizer(j["pretrain_optimizer"].get<std::string>());
        c.pretrain.optimizer.lr = j.value("pretrain_lr", c.pretrain.optimizer.lr);
        c.pretrain_corpus = j.value("pretrain_corpus", c.pretrain_corpus);
        c.tune.steps = j.value("steps", c.tune.steps);
        if (j.contains("tune_optimizer")) c.tune.optimizer.kind = parse_optimizer(j["tune_optimizer"].get<std::string>());
        c.tune.optimizer.lr = j.value("lr", c.tune.optimizer.lr);
        c.tune.batch_size = j.value("tune_batch_size", c.tune.batch_size);
        if (j.contains("prompt_mode")) c.prompt_mode = parse_prompt_mode(j["prompt_mode"].get<std::string>());
        if (j.contains("prompt_init")) c.prompt_init = parse_prompt_init(j["prompt_init"].get<std::string>());
        c.het_augmentation = j.value("het_augmentation", c.het_augmentation);
        c.het_prompt = j.value("het_prompt", c.het_prompt);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed pipeline config: ") + e.what());
    }
    if (c.tau < 1) throw ConfigError("tau must be >= 1");
    if (c.shots < 1) throw ConfigError("shots must be >= 1");
    if (!(c.pretrain.augment.ratio >= 0.0 && c.pretrain.augment.ratio <= 1.0)) throw ConfigError("ratio must lie in [0,1]");
    if (!(c.pretrain.temperature > 0.0)) throw ConfigError("temperature must be positive");
    return c;
}

inline std::string config_fingerprint(const PipelineConfig& c) { return fnv1a_hex(to_json(c).dump()); }

// ---------------------------------------------------------------------------
// pipeline stages

/// Graph-level tasks reuse the node-task subgraphs as their corpus.
inline std::vector<InducedSubgraph> build_tasks(const HetGraph& g, TaskKind kind, const PipelineConfig& cfg) {
    switch (kind) {
        case TaskKind::node:
        case TaskKind::graph: return build_node_tasks(g, cfg.tau);
        case TaskKind::edge: return build_edge_tasks(g, cfg.tau, cfg.edge_rule);
    }
    throw DomainError("unknown task kind");
}

/// Ego subgraphs around every target node (labelled or not); labels are not used.
inline std::vector<InducedSubgraph> pretrain_corpus(const HetGraph& g, const PipelineConfig& cfg) {
    const std::size_t target = g.schema.target;
    const std::size_t n = g.node_count(target);
    std::vector<std::size_t> picks(n);
    std::iota(picks.begin(), picks.end(), std::size_t{0});
    if (cfg.pretrain_corpus > 0 && cfg.pretrain_corpus < n) {
        Rng rng = make_rng(derive_seed(cfg.seed, {0xc0ULL}));
        picks = sample_without_replacement(n, cfg.pretrain_corpus, rng);
    }
    const NeighborIndex index(g);
    std::vector<InducedSubgraph> out;
    out.reserve(picks.size());
    for (auto i : picks) out.push_back(node_induced_subgraph(g, index, {target, i}, cfg.tau));
    return out;
}

inline PretrainResult pretrain_encoder(std::span<const InducedSubgraph> corpus, const Schema& schema,
                                       const PipelineConfig& cfg, AugmentScope scope) {
    PretrainConfig pc = cfg.pretrain;
    pc.seed = derive_seed(cfg.seed, {0xa1ULL});
    pc.augment.scope = scope;
    return pretrain(corpus, init_encoder(schema, cfg.encoder, derive_seed(cfg.seed, {0xe0ULL})), pc);
}

inline void summarize(RunResult& r) {
    const auto n = static_cast<double>(r.per_seed.size());
    if (r.per_seed.empty()) return;
    auto stats = [&](auto get, double& mean, double& sd) {
        mean = 0.0;
        for (const auto& s : r.per_seed) mean += get(s);
        mean /= n;
        double ss = 0.0;
        for (const auto& s : r.per_seed) ss += (get(s) - mean) * (get(s) - mean);
        sd = r.per_seed.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    };
    stats([](const SeedResult& s) { return s.micro; }, r.micro_mean, r.micro_std);
    stats([](const SeedResult& s) { return s.macro; }, r.macro_mean, r.macro_std);
}

using TunedCallback = std::function<void(std::uint64_t seed, const TuneResult&)>;

/// Per seed: sample a k-shot split, tune prompts + head against the frozen
/// encoder, score the query set.
inline RunResult evaluate(std::span<const InducedSubgraph> tasks, const Schema& schema, TaskKind kind,
                          const PipelineConfig& cfg, const EncoderParams& encoder,
                          std::span<const std::uint64_t> seeds, std::string variant = "HGMP",
                          const TunedCallback& on_tuned = {}) {
    if (!encoder.frozen) throw DomainError("evaluate: encoder must be frozen");
    RunResult r;
    r.kind = kind;
    r.variant = std::move(variant);
    r.shots = cfg.shots;
    r.config_fingerprint = config_fingerprint(cfg);
    const std::size_t C = schema.num_classes;
    for (auto seed : seeds) {
        const FewShotTask task = sample_k_shot(tasks, cfg.shots, cfg.query_fraction, seed, kind);
        if (task.query.empty()) throw DomainError("evaluate: empty query set");
        PromptBank bank = cfg.het_prompt ? init_prompts(schema, cfg.prompt_init, derive_seed(seed, {1}), cfg.prompt_mode)
                                         : init_prompts(schema, PromptInit::ones, 0, PromptMode::multiply);
        TaskHead head = init_head(cfg.encoder.hidden, C, derive_seed(seed, {2}));
        TuneConfig tc = cfg.tune;
        tc.seed = derive_seed(seed, {3});
        tc.train_prompts = cfg.het_prompt;
        const TuneResult tuned = tune(task, encoder, std::move(bank), std::move(head), tc);
        if (on_tuned) on_tuned(seed, tuned);
        std::vector<int> preds, golds;
        for (const auto& q : task.query) {
            preds.push_back(predict(q, encoder, tuned.bank, tuned.head).label);
            golds.push_back(*q.label);
        }
        r.per_seed.push_back({seed, micro_f1(preds, golds, C), macro_f1(preds, golds, C),
                              tuned.trace.empty() ? 0.0 : tuned.trace.back()});
    }
    summarize(r);
    return r;
}

inline RunResult run_task(const HetGraph& g, TaskKind kind, const PipelineConfig& cfg,
                          std::span<const std::uint64_t> seeds) {
    const auto corpus = pretrain_corpus(g, cfg);
    const auto pre = pretrain_encoder(corpus, g.schema, cfg,
                                      cfg.het_augmentation ? AugmentScope::heterogeneous : AugmentScope::uniform);
    const auto tasks = build_tasks(g, kind, cfg);
    return evaluate(tasks, g.schema, kind, cfg, pre.encoder, seeds);
}

/// Four rows: VARIANT 1 (neither), VARIANT 2 (prompt only), VARIANT 3
/// (augmentation only), HGMP (both). Without heterogeneous augmentation the
/// encoder is pre-trained with type-blind augmentation at the same ratio;
/// without the prompt feature the bank is fixed at ones and only the head trains.
inline std::vector<RunResult> run_ablation(const HetGraph& g, TaskKind kind, const PipelineConfig& cfg,
                                           std::span<const std::uint64_t> seeds, const EncoderParams& het_encoder,
                                           const EncoderParams& uniform_encoder) {
    const auto tasks = build_tasks(g, kind, cfg);
    std::vector<RunResult> rows;
    for (const auto& v : kAblationVariants) {
        PipelineConfig vc = cfg;
        vc.het_augmentation = v.het_augmentation;
        vc.het_prompt = v.het_prompt;
        rows.push_back(evaluate(tasks, g.schema, kind, vc, v.het_augmentation ? het_encoder : uniform_encoder, seeds,
                                v.name));
    }
    return rows;
}

inline std::vector<RunResult> run_ablation(const HetGraph& g, TaskKind kind, const PipelineConfig& cfg,
                                           std::span<const std::uint64_t> seeds) {
    const auto corpus = pretrain_corpus(g, cfg);
    const auto het = pretrain_encoder(corpus, g.schema, cfg, AugmentScope::heterogeneous);
    const auto uni = pretrain_encoder(corpus, g.schema, cfg, AugmentScope::uniform);
    return run_ablation(g, kind, cfg, seeds, het.encoder, uni.encoder);
}

/// One result per shot count, all using the same seeds and encoder.
inline std::vector<RunResult> shot_sweep(const HetGraph& g, TaskKind kind, const PipelineConfig& cfg,
                                         std::span<const std::size_t> shots, std::span<const std::uint64_t> seeds,
                                         const EncoderParams& encoder) {
    if (shots.empty()) throw DomainError("shot sweep: no shot counts");
    const auto tasks = build_tasks(g, kind, cfg);
    std::map<int, std::size_t> per_class;
    for (const auto& t : tasks) ++per_class[*t.label];
    const std::size_t max_shot = *std::max_element(shots.begin(), shots.end());
    for (const auto& [cls, count] : per_class)
        if (count < max_shot + 1)
            throw DomainError("shot sweep: class " + std::to_string(cls) + " has " + std::to_string(count) +
                              " items; shot " + std::to_string(max_shot) + " needs " + std::to_string(max_shot + 1));
    std::vector<RunResult> out;
    for (auto k : shots) {
        PipelineConfig sc = cfg;
        sc.shots = k;
        out.push_back(evaluate(tasks, g.schema, kind, sc, encoder, seeds, "HGMP"));
    }
    return out;
}

inline std::vector<RunResult> shot_sweep(const HetGraph& g, TaskKind kind, const PipelineConfig& cfg,
                                         std::span<const std::size_t> shots, std::span<const std::uint64_t> seeds) {
    const auto corpus = pretrain_corpus(g, cfg);
    const auto pre = pretrain_encoder(corpus, g.schema, cfg,
                                      cfg.het_augmentation ? AugmentScope::heterogeneous : AugmentScope::uniform);
    return shot_sweep(g, kind, cfg, shots, seeds, pre.encoder);
}

// ---------------------------------------------------------------------------
// result files

/// variant,task,shots,seed,micro,macro
inline std::string results_csv(std::span<const RunResult> results) {
    std::string out = "variant,task,shots,seed,micro,macro\n";
    for (const auto& r : results)
        for (const auto& s : r.per_seed)
            out += r.variant + "," + to_string(r.kind) + "," + std::to_string(r.shots) + "," +
                   std::to_string(s.seed) + "," + detail::format_double(s.micro) + "," +
                   detail::format_double(s.macro) + "\n";
    return out;
}

inline nlohmann::json summary_json(std::span<const RunResult> results) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : results) {
        nlohmann::json seeds = nlohmann::json::array();
        for (const auto& s : r.per_seed) seeds.push_back(s.seed);
        rows.push_back({{"variant", r.variant},
                        {"task", to_string(r.kind)},
                        {"shots", r.shots},
                        {"seeds", seeds},
                        {"micro_f1", {{"mean", r.micro_mean}, {"std", r.micro_std}}},
                        {"macro_f1", {{"mean", r.macro_mean}, {"std", r.macro_std}}},
                        {"config_fingerprint", r.config_fingerprint}});
    }
    return {{"results", rows}};
}

inline void write_results(std::span<const RunResult> results, const fs::path& dir, const std::string& csv_name) {
    fs::create_directories(dir);
    detail::write_text(dir / csv_name, results_csv(results));
    detail::write_text(dir / "summary.json", summary_json(results).dump(2) + "\n");
}

/// Mean micro/macro F1 against shot count, as a standalone SVG line chart.
inline std::string sweep_svg(std::span<const RunResult> sweep, const std::string& title) {
    const double w = 480, h = 320, left = 50, right = 20, top = 30, bottom = 40;
    std::size_t max_shot = 1;
    for (const auto& r : sweep) max_shot = std::max(max_shot, r.shots);
    auto x = [&](std::size_t s) { return left + (w - left - right) * static_cast<double>(s) / static_cast<double>(max_shot); };
    auto y = [&](double v) { return top + (h - top - bottom) * (1.0 - v); };
    auto fmt = [](double v) { return detail::format_double(std::round(v * 100.0) / 100.0); };
    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"320\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + fmt(w / 2) + "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" + title + "</text>\n";
    svg += "<line x1=\"" + fmt(left) + "\" y1=\"" + fmt(y(0)) + "\" x2=\"" + fmt(w - right) + "\" y2=\"" + fmt(y(0)) +
           "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + fmt(left) + "\" y1=\"" + fmt(y(0)) + "\" x2=\"" + fmt(left) + "\" y2=\"" + fmt(y(1)) +
           "\" stroke=\"black\"/>\n";
    for (double v : {0.0, 0.25, 0.5, 0.75, 1.0})
        svg += "<text x=\"" + fmt(left - 6) + "\" y=\"" + fmt(y(v) + 4) + "\" text-anchor=\"end\" font-size=\"10\">" +
               fmt(v) + "</text>\n";
    for (const auto& r : sweep)
        svg += "<text x=\"" + fmt(x(r.shots)) + "\" y=\"" + fmt(h - bottom + 14) +
               "\" text-anchor=\"middle\" font-size=\"10\">" + std::to_string(r.shots) + "</text>\n";
    auto line = [&](auto get, const char* color) {
        std::string pts;
        for (const auto& r : sweep) pts += fmt(x(r.shots)) + "," + fmt(y(get(r))) + " ";
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
    };
    line([](const RunResult& r) { return r.micro_mean; }, "steelblue");
    line([](const RunResult& r) { return r.macro_mean; }, "darkorange");
    svg += "<text x=\"" + fmt(w - right) + "\" y=\"" + fmt(h - 6) +
           "\" text-anchor=\"end\" font-size=\"10\">shots (blue: micro-F1, orange: macro-F1)</text>\n";
    svg += "</svg>\n";
    return svg;
}

}  // namespace hgmp
