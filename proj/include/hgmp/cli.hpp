#pragma once

// Command-line front end. Subcommands:
//
//   synth     --config <synthetic spec.json> [--out DIR] [--seed N]
//   pretrain  --config <run.json> [--out DIR] [--seed N] [--backbone gcn|gat]
//   tune-eval --config <run.json> --checkpoint <encoder.json> [--task K] [--shots N] [--out DIR]
//   ablate    --config <run.json> --checkpoint-dir DIR [--task K] [--shots N] [--out DIR]
//   sweep     --config <run.json> --shots 1,3,5,10 [--checkpoint FILE] [--task K] [--plot] [--out DIR]
//   tasks     --config <run.json> [--task K] [--seed N] [--out DIR]
//
// Exit codes: 0 success, 1 domain error, 2 I/O, config or usage error.
// Output directory: --out, else the config's "out", else $HGMP_OUT/<command>,
// else ./hgmp_out/<command>.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hgmp/experiments.hpp"
#include "hgmp/io.hpp"
#include "hgmp/synthetic.hpp"

namespace hgmp::cli {

/// Declarative run description. Pipeline keys are those of
/// pipeline_from_json; in addition:
///   "dataset": path to manifest.json (relative to the config file), or
///   "synthetic": an inline synthetic spec,
///   "seeds": [..], "tasks": ["node", "edge", "graph"], "sweep_shots": [..], "out": dir.
struct RunConfig {
    fs::path config_dir;
    std::optional<fs::path> dataset;
    std::optional<SyntheticSpec> synthetic;
    PipelineConfig pipeline;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::vector<TaskKind> tasks{TaskKind::node};
    std::vector<std::size_t> sweep_shots{1, 3, 5, 10};
    std::optional<fs::path> out;
};

inline RunConfig load_run_config(const fs::path& path) {
    if (!fs::exists(path)) throw IoError("missing config file: " + path.string());
    const auto j = detail::read_json(path);
    RunConfig rc;
    rc.config_dir = path.parent_path();
    try {
        if (j.contains("dataset")) rc.dataset = rc.config_dir / j["dataset"].get<std::string>();
        if (j.contains("synthetic")) rc.synthetic = j["synthetic"].get<SyntheticSpec>();
        if (!rc.dataset && !rc.synthetic) throw ConfigError(path.string() + ": needs \"dataset\" or \"synthetic\"");
        if (j.contains("seeds")) rc.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
        if (j.contains("tasks")) {
            rc.tasks.clear();
            for (const auto& t : j["tasks"]) rc.tasks.push_back(parse_task_kind(t.get<std::string>()));
        }
        if (j.contains("sweep_shots")) rc.sweep_shots = j["sweep_shots"].get<std::vector<std::size_t>>();
        if (j.contains("out")) rc.out = rc.config_dir / j["out"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    rc.pipeline = pipeline_from_json(j);
    if (rc.seeds.empty()) throw ConfigError(path.string() + ": empty seed list");
    return rc;
}

inline HetGraph load_dataset(const RunConfig& rc) {
    if (rc.dataset) return load_graph(*rc.dataset);
    return generate_synthetic(*rc.synthetic);
}

inline fs::path resolve_out(const std::string& flag, const std::optional<fs::path>& from_config,
                            const std::string& command) {
    if (!flag.empty()) return flag;
    if (from_config) return *from_config;
    if (const char* env = std::getenv("HGMP_OUT"); env && *env) return fs::path(env) / command;
    return fs::path("hgmp_out") / command;
}

/// "1,3,5,10" -> {1,3,5,10}; anything else is a usage error.
inline std::vector<std::size_t> parse_shots(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto cell = detail::trim(item);
        std::size_t v = 0;
        auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size() || v == 0)
            throw CLI::ValidationError("--shots", "malformed shot list '" + text + "'");
        out.push_back(v);
    }
    if (out.empty()) throw CLI::ValidationError("--shots", "empty shot list");
    return out;
}

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string task;
    std::optional<std::string> shots;
    std::string backbone;
    std::string checkpoint;
    std::string checkpoint_dir;
    bool plot = false;
};

inline void apply_overrides(RunConfig& rc, const Options& o) {
    if (o.seed) rc.pipeline.seed = *o.seed;
    if (!o.backbone.empty()) rc.pipeline.encoder.backbone = parse_backbone(o.backbone);
    if (!o.task.empty()) rc.tasks = {parse_task_kind(o.task)};
}

inline std::string trace_csv(const std::vector<double>& losses) {
    std::string out = "epoch,mean_loss\n";
    for (std::size_t e = 0; e < losses.size(); ++e)
        out += std::to_string(e + 1) + "," + detail::format_double(losses[e]) + "\n";
    return out;
}

inline int cmd_synth(const Options& o, std::ostream& log, std::ostream& err) {
    SyntheticSpec spec = detail::read_json(o.config).get<SyntheticSpec>();
    if (o.seed) spec.seed = *o.seed;
    if (spec.signal == 0.0) err << "warning: null signal (signal = 0): labels are independent of the graph\n";
    const HetGraph g = generate_synthetic(spec);
    const fs::path out = resolve_out(o.out, std::nullopt, "synth");
    save_graph(g, out);
    log << "wrote " << g.total_nodes() << " nodes, " << g.total_edges() << " edges to " << out.string() << "\n";
    return 0;
}

inline int cmd_pretrain(const Options& o, std::ostream& log) {
    RunConfig rc = load_run_config(o.config);
    apply_overrides(rc, o);
    const HetGraph g = load_dataset(rc);
    const fs::path out = resolve_out(o.out, rc.out, "pretrain");
    const auto corpus = pretrain_corpus(g, rc.pipeline);
    const auto scope = rc.pipeline.het_augmentation ? AugmentScope::heterogeneous : AugmentScope::uniform;
    const auto result = pretrain_encoder(corpus, g.schema, rc.pipeline, scope);
    fs::create_directories(out);
    save_encoder(result.encoder, out / "encoder.json");
    detail::write_text(out / "pretrain_trace.csv", trace_csv(result.epoch_losses));
    log << "pre-trained on " << corpus.size() << " subgraphs for " << result.epoch_losses.size() << " epochs; wrote "
        << (out / "encoder.json").string() << "\n";
    return 0;
}

inline int cmd_tune_eval(const Options& o, std::ostream& log) {
    RunConfig rc = load_run_config(o.config);
    apply_overrides(rc, o);
    if (o.shots) {
        const auto k = parse_shots(*o.shots);
        if (k.size() != 1) throw CLI::ValidationError("--shots", "tune-eval takes a single shot count");
        rc.pipeline.shots = k.front();
    }
    const HetGraph g = load_dataset(rc);
    const EncoderParams encoder = load_encoder(o.checkpoint, &g.schema);
    if (!encoder.frozen)
        throw DomainError("refusing to tune: checkpoint " + o.checkpoint + " is not frozen (run pretrain first)");
    const fs::path out = resolve_out(o.out, rc.out, "tune-eval");
    std::vector<RunResult> results;
    for (const auto kind : rc.tasks) {
        const auto tasks = build_tasks(g, kind, rc.pipeline);
        const std::string fp = schema_fingerprint(g.schema);
        auto save = [&](std::uint64_t seed, const TuneResult& t) {
            save_prompt(t.bank, t.head, fp,
                        out / "prompts" / (std::string(to_string(kind)) + "_seed" + std::to_string(seed) + ".json"));
        };
        results.push_back(evaluate(tasks, g.schema, kind, rc.pipeline, encoder, rc.seeds, "HGMP", save));
        const auto& r = results.back();
        log << to_string(kind) << ": micro-F1 " << r.micro_mean << " +- " << r.micro_std << ", macro-F1 "
            << r.macro_mean << " +- " << r.macro_std << "\n";
    }
    write_results(results, out, "results.csv");
    return 0;
}

inline int cmd_ablate(const Options& o, std::ostream& log) {
    RunConfig rc = load_run_config(o.config);
    apply_overrides(rc, o);
    if (o.shots) {
        const auto k = parse_shots(*o.shots);
        if (k.size() != 1) throw CLI::ValidationError("--shots", "ablate takes a single shot count");
        rc.pipeline.shots = k.front();
    }
    if (rc.tasks.empty()) throw DomainError("ablate: empty task list");
    const HetGraph g = load_dataset(rc);
    const fs::path ckdir = o.checkpoint_dir.empty() ? resolve_out(o.out, rc.out, "ablate") / "checkpoints"
                                                    : fs::path(o.checkpoint_dir);
    std::optional<std::vector<InducedSubgraph>> corpus;
    auto encoder_for = [&](AugmentScope scope, const char* file) {
        const fs::path path = ckdir / file;
        if (fs::exists(path)) return load_encoder(path, &g.schema);
        if (!corpus) corpus = pretrain_corpus(g, rc.pipeline);
        auto result = pretrain_encoder(*corpus, g.schema, rc.pipeline, scope);
        save_encoder(result.encoder, path);
        return result.encoder;
    };
    const EncoderParams het = encoder_for(AugmentScope::heterogeneous, "encoder_het.json");
    const EncoderParams uni = encoder_for(AugmentScope::uniform, "encoder_uniform.json");
    if (!het.frozen || !uni.frozen) throw DomainError("refusing to tune: ablation checkpoints must be frozen");
    const fs::path out = resolve_out(o.out, rc.out, "ablate");
    std::vector<RunResult> rows;
    for (const auto kind : rc.tasks) {
        auto table = run_ablation(g, kind, rc.pipeline, rc.seeds, het, uni);
        for (auto& r : table) {
            log << to_string(kind) << "  " << r.variant << "  micro-F1 " << r.micro_mean << " +- " << r.micro_std
                << "  macro-F1 " << r.macro_mean << " +- " << r.macro_std << "\n";
            rows.push_back(std::move(r));
        }
    }
    write_results(rows, out, "ablation.csv");
    return 0;
}

inline int cmd_sweep(const Options& o, std::ostream& log) {
    RunConfig rc = load_run_config(o.config);
    apply_overrides(rc, o);
    const auto shots = o.shots ? parse_shots(*o.shots) : rc.sweep_shots;
    const HetGraph g = load_dataset(rc);
    EncoderParams encoder;
    if (!o.checkpoint.empty()) {
        encoder = load_encoder(o.checkpoint, &g.schema);
        if (!encoder.frozen) throw DomainError("refusing to tune: checkpoint " + o.checkpoint + " is not frozen");
    } else {
        const auto corpus = pretrain_corpus(g, rc.pipeline);
        encoder = pretrain_encoder(corpus, g.schema, rc.pipeline,
                                   rc.pipeline.het_augmentation ? AugmentScope::heterogeneous : AugmentScope::uniform)
                      .encoder;
    }
    const fs::path out = resolve_out(o.out, rc.out, "sweep");
    std::vector<RunResult> all;
    for (const auto kind : rc.tasks) {
        const auto sweep = shot_sweep(g, kind, rc.pipeline, shots, rc.seeds, encoder);
        for (const auto& r : sweep)
            log << to_string(kind) << "  shots " << r.shots << "  micro-F1 " << r.micro_mean << " +- " << r.micro_std
                << "\n";
        if (o.plot) {
            fs::create_directories(out);
            detail::write_text(out / ("sweep_" + std::string(to_string(kind)) + ".svg"),
                               sweep_svg(sweep, std::string("shot sweep: ") + to_string(kind) + " classification"));
        }
        all.insert(all.end(), sweep.begin(), sweep.end());
    }
    write_results(all, out, "sweep.csv");
    return 0;
}

inline int cmd_tasks(const Options& o, std::ostream& log) {
    RunConfig rc = load_run_config(o.config);
    apply_overrides(rc, o);
    const HetGraph g = load_dataset(rc);
    const fs::path out = resolve_out(o.out, rc.out, "tasks");
    for (const auto kind : rc.tasks) {
        const auto tasks = build_tasks(g, kind, rc.pipeline);
        const auto task = sample_k_shot(tasks, rc.pipeline.shots, rc.pipeline.query_fraction,
                                        o.seed.value_or(rc.seeds.front()), kind);
        save_task_dump(task, out / to_string(kind));
        log << to_string(kind) << ": " << task.support.size() << " support, " << task.query.size() << " query\n";
    }
    return 0;
}

/// Parses arguments, runs one subcommand, maps errors to exit codes.
inline int run(int argc, const char* const* argv, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Heterogeneous graph multi-task prompting: pre-training, prompt tuning and few-shot evaluation"};
    app.require_subcommand(1);
    Options o;
    std::uint64_t seed_value = 0;

    auto add_common = [&](CLI::App* sub, bool config_required = true) {
        auto* c = sub->add_option("--config", o.config, "config file");
        if (config_required) c->required();
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--seed", seed_value, "override the master seed");
    };
    auto* synth = app.add_subcommand("synth", "generate a synthetic planted-class dataset");
    add_common(synth);
    auto* pre = app.add_subcommand("pretrain", "contrastive pre-training; writes a frozen encoder checkpoint");
    add_common(pre);
    pre->add_option("--backbone", o.backbone, "gcn or gat");
    auto* tune_eval = app.add_subcommand("tune-eval", "prompt tuning and few-shot evaluation");
    add_common(tune_eval);
    tune_eval->add_option("--checkpoint", o.checkpoint, "frozen encoder checkpoint")->required();
    tune_eval->add_option("--task", o.task, "node, edge or graph");
    tune_eval->add_option("--shots", o.shots, "shots per class");
    auto* ablate = app.add_subcommand("ablate", "four-way ablation (VARIANT 1-3, HGMP)");
    add_common(ablate);
    ablate->add_option("--checkpoint-dir", o.checkpoint_dir, "directory for encoder_het.json / encoder_uniform.json");
    ablate->add_option("--task", o.task, "node, edge or graph");
    ablate->add_option("--shots", o.shots, "shots per class");
    ablate->add_option("--backbone", o.backbone, "gcn or gat");
    auto* sweep = app.add_subcommand("sweep", "few-shot accuracy against shot count");
    add_common(sweep);
    sweep->add_option("--shots", o.shots, "comma-separated shot counts, e.g. 1,3,5,10");
    sweep->add_option("--checkpoint", o.checkpoint, "frozen encoder checkpoint (pre-trains when omitted)");
    sweep->add_option("--task", o.task, "node, edge or graph");
    sweep->add_option("--backbone", o.backbone, "gcn or gat");
    sweep->add_flag("--plot", o.plot, "write an SVG chart per task");
    auto* tasks = app.add_subcommand("tasks", "dump one sampled few-shot task per task kind");
    add_common(tasks);
    tasks->add_option("--task", o.task, "node, edge or graph");

    try {
        app.parse(argc, argv);
        for (auto* sub : app.get_subcommands())
            if (sub->count("--seed") > 0) o.seed = seed_value;
        if (synth->parsed()) return cmd_synth(o, log, err);
        if (pre->parsed()) return cmd_pretrain(o, log);
        if (tune_eval->parsed()) return cmd_tune_eval(o, log);
        if (ablate->parsed()) return cmd_ablate(o, log);
        if (sweep->parsed()) return cmd_sweep(o, log);
        if (tasks->parsed()) return cmd_tasks(o, log);
        return 2;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, log, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, log, err);
    } catch (const CLI::Error& e) {
        app.exit(e, log, err);
        return 2;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace hgmp::cli
