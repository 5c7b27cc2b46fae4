#include "commands.hpp"

#include "plot.hpp"
#include "traces.hpp"

#include <rlld/checkpoint.hpp>
#include <rlld/config.hpp>
#include <rlld/data.hpp>
#include <rlld/metrics.hpp>
#include <rlld/trainer.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>

namespace rlld::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

RunConfig base_config(const std::string& config_path, const std::vector<std::string>& overrides) {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    apply_overrides(cfg, overrides);
    return cfg;
}

Dataset open_dataset(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(Error::Kind::io, "dataset directory not found: " + dir.string());
    return load_dataset(dir);
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw Error(Error::Kind::io, "cannot create directory " + dir.string());
}

json levels_json(const EvaluationReport& r) { return json::parse(report_to_json(r)); }

json labels_json(const BinaryMatrix& m) {
    json rows = json::array();
    for (Eigen::Index t = 0; t < m.rows(); ++t) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(t, c));
        rows.push_back(row);
    }
    return rows;
}

struct SynthArgs {
    std::string config;
    std::string out;
    std::vector<std::string> overrides;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    const RunConfig cfg = base_config(a.config, a.overrides);
    const SyntheticDataset syn = generate_synthetic(cfg.data);
    save_dataset(syn.dataset, a.out, &cfg.data);
    const InjectionStats stats = count_injections(syn.dataset.train, syn.train_clean);
    out << "wrote " << syn.dataset.size() << " videos (" << syn.dataset.train.size() << " train, "
        << syn.dataset.validation.size() << " validation, " << syn.dataset.test.size() << " test) to " << a.out
        << "\ninjected " << stats.injected << " of " << stats.eligible_slots << " eligible train label slots\n";
    return kExitOk;
}

struct TrainArgs {
    std::string config;
    std::string data;
    std::string out;
    std::string ablation;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;
    bool quiet = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
    RunConfig cfg = base_config(a.config, a.overrides);
    if (const char* env = std::getenv(kSeedEnv); env != nullptr && *env != '\0') {
        try {
            cfg.train.seed = std::stoull(env);
        } catch (const std::exception&) {
            throw Error(Error::Kind::invalid_config, std::string(kSeedEnv) + " is not an unsigned integer: " + env);
        }
    }
    if (a.seed) cfg.train.seed = *a.seed;
    if (!a.ablation.empty()) cfg.train.ablation = parse_ablation(a.ablation);
    cfg.train.validate();

    const Dataset dataset = open_dataset(a.data);
    const fs::path run_dir = a.out;
    ensure_dir(run_dir);
    save_run_config(cfg, run_dir / "config.json");
    const std::string hash = hex64(config_hash(cfg));

    std::ofstream traces(run_dir / "traces.csv", std::ios::binary);
    if (!traces) throw Error(Error::Kind::io, "cannot write " + (run_dir / "traces.csv").string());
    write_trace_header(traces);

    Trainer trainer(dataset, cfg.train);
    FitResult result;
    try {
        result = trainer.fit([&](const StepTrace& t) {
            write_trace_rows(traces, t);
            if (!a.quiet && t.step == cfg.train.episode_length) {
                err << "episode " << t.episode << ": validation segment Type@AV " << t.segment.type
                    << ", audio reward " << t.audio.total << ", visual reward " << t.visual.total << '\n';
            }
        });
    } catch (const Error& e) {
        traces.flush();
        if (e.kind() == Error::Kind::numerical) {
            std::ofstream(run_dir / "abort.txt") << e.what() << '\n';
        }
        throw;
    }
    traces.close();

    const auto ckpt = [&](const DenoiserParams& d, const TaskParams& t, int epoch, double score) {
        return Checkpoint{d, t, cfg.train.seed, hash, epoch, score};
    };
    save_checkpoint(ckpt(result.best_denoiser, result.best_task, result.best_epoch, result.best_score),
                    run_dir / "checkpoints" / "best");
    const int last_epoch = static_cast<int>(result.epochs.size());
    const double last_score = result.epochs.empty() ? result.best_score : result.epochs.back().validation.segment.type;
    save_checkpoint(ckpt(result.denoiser, result.task, last_epoch, last_score), run_dir / "checkpoints" / "last");

    json summary;
    summary["config_hash"] = hash;
    summary["seed"] = cfg.train.seed;
    summary["steps"] = result.traces.size();
    summary["epochs"] = last_epoch;
    summary["converged"] = result.converged;
    summary["best_epoch"] = result.best_epoch;
    summary["best_validation_type_av"] = result.best_score;
    json epochs = json::array();
    for (const EpochSummary& e : result.epochs) {
        epochs.push_back({{"epoch", e.epoch}, {"segment_type_av", e.validation.segment.type},
                          {"event_type_av", e.validation.event.type}, {"improved", e.improved}});
    }
    summary["validation_by_epoch"] = epochs;
    if (!dataset.test.empty() && dataset.test.front().has_segments()) {
        summary["test_best"] = levels_json(evaluate_task(result.best_task, dataset.test, cfg.train.threshold));
    }
    std::ofstream(run_dir / "summary.json", std::ios::binary) << summary.dump(2) << '\n';

    out << "trained " << result.traces.size() << " steps over " << last_epoch << " epochs; best validation "
        << "segment Type@AV " << result.best_score << " at epoch " << result.best_epoch << "\nrun directory: "
        << run_dir.string() << '\n';
    return kExitOk;
}

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    std::string split = "test";
    std::string aggregation = "micro";
    std::string report;
    std::string predictions;
    bool as_json = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    const Checkpoint ck = load_checkpoint(a.checkpoint);
    const Dataset dataset = open_dataset(a.data);
    const auto& samples = split_of(dataset, parse_split(a.split));
    if (samples.empty()) throw Error(Error::Kind::empty_dataset, "split '" + a.split + "' is empty");
    if (a.aggregation != "micro" && a.aggregation != "macro") {
        throw Error(Error::Kind::invalid_config, "aggregation must be micro or macro");
    }
    const Aggregation agg = a.aggregation == "macro" ? Aggregation::macro : Aggregation::micro;

    const PredictionMap predictions = predict_split(ck.task, samples, ck.task.config.threshold);
    const EvaluationReport report = evaluate(predictions, samples, agg);
    const std::string text = report_to_json(report);
    if (!a.report.empty()) {
        std::ofstream f(a.report, std::ios::binary);
        f << text << '\n';
        if (!f) throw Error(Error::Kind::io, "cannot write " + a.report);
    }
    if (!a.predictions.empty()) {
        json dump = json::object();
        for (const auto& [id, labels] : predictions) {
            dump[id] = {{"audio", labels_json(labels.audio)}, {"visual", labels_json(labels.visual)}};
        }
        std::ofstream f(a.predictions, std::ios::binary);
        f << dump.dump() << '\n';
        if (!f) throw Error(Error::Kind::io, "cannot write " + a.predictions);
    }
    if (a.as_json) {
        out << text << '\n';
    } else {
        out << format_report_table(report);
        const F1Counts noise = noise_identification(ck.denoiser, samples, RemovalRule::greedy_policy,
                                                    ck.denoiser.config.use_labels);
        out << "noisy-label identification F: " << noise.f1() << " (tp " << noise.tp << ", fp " << noise.fp
            << ", fn " << noise.fn << ")\n";
    }
    return kExitOk;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Reinforcement-learning label denoising for audio-visual video parsing"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic dataset with modality-specific label noise");
    s->add_option("--config", synth.config, "JSON run config (data section is used)")->check(CLI::ExistingFile);
    s->add_option("--out", synth.out, "Output dataset directory")->required();
    s->add_option("--set", synth.overrides, "Override a config value, e.g. data.num_videos=500");

    TrainArgs train;
    std::uint64_t seed = 0;
    auto* t = app.add_subcommand("train", "Jointly train the denoiser and the parsing network");
    t->add_option("--config", train.config, "JSON run config")->check(CLI::ExistingFile);
    t->add_option("--data", train.data, "Dataset directory")->required();
    t->add_option("--out", train.out, "Run directory")->required();
    t->add_option("--ablation", train.ablation, "none, no_inter_reward or no_initialized_labels");
    auto* seed_opt = t->add_option("--seed", seed, "Training seed (overrides config and RLLD_SEED)");
    t->add_option("--set", train.overrides, "Override a config value, e.g. train.max_epochs=3");
    t->add_flag("--quiet", train.quiet, "Suppress per-episode progress");

    EvalArgs eval;
    auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
    e->add_option("--checkpoint", eval.checkpoint, "Checkpoint directory")->required();
    e->add_option("--data", eval.data, "Dataset directory")->required();
    e->add_option("--split", eval.split, "train, validation or test")->capture_default_str();
    e->add_option("--aggregation", eval.aggregation, "micro or macro")->capture_default_str();
    e->add_option("--report", eval.report, "Write the JSON report here");
    e->add_option("--predictions", eval.predictions, "Write per-video predictions (JSON) here");
    e->add_flag("--json", eval.as_json, "Print the JSON report instead of the table");

    std::vector<std::string> runs;
    std::string plot_out;
    auto* p = app.add_subcommand("plot", "Emit smoothed convergence curves from one or more runs");
    p->add_option("--runs", runs, "Run directories (several for a mean and standard-deviation band)")->required();
    p->add_option("--out", plot_out, "Output directory")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (s->parsed()) return cmd_synth(synth, out);
    if (t->parsed()) {
        if (seed_opt->count() > 0) train.seed = seed;
        return cmd_train(train, out, err);
    }
    if (e->parsed()) return cmd_eval(eval, out);
    const auto written = plot_runs({runs.begin(), runs.end()}, plot_out);
    out << "wrote " << written.size() << " files to " << plot_out << '\n';
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    try {
        return dispatch(args, out, err);
    } catch (const Error& ex) {
        err << "error: " << ex.what() << '\n';
        return ex.kind() == Error::Kind::numerical ? kExitNumerical : kExitUsage;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return kExitUsage;
    }
}

}  // namespace rlld::cli
