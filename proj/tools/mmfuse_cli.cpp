// Command-line front end: generate, run, train, report.

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mmfuse/config.hpp"
#include "mmfuse/error.hpp"
#include "mmfuse/event_log.hpp"
#include "mmfuse/models.hpp"
#include "mmfuse/pipeline.hpp"
#include "mmfuse/scenario.hpp"

namespace fs = std::filesystem;
using namespace mmfuse;

namespace {

struct GlobalOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<int> queue_capacity;
    bool deterministic = false;
};

Config resolve_config(const GlobalOptions &g) {
    Config c = g.config_path.empty() ? Config{} : load_config(g.config_path);
    if (g.seed) c.seed = *g.seed;
    if (g.queue_capacity) c.runtime.queue_capacity = *g.queue_capacity;
    if (g.deterministic) c.runtime.deterministic = true;
    c.validate();
    return c;
}

fs::path require_out(const GlobalOptions &g) {
    if (g.out.empty()) throw InvalidConfig("--out is required for this command");
    return g.out;
}

int generate(const GlobalOptions &g, const std::string &preset, const std::string &scenario_path) {
    const std::uint64_t seed = g.seed.value_or(preset == "injection" ? 11 : 7);
    Scenario s;
    if (!scenario_path.empty()) {
        s = load_scenario(scenario_path);
        if (g.seed) s.seed = *g.seed;
    } else if (preset == "canonical") {
        s = canonical_scenario(seed);
    } else if (preset == "injection") {
        s = injection_scenario(seed);
    } else {
        throw InvalidConfig("unknown preset '" + preset + "' (expected canonical or injection)");
    }
    const fs::path out = require_out(g);
    write_scenario_dir(out, s);
    std::cout << "wrote " << s.frame_count() << " frames and " << s.sample_count() << " samples to " << out.string() << '\n';
    return 0;
}

int run(const GlobalOptions &g, const std::string &input_dir, bool single_thread, int delay_ms, const std::string &model_dir,
        int burst_frames) {
    Config c = resolve_config(g);
    if (single_thread) c.runtime.threaded = false;
    if (delay_ms >= 0) c.runtime.analysis_delay_ms = delay_ms;
    if (!model_dir.empty()) c.runtime.model_dir = model_dir;
    if (burst_frames > 0) c.runtime.burst_frames = burst_frames;
    c.validate();
    const fs::path out = require_out(g);
    const auto input = open_input(input_dir);
    const auto models = models_for(c);
    const auto result = run_pipeline(input, c, models, out);
    std::cout << result.summary().dump(2) << '\n';
    return 0;
}

int train(const GlobalOptions &g, const std::string &input_dir, const TrainOptions &opts) {
    const Config c = resolve_config(g);
    const fs::path out = require_out(g);
    const auto input = open_input(input_dir);
    ModelBundle models = ModelBundle::init(c);
    const auto r = train_models(input, c, opts, models);
    save_models(out, models);
    std::cout << "sequences: " << r.sequences << '\n'
              << "basic loss: " << r.basic_loss_first << " -> " << r.basic_loss_last << '\n'
              << "advanced loss: " << r.advanced_loss_first << " -> " << r.advanced_loss_last << '\n'
              << "autoencoder mse: " << r.autoencoder_mse << '\n'
              << "models written to " << out.string() << '\n';
    return 0;
}

int report(const std::string &log_path) {
    const auto records = read_event_log(log_path);
    std::map<std::string, std::size_t> kinds;
    std::size_t triggered = 0, windows = 0;
    std::map<std::string, std::size_t> types;
    for (const auto &r : records) {
        ++kinds[event_kind_name(r.kind)];
        if (r.kind == EventKind::Anomaly) {
            ++windows;
            if (r.payload.value("triggered", false)) {
                ++triggered;
                ++types[r.payload.value("type", std::string("unknown"))];
            }
        }
    }
    std::cout << "records: " << records.size() << '\n';
    for (const auto &[k, n] : kinds) std::cout << "  " << k << ": " << n << '\n';
    std::cout << "windows scored: " << windows << '\n' << "anomalies triggered: " << triggered << '\n';
    for (const auto &[t, n] : types) std::cout << "  " << t << ": " << n << '\n';
    for (const auto &r : records)
        if (r.kind == EventKind::Anomaly && r.payload.value("triggered", false))
            std::cout << "  t=" << r.t << " window=" << r.window << " type=" << r.payload.value("type", std::string())
                      << " combined=" << r.payload.value("combined", 0.0) << '\n';
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Multimodal audio-visual monitoring pipeline"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--config", g.config_path, "Config JSON file")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Seed override");
    app.add_option("--out", g.out, "Output directory");
    app.add_option("--queue-capacity", g.queue_capacity, "Capacity of every stage queue")->check(CLI::PositiveNumber);
    app.add_flag("--deterministic", g.deterministic, "Raise queue capacities so no item is dropped");

    auto *gen = app.add_subcommand("generate", "Synthesise a scenario directory");
    std::string preset = "canonical", scenario_path;
    gen->add_option("--preset", preset, "canonical | injection");
    gen->add_option("--scenario", scenario_path, "Scenario JSON (overrides --preset)")->check(CLI::ExistingFile);

    auto *run_cmd = app.add_subcommand("run", "Run the pipeline on a scenario directory");
    std::string input_dir, model_dir;
    bool single_thread = false;
    int delay_ms = -1, burst_frames = 0;
    run_cmd->add_option("--input", input_dir, "Scenario directory with manifest.json")->required();
    run_cmd->add_option("--model-dir", model_dir, "Directory written by train");
    run_cmd->add_option("--burst-frames", burst_frames, "Frames per burst");
    run_cmd->add_option("--analysis-delay-ms", delay_ms, "Artificial delay in the feature stage");
    run_cmd->add_flag("--single-thread", single_thread, "Run all stages on the calling thread");

    auto *train_cmd = app.add_subcommand("train", "Train fusion models and the autoencoder on a scenario");
    TrainOptions topts;
    train_cmd->add_option("--input", input_dir, "Scenario directory with scenario.json")->required();
    train_cmd->add_option("--basic-steps", topts.basic_steps);
    train_cmd->add_option("--advanced-steps", topts.advanced_steps);
    train_cmd->add_option("--lr", topts.learning_rate);
    train_cmd->add_option("--momentum", topts.momentum);

    auto *report_cmd = app.add_subcommand("report", "Summarise an event log");
    std::string log_path;
    report_cmd->add_option("--log", log_path, "events.jsonl")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*gen) return generate(g, preset, scenario_path);
        if (*run_cmd) return run(g, input_dir, single_thread, delay_ms, model_dir, burst_frames);
        if (*train_cmd) return train(g, input_dir, topts);
        if (*report_cmd) return report(log_path);
    } catch (const InvalidConfig &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
