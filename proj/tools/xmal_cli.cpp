// Command-line front end: generate | run | resume | report | serve.
//
// Exit codes: 0 success, 1 usage/config, 2 data validation, 3 invariant breach.

#include <csignal>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "xmal/annotation_hub.hpp"
#include "xmal/config.hpp"
#include "xmal/data.hpp"
#include "xmal/error.hpp"
#include "xmal/report.hpp"
#include "xmal/runner.hpp"
#include "xmal/service.hpp"

namespace {

using namespace xmal;

constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kInvariant = 3;

ExperimentConfig build_config(const std::string& path, const std::vector<std::string>& overrides) {
    ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : load_config(path);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

void print_progress(const Experiment& ex) {
    if (ex.log().iterations.empty()) return;
    const auto& it = ex.log().iterations.back();
    std::cout << "iter " << it.iteration << "  labeled " << it.labeled << "  unlabeled " << it.unlabeled
              << "  acc " << it.test_accuracy << "  loss " << it.loss_total;
    if (it.top5_mean_post) std::cout << "  top5-unc " << *it.top5_mean_post;
    std::cout << '\n';
}

int drive(Experiment& ex, std::optional<std::size_t> max_iterations) {
    RunStatus status = ex.finished() ? RunStatus::Finished : RunStatus::Running;
    std::size_t done = 0;
    while (status == RunStatus::Running && (!max_iterations || done < *max_iterations)) {
        status = ex.step();
        ++done;
        print_progress(ex);
        ex.write_outputs();
    }
    ex.write_outputs();
    if (status == RunStatus::Paused) {
        std::cout << "paused: oracle timed out; resume from " << ex.config().output_dir << "/state.json\n";
    } else if (status == RunStatus::Finished) {
        std::cout << "finished after " << ex.log().iterations.size() << " iteration(s)\n";
    } else {
        std::cout << "stopped at iteration boundary " << ex.next_iteration() << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-modal consistency active learning engine"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_path;
    bool with_split = false;
    std::optional<std::size_t> max_iterations;
    std::string state_path;
    std::vector<std::string> logs;
    std::vector<double> budgets = kDefaultBudgets;
    std::string bind;
    int port = -1;

    auto* gen = app.add_subcommand("generate", "Write a synthetic dataset as a feature file");
    gen->add_option("-c,--config", config_path, "Experiment config (synth.* keys are used)");
    gen->add_option("-s,--set", overrides, "Override a config key (key=value)");
    gen->add_option("-o,--out", out_path, "Output feature file")->required();
    gen->add_flag("--with-split", with_split, "Tag records with the configured split");

    auto* run = app.add_subcommand("run", "Run an experiment with the simulated oracle");
    run->add_option("-c,--config", config_path, "Experiment config file");
    run->add_option("-s,--set", overrides, "Override a config key (key=value)");
    run->add_option("--max-iterations", max_iterations, "Stop after this many iterations");

    auto* resume = app.add_subcommand("resume", "Continue a run from its run-state file");
    resume->add_option("--state", state_path, "Run-state file (state.json)")->required();
    resume->add_option("-c,--config", config_path, "Config that must match the run's config hash");
    resume->add_option("-s,--set", overrides, "Override a config key (key=value)");
    resume->add_option("--max-iterations", max_iterations, "Stop after this many iterations");

    auto* report = app.add_subcommand("report", "Tables and plot data from metrics logs");
    report->add_option("logs", logs, "metrics.json files")->required();
    report->add_option("-o,--out", out_path, "Output directory")->required();
    report->add_option("--budgets", budgets, "Budget grid in percent")->delimiter(',');

    auto* serve = app.add_subcommand("serve", "Run an experiment with a human oracle over HTTP");
    serve->add_option("-c,--config", config_path, "Experiment config file");
    serve->add_option("-s,--set", overrides, "Override a config key (key=value)");
    serve->add_option("--state", state_path, "Resume from this run-state file");
    serve->add_option("--bind", bind, "Bind address (default from service.bind)");
    serve->add_option("--port", port, "Port (default from service.port)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsage;
    }

    try {
        if (gen->parsed()) {
            const auto cfg = build_config(config_path, overrides);
            Dataset data = generate(cfg.synth);
            if (with_split) data = with_split_tags(std::move(data), split(data, cfg.fractions, cfg.split_seed));
            export_features(out_path, data);
            std::cout << "wrote " << data.size() << " records to " << out_path << '\n';
            return 0;
        }
        if (run->parsed()) {
            const auto cfg = build_config(config_path, overrides);
            if (cfg.oracle.kind == OracleKind::Remote) {
                throw ConfigError("oracle.kind = remote needs the annotation service; use `serve`");
            }
            Experiment ex(cfg, load_dataset(cfg));
            return drive(ex, max_iterations);
        }
        if (resume->parsed()) {
            std::optional<ExperimentConfig> expected;
            if (!config_path.empty() || !overrides.empty()) expected = build_config(config_path, overrides);
            Experiment ex = Experiment::resume_file(state_path, expected ? &*expected : nullptr);
            return drive(ex, max_iterations);
        }
        if (report->parsed()) {
            std::vector<MetricsLog> loaded;
            for (const auto& p : logs) loaded.push_back(MetricsLog::load(p));
            const auto rep = build_report(loaded, budgets);
            for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
            write_report(rep, out_path);
            std::cout << rep.table.to_csv();
            return 0;
        }
        if (serve->parsed()) {
            auto cfg = build_config(config_path, overrides);
            cfg.oracle.kind = OracleKind::Remote;
            if (!bind.empty()) cfg.service.bind = bind;
            if (port >= 0) cfg.service.port = port;
            Experiment ex = state_path.empty() ? Experiment(cfg, load_dataset(cfg))
                                               : Experiment::resume_file(state_path, &cfg);
            AnnotationHub hub(ex.data().num_classes);
            AnnotationService service(hub, cfg.service.cors_origin);
            const int bound = service.start(cfg.service.bind, cfg.service.port);
            std::cout << "annotation service on http://" << cfg.service.bind << ':' << bound << "/api/v1\n";
            ex.attach_hub(&hub);
            const int rc = drive(ex, max_iterations);
            service.stop();
            return rc;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const InvariantError& e) {
        std::cerr << "invariant breach: " << e.what() << '\n';
        return kInvariant;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}
