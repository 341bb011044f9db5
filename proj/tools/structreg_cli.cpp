#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "structreg/config.hpp"
#include "structreg/runner.hpp"

namespace {

// One line on stderr that scripts can parse.
int fail(const std::string& kind, const std::string& message) {
    std::string escaped;
    for (char ch : message) {
        if (ch == '"' || ch == '\\') escaped += '\\';
        escaped += ch == '\n' ? ' ' : ch;
    }
    std::fprintf(stderr, "error kind=%s message=\"%s\"\n", kind.c_str(), escaped.c_str());
    return kind == "usage" ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Structural regularization Monte Carlo harness"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run one experiment and write summary.csv, curves.csv, config.snapshot, report.json");
    std::optional<std::string> experiment;
    std::optional<int> scenario;
    std::optional<int> trials;
    std::optional<std::uint64_t> seed;
    std::string config_path;
    std::optional<std::string> out_dir;
    run->add_option("--experiment", experiment, "auction | entry-exit | demand");
    run->add_option("--scenario", scenario, "scenario number");
    run->add_option("--trials", trials, "Monte Carlo trials");
    run->add_option("--seed", seed, "base seed");
    run->add_option("--config", config_path, "JSON config file");
    run->add_option("--out", out_dir, "output directory");

    auto* validate = app.add_subcommand("validate", "check a config file");
    std::string validate_path;
    validate->add_option("--config", validate_path, "JSON config file")->required();

    auto* list = app.add_subcommand("list-experiments", "list experiments, scenarios and estimators");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what());
    }

    try {
        if (*list) {
            for (const auto& name : structreg::experiment_names()) {
                std::printf("%s\n", name.c_str());
                for (int s = 1; s <= structreg::scenario_count(name); ++s) {
                    std::printf("  scenario %d: %s\n", s, structreg::scenario_label(name, s).c_str());
                }
                std::string est;
                for (const auto& e : structreg::estimator_names(name)) est += (est.empty() ? "" : ", ") + e;
                std::printf("  estimators: %s\n", est.c_str());
            }
            return 0;
        }
        if (*validate) {
            const auto cfg = structreg::load_config(validate_path);
            std::printf("ok %s\n", structreg::canonical_json(cfg).c_str());
            return 0;
        }
        structreg::RunConfig cfg = config_path.empty() ? structreg::RunConfig{} : structreg::load_config(config_path);
        if (experiment) cfg.experiment = *experiment;
        if (scenario) cfg.scenario = *scenario;
        if (trials) cfg.trials = *trials;
        if (seed) cfg.base_seed = *seed;
        if (out_dir) cfg.output_dir = *out_dir;
        cfg.validate();
        const auto report = structreg::run_and_emit(cfg);
        for (const auto& row : report.summary) {
            std::printf("%-12s %-4s bias=%.6g var=%.6g mse=%.6g\n", row.estimator.c_str(), row.domain.c_str(),
                        row.metrics.bias, row.metrics.variance, row.metrics.mse);
        }
        std::printf("wrote %s (%.1f s)\n", cfg.output_dir.c_str(), report.wall_seconds);
        return 0;
    } catch (const structreg::ConfigError& e) {
        return fail("config", e.what());
    } catch (const std::exception& e) {
        return fail("run", e.what());
    }
}
