// qhmm: fit, calibrate, simulate and validate quantile HMM return models.

#include "qhmm/cli/commands.hpp"
#include "qhmm/cli/config.hpp"
#include "qhmm/error.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

int fail(const char* category, int code, const std::string& message) {
    nlohmann::json err{{"error", {{"category", category}, {"exit_code", code}, {"message", message}}}};
    std::cerr << err.dump() << "\n";
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantile hidden Markov model simulator for daily equity returns"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string out_dir = "qhmm_out";
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::vector<std::string> tickers;
    app.add_option("--config", config_path, "run configuration (JSON)");
    app.add_option("--seed", seed, "override the config seed");
    app.add_option("--out", out_dir, "output directory")->capture_default_str();
    app.add_option("--ticker", tickers, "restrict to these tickers (repeatable)");
    app.add_option("--workers", workers, "worker threads (0 = hardware concurrency)");

    const std::vector<std::pair<const char*, const char*>> commands{
        {"fit", "fit per-ticker models and descriptive statistics"},
        {"calibrate", "grid-search the jump parameters"},
        {"simulate", "simulate path ensembles"},
        {"validate", "evaluate generators against the observed series"},
        {"portfolio", "fit cross-asset dependence and couple ensembles"},
        {"report", "summarize the artifacts in --out"}};
    for (const auto& [name, help] : commands) app.add_subcommand(name, help);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("config", 2, e.what());
    }

    try {
        const auto cmd = qhmm::cli::parse_command(app.get_subcommands().front()->get_name());
        std::optional<qhmm::cli::RunConfig> cfg;
        if (!config_path.empty()) cfg = qhmm::cli::load_config(config_path);
        else if (cmd != qhmm::cli::Command::report) return fail("config", 2, "--config is required");
        qhmm::cli::RunOptions opt;
        opt.out_dir = out_dir;
        opt.tickers = tickers;
        opt.seed = seed;
        opt.workers = workers;
        qhmm::cli::run_command(cmd, cfg, opt);
    } catch (const qhmm::ConfigError& e) {
        return fail("config", e.exit_code(), e.what());
    } catch (const qhmm::DataError& e) {
        return fail("data", e.exit_code(), e.what());
    } catch (const qhmm::NumericError& e) {
        return fail("numeric", e.exit_code(), e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return fail("data", 3, e.what());
    } catch (const std::exception& e) {
        return fail("internal", 1, e.what());
    }
    return 0;
}
