#include <algorithm>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedlog/bench.hpp"
#include "fedlog/errors.hpp"
#include "fedlog/version.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_run(const std::string& config_path, const std::string& algorithm,
            long long rounds, const std::string& seed_list,
            const std::string& out_dir) {
    fedlog::ExperimentConfig config =
        fedlog::parse_config_file(config_path);
    if (!algorithm.empty()) {
        config.algorithm = fedlog::algorithm_from_string(algorithm);
    }
    if (rounds >= 0) config.rounds = static_cast<std::size_t>(rounds);
    if (!seed_list.empty()) {
        config.seeds.clear();
        std::string item;
        std::size_t pos = 0;
        while (pos <= seed_list.size()) {
            const std::size_t next = seed_list.find(',', pos);
            item = seed_list.substr(
                pos, next == std::string::npos ? std::string::npos : next - pos);
            if (item.empty()) {
                throw fedlog::ConfigError("--seed-list has an empty entry");
            }
            config.seeds.push_back(std::stoull(item));
            if (next == std::string::npos) break;
            pos = next + 1;
        }
    }
    fedlog::validate_experiment_config(config);

    const fedlog::ExperimentResult result = fedlog::run_experiment(config);

    fs::create_directories(out_dir);
    const std::string stem = fedlog::to_string(config.task) + "_" +
                             fedlog::to_string(config.algorithm);
    const fs::path csv_path = fs::path(out_dir) / (stem + ".csv");
    const fs::path json_path = fs::path(out_dir) / (stem + ".json");
    fedlog::write_metrics(result.rows, csv_path);
    fedlog::write_sidecar(config, result, json_path);

    const fedlog::SeriesSummary summary =
        fedlog::summarize_rows(stem, result.rows);
    std::printf("wrote %s and %s\n", csv_path.c_str(), json_path.c_str());
    std::printf("final round %zu: mean test accuracy %.4f +/- %.4f over %zu "
                "seed(s)\n",
                summary.final_round, summary.mean, summary.std_error,
                summary.seeds.size());
    return 0;
}

int cmd_report(const std::string& in_dir) {
    std::vector<fs::path> csvs;
    for (const auto& entry : fs::directory_iterator(in_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") {
            csvs.push_back(entry.path());
        }
    }
    std::sort(csvs.begin(), csvs.end());
    if (csvs.empty()) {
        std::cerr << "no .csv files under " << in_dir << "\n";
        return 2;
    }

    std::vector<fedlog::SeriesSummary> series;
    for (const fs::path& p : csvs) {
        try {
            series.push_back(fedlog::summarize_rows(
                p.stem().string(), fedlog::parse_metrics(p)));
        } catch (const std::runtime_error& e) {
            std::cerr << "skipping " << p << ": " << e.what() << "\n";
        }
    }
    if (series.empty()) {
        std::cerr << "no readable metrics files under " << in_dir << "\n";
        return 2;
    }
    std::cout << fedlog::format_report(series);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"federated statistic-sharing benchmark"};
    app.set_version_flag("--version", FEDLOG_VERSION);
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run one experiment from a config");
    std::string config_path;
    std::string algorithm;
    long long rounds = -1;
    std::string seed_list;
    std::string out_dir = ".";
    run->add_option("--config", config_path, "key=value config file")
        ->required();
    run->add_option("--algorithm", algorithm,
                    "override: fedlog | fedavg | lgfedavg1");
    run->add_option("--rounds", rounds, "override: global rounds")
        ->check(CLI::NonNegativeNumber);
    run->add_option("--seed-list", seed_list,
                    "override: comma-separated seeds, one run each");
    run->add_option("--out", out_dir, "output directory (default .)");

    auto* report =
        app.add_subcommand("report", "summarize metrics CSVs in a directory");
    std::string in_dir;
    report->add_option("--in", in_dir, "directory holding metrics CSVs")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            return cmd_run(config_path, algorithm, rounds, seed_list, out_dir);
        }
        return cmd_report(in_dir);
    } catch (const fedlog::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
