#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedlog/federation.hpp"

namespace fedlog {

enum class Task { synthetic_circle, idx_images };
enum class Algorithm { fedlog, fedavg, lgfedavg1 };

std::string to_string(Task task);
std::string to_string(Algorithm algorithm);
Task task_from_string(const std::string& name);
Algorithm algorithm_from_string(const std::string& name);

/// Everything one experiment needs. Loadable from a flat key=value file
/// (see parse_config_file) with CLI flags taking precedence.
struct ExperimentConfig {
    Task task = Task::synthetic_circle;
    Algorithm algorithm = Algorithm::fedlog;
    std::size_t rounds = 1;
    std::size_t local_epochs = 1;
    std::size_t batch_size = 10;
    double learning_rate = 0.01;
    OptimizerKind optimizer = OptimizerKind::sgd;
    double map_tol = 1e-6;
    std::size_t map_max_iters = 10000;
    std::size_t n_clients = 2;
    std::size_t classes_per_client = 2;
    /// Feature dimension including the constant slot; bodies emit m-1 values.
    std::size_t m = 3;
    /// Hidden-layer widths per client group; client c uses group
    /// c mod group count, so heterogeneous-architecture runs list several.
    std::vector<std::vector<std::size_t>> hidden_dims_groups = {{8}};
    /// Positive bound swaps the output activation to a clamp (required when
    /// privacy is on, where it must equal the privacy clip bound).
    double clamp_bound = 0.0;
    std::optional<PrivacyParams> privacy;
    NoiseScope noise_scope = NoiseScope::per_message;
    int wire_float_bits = 64;
    std::vector<std::uint64_t> seeds = {1};
    bool parallel_clients = false;
    double prior_nu = 1.0;

    // synthetic_circle task
    std::size_t train_points = 80;
    std::size_t test_points = 800;

    // idx_images task
    std::filesystem::path train_images;
    std::filesystem::path train_labels;
    std::filesystem::path test_images;
    std::filesystem::path test_labels;
    double subsample_fraction = 1.0;
};

/// Throws ConfigError whose message lists every violated field at once.
void validate_experiment_config(const ExperimentConfig& config);

/// Flat key=value text, one pair per line, '#' starts a comment. Unknown
/// keys and unparseable values are collected into one ConfigError.
ExperimentConfig parse_config_file(const std::filesystem::path& path);

/// One evaluation record. round 0 is the untrained state; its bit counts
/// report the constant per-round transfer size of the configured algorithm.
struct MetricsRow {
    std::uint64_t seed = 0;
    std::size_t round = 0;
    Algorithm algorithm = Algorithm::fedlog;
    double mean_test_accuracy = 0.0;  // weighted by client test counts
    double client_acc_mean = 0.0;     // unweighted over clients with test data
    double client_acc_min = 0.0;
    double client_acc_max = 0.0;
    std::size_t uplink_bits_per_client = 0;
    std::size_t downlink_bits_per_client = 0;
    std::size_t map_iterations = 0;

    bool operator==(const MetricsRow&) const = default;
};

/// The per-client training/test state for one seed, plus the matching
/// server objects. Exposed so tests can drive rounds directly against the
/// exact data the runner uses.
struct ExperimentSetup {
    std::vector<ClientState> clients;
    ServerState server;          // fedlog
    FedAvgState fedavg_server;   // fedavg only (empty otherwise)
    LgFedAvgState lg_server;     // lgfedavg1
    std::size_t n_class = 0;
};

ExperimentSetup make_setup(const ExperimentConfig& config, std::uint64_t seed);

struct ExperimentResult {
    std::vector<MetricsRow> rows;
    /// Wall time of each round block, aligned with rows (0 for round 0).
    std::vector<double> wall_ms;
};

/// Runs every seed in order: build data, run `rounds` global rounds,
/// evaluate after each (round 0 included).
ExperimentResult run_experiment(const ExperimentConfig& config);

/// m * n_class * float_bits, the per-message payload size in bits.
std::size_t message_size_bits(std::size_t m, std::size_t n_class,
                              std::size_t float_bits);

/// One-tailed Wilcoxon signed-rank test of "a > b" on paired samples.
/// Zero differences are dropped; ties get midranks. Exact enumeration of
/// sign patterns up to 20 effective pairs, normal approximation with
/// continuity and tie corrections above. All-zero differences are flagged
/// degenerate with p = 1.
struct WilcoxonResult {
    double p_value = 1.0;
    double statistic = 0.0;  // W+, sum of positive-difference ranks
    std::size_t n_effective = 0;
    bool degenerate = false;
    bool exact = false;
};

WilcoxonResult wilcoxon_one_tailed(std::span<const double> a,
                                   std::span<const double> b);

/// CSV with a fixed header, one row per (seed, round). Number formatting is
/// shortest-round-trip, so equal rows give byte-identical files.
void write_metrics(const std::vector<MetricsRow>& rows,
                   const std::filesystem::path& csv_path);
std::vector<MetricsRow> parse_metrics(const std::filesystem::path& csv_path);

/// JSON sidecar next to the CSV: resolved config, library version, and the
/// wall-time array (kept out of the CSV so reruns are byte-identical).
void write_sidecar(const ExperimentConfig& config,
                   const ExperimentResult& result,
                   const std::filesystem::path& json_path);

/// Per-algorithm final-round summary of one metrics file.
struct SeriesSummary {
    std::string name;
    Algorithm algorithm = Algorithm::fedlog;
    std::size_t final_round = 0;
    std::vector<std::uint64_t> seeds;
    std::vector<double> final_accuracy;  // aligned with seeds
    double mean = 0.0;
    double std_error = 0.0;
};

SeriesSummary summarize_rows(const std::string& name,
                             const std::vector<MetricsRow>& rows);

/// Text report: mean +/- standard error per series and pairwise one-tailed
/// Wilcoxon p-values over seed-matched final accuracies (p < 0.01 flagged).
std::string format_report(const std::vector<SeriesSummary>& series);

}  // namespace fedlog
