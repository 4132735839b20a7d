#include "fedlog/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string_view>

#include <json.hpp>

#include "fedlog/errors.hpp"
#include "fedlog/rng.hpp"
#include "fedlog/version.hpp"

namespace fedlog {

namespace {

// Seed-derivation tags; one namespace per purpose so streams never collide.
constexpr std::uint64_t kTagTrainData = 1;
constexpr std::uint64_t kTagTestData = 2;
constexpr std::uint64_t kTagSubsample = 3;
constexpr std::uint64_t kTagPartition = 4;
constexpr std::uint64_t kTagTestPartition = 5;
constexpr std::uint64_t kTagBodyInit = 0x10;
constexpr std::uint64_t kTagHeadInit = 0x11;
constexpr std::uint64_t kTagClientRng = 0x20;
constexpr std::uint64_t kTagNoise = 0x40;

std::string trim(std::string_view s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string_view::npos) return {};
    const auto end = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(begin, end - begin + 1));
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double_field(std::string_view s, const std::string& what) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw InputError("cannot parse " + what + " from '" + std::string(s) +
                         "'");
    }
    return v;
}

std::uint64_t parse_u64_field(std::string_view s, const std::string& what) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw InputError("cannot parse " + what + " from '" + std::string(s) +
                         "'");
    }
    return v;
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (true) {
        const std::size_t next = s.find(sep, pos);
        if (next == std::string_view::npos) {
            parts.emplace_back(s.substr(pos));
            return parts;
        }
        parts.emplace_back(s.substr(pos, next - pos));
        pos = next + 1;
    }
}

}  // namespace

std::string to_string(Task task) {
    switch (task) {
        case Task::synthetic_circle: return "synthetic_circle";
        case Task::idx_images: return "idx_images";
    }
    return "?";
}

std::string to_string(Algorithm algorithm) {
    switch (algorithm) {
        case Algorithm::fedlog: return "fedlog";
        case Algorithm::fedavg: return "fedavg";
        case Algorithm::lgfedavg1: return "lgfedavg1";
    }
    return "?";
}

Task task_from_string(const std::string& name) {
    if (name == "synthetic_circle") return Task::synthetic_circle;
    if (name == "idx_images") return Task::idx_images;
    throw ConfigError("unknown task '" + name + "'");
}

Algorithm algorithm_from_string(const std::string& name) {
    if (name == "fedlog") return Algorithm::fedlog;
    if (name == "fedavg") return Algorithm::fedavg;
    if (name == "lgfedavg1") return Algorithm::lgfedavg1;
    throw ConfigError("unknown algorithm '" + name + "'");
}

void validate_experiment_config(const ExperimentConfig& config) {
    std::vector<std::string> bad;
    if (config.batch_size == 0) bad.push_back("batch_size (positive)");
    if (!(config.learning_rate > 0.0)) bad.push_back("learning_rate (positive)");
    if (!(config.map_tol > 0.0)) bad.push_back("map_tol (positive)");
    if (config.map_max_iters == 0) bad.push_back("map_max_iters (positive)");
    if (config.n_clients == 0) bad.push_back("n_clients (positive)");
    if (config.classes_per_client == 0) {
        bad.push_back("classes_per_client (positive)");
    }
    if (config.m < 2) bad.push_back("m (>= 2, one slot is the constant feature)");
    if (config.hidden_dims_groups.empty()) {
        bad.push_back("hidden_dims (at least one group)");
    }
    for (const auto& dims : config.hidden_dims_groups) {
        if (std::any_of(dims.begin(), dims.end(),
                        [](std::size_t d) { return d == 0; })) {
            bad.push_back("hidden_dims (widths must be positive)");
            break;
        }
    }
    if (config.clamp_bound < 0.0) bad.push_back("clamp_bound (nonnegative)");
    if (config.privacy) {
        const PrivacyParams& p = *config.privacy;
        if (!(p.epsilon > 0.0)) bad.push_back("privacy_epsilon (positive)");
        if (!(p.delta > 0.0 && p.delta < 1.0)) {
            bad.push_back("privacy_delta (in (0,1))");
        }
        if (!(p.clip_bound > 0.0)) bad.push_back("privacy_clip_bound (positive)");
        if (config.clamp_bound != p.clip_bound) {
            bad.push_back(
                "clamp_bound (must equal privacy_clip_bound so the "
                "sensitivity bound holds)");
        }
        if (config.algorithm != Algorithm::fedlog) {
            bad.push_back("privacy_epsilon (noise applies to fedlog only)");
        }
    }
    if (config.wire_float_bits != 32 && config.wire_float_bits != 64) {
        bad.push_back("wire_float_bits (32 or 64)");
    }
    if (config.seeds.empty()) bad.push_back("seeds (at least one)");
    {
        std::vector<std::uint64_t> sorted = config.seeds;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            bad.push_back("seeds (duplicates)");
        }
    }
    if (config.prior_nu < 1.0) bad.push_back("prior_nu (>= 1)");
    if (config.task == Task::synthetic_circle) {
        if (config.n_clients != 2) {
            bad.push_back("n_clients (synthetic task splits between exactly 2)");
        }
        if (config.train_points == 0 || config.train_points % 2 != 0) {
            bad.push_back("train_points (positive and even)");
        }
        if (config.test_points == 0 || config.test_points % 2 != 0) {
            bad.push_back("test_points (positive and even)");
        }
    } else {
        if (config.train_images.empty()) bad.push_back("train_images (path)");
        if (config.train_labels.empty()) bad.push_back("train_labels (path)");
        if (config.test_images.empty()) bad.push_back("test_images (path)");
        if (config.test_labels.empty()) bad.push_back("test_labels (path)");
        if (!(config.subsample_fraction > 0.0 &&
              config.subsample_fraction <= 1.0)) {
            bad.push_back("subsample_fraction (in (0,1])");
        }
    }
    if (config.algorithm == Algorithm::fedavg &&
        config.hidden_dims_groups.size() != 1) {
        bad.push_back("hidden_dims (fedavg needs one shared architecture)");
    }
    if (!bad.empty()) {
        std::string msg = "invalid config:";
        for (const std::string& b : bad) msg += "\n  " + b;
        throw ConfigError(msg);
    }
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());

    ExperimentConfig config;
    std::vector<std::string> errors;
    std::optional<double> priv_epsilon, priv_delta, priv_clip;

    auto parse_size = [&](const std::string& value, const std::string& key,
                          std::size_t& out) {
        try {
            out = static_cast<std::size_t>(parse_u64_field(value, key));
        } catch (const InputError& e) {
            errors.push_back(e.what());
        }
    };
    auto parse_real = [&](const std::string& value, const std::string& key,
                          double& out) {
        try {
            out = parse_double_field(value, key);
        } catch (const InputError& e) {
            errors.push_back(e.what());
        }
    };

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            errors.push_back("line " + std::to_string(line_no) +
                             ": expected key = value");
            continue;
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty() || value.empty()) {
            errors.push_back("line " + std::to_string(line_no) +
                             ": empty key or value");
            continue;
        }

        try {
            if (key == "task") {
                config.task = task_from_string(value);
            } else if (key == "algorithm") {
                config.algorithm = algorithm_from_string(value);
            } else if (key == "rounds") {
                parse_size(value, key, config.rounds);
            } else if (key == "local_epochs") {
                parse_size(value, key, config.local_epochs);
            } else if (key == "batch_size") {
                parse_size(value, key, config.batch_size);
            } else if (key == "learning_rate") {
                parse_real(value, key, config.learning_rate);
            } else if (key == "optimizer") {
                if (value == "sgd") {
                    config.optimizer = OptimizerKind::sgd;
                } else if (value == "adam") {
                    config.optimizer = OptimizerKind::adam;
                } else {
                    errors.push_back("optimizer must be sgd or adam, got '" +
                                     value + "'");
                }
            } else if (key == "map_tol") {
                parse_real(value, key, config.map_tol);
            } else if (key == "map_max_iters") {
                parse_size(value, key, config.map_max_iters);
            } else if (key == "n_clients") {
                parse_size(value, key, config.n_clients);
            } else if (key == "classes_per_client") {
                parse_size(value, key, config.classes_per_client);
            } else if (key == "m") {
                parse_size(value, key, config.m);
            } else if (key == "hidden_dims") {
                config.hidden_dims_groups.clear();
                for (const std::string& group : split(value, ';')) {
                    std::vector<std::size_t> dims;
                    for (const std::string& d : split(group, ',')) {
                        dims.push_back(static_cast<std::size_t>(
                            parse_u64_field(trim(d), "hidden_dims")));
                    }
                    config.hidden_dims_groups.push_back(std::move(dims));
                }
            } else if (key == "clamp_bound") {
                parse_real(value, key, config.clamp_bound);
            } else if (key == "privacy_epsilon") {
                priv_epsilon = parse_double_field(value, key);
            } else if (key == "privacy_delta") {
                priv_delta = parse_double_field(value, key);
            } else if (key == "privacy_clip_bound") {
                priv_clip = parse_double_field(value, key);
            } else if (key == "noise_scope") {
                if (value == "per_message") {
                    config.noise_scope = NoiseScope::per_message;
                } else if (value == "global") {
                    config.noise_scope = NoiseScope::global;
                } else {
                    errors.push_back(
                        "noise_scope must be per_message or global, got '" +
                        value + "'");
                }
            } else if (key == "wire_float_bits") {
                std::size_t bits = 0;
                parse_size(value, key, bits);
                config.wire_float_bits = static_cast<int>(bits);
            } else if (key == "seeds") {
                config.seeds.clear();
                for (const std::string& s : split(value, ',')) {
                    config.seeds.push_back(parse_u64_field(trim(s), "seeds"));
                }
            } else if (key == "parallel_clients") {
                if (value == "true") {
                    config.parallel_clients = true;
                } else if (value == "false") {
                    config.parallel_clients = false;
                } else {
                    errors.push_back(
                        "parallel_clients must be true or false, got '" +
                        value + "'");
                }
            } else if (key == "prior_nu") {
                parse_real(value, key, config.prior_nu);
            } else if (key == "train_points") {
                parse_size(value, key, config.train_points);
            } else if (key == "test_points") {
                parse_size(value, key, config.test_points);
            } else if (key == "train_images") {
                config.train_images = value;
            } else if (key == "train_labels") {
                config.train_labels = value;
            } else if (key == "test_images") {
                config.test_images = value;
            } else if (key == "test_labels") {
                config.test_labels = value;
            } else if (key == "subsample_fraction") {
                parse_real(value, key, config.subsample_fraction);
            } else {
                errors.push_back("line " + std::to_string(line_no) +
                                 ": unknown key '" + key + "'");
            }
        } catch (const std::runtime_error& e) {
            errors.push_back(e.what());
        }
    }

    if (priv_epsilon) {
        PrivacyParams p;
        p.epsilon = *priv_epsilon;
        if (priv_delta) p.delta = *priv_delta;
        if (priv_clip) p.clip_bound = *priv_clip;
        config.privacy = p;
    } else if (priv_delta || priv_clip) {
        errors.push_back(
            "privacy_delta/privacy_clip_bound need privacy_epsilon to enable "
            "privacy");
    }

    if (!errors.empty()) {
        std::string msg = "config file " + path.string() + ":";
        for (const std::string& e : errors) msg += "\n  " + e;
        throw ConfigError(msg);
    }
    return config;
}

ExperimentSetup make_setup(const ExperimentConfig& config, std::uint64_t seed) {
    validate_experiment_config(config);

    std::vector<LabeledDataset> train_parts;
    std::vector<LabeledDataset> test_parts;
    std::size_t input_dim = 0;
    std::size_t n_class = 0;

    if (config.task == Task::synthetic_circle) {
        const LabeledDataset train =
            gen_circle(config.train_points, derive_seed(seed, kTagTrainData));
        const LabeledDataset test =
            gen_circle(config.test_points, derive_seed(seed, kTagTestData));
        auto [train0, train1] = split_by_sorted_x1(train);
        auto [test0, test1] = split_by_sorted_x1(test);
        train_parts = {std::move(train0), std::move(train1)};
        test_parts = {std::move(test0), std::move(test1)};
        input_dim = 2;
        n_class = 2;
    } else {
        LabeledDataset train =
            load_idx_dataset(config.train_images, config.train_labels);
        const LabeledDataset test = load_idx_dataset(
            config.test_images, config.test_labels, train.n_class);
        if (config.subsample_fraction < 1.0) {
            train = stratified_subsample(train, config.subsample_fraction,
                                         derive_seed(seed, kTagSubsample));
        }
        PartitionSpec spec;
        spec.n_clients = config.n_clients;
        spec.classes_per_client = config.classes_per_client;
        spec.seed = derive_seed(seed, kTagPartition);
        train_parts = shard_partition(train, spec);
        test_parts = partition_test_like(test, train_parts,
                                         derive_seed(seed, kTagTestPartition));
        input_dim = train.inputs.front().size();
        n_class = train.n_class;
    }

    TrainConfig tc;
    tc.learning_rate = config.learning_rate;
    tc.batch_size = config.batch_size;
    tc.local_epochs = config.local_epochs;
    tc.optimizer = config.optimizer;

    ExperimentSetup setup;
    setup.n_class = n_class;
    setup.server = make_server(config.m, n_class, config.prior_nu);

    // Every algorithm starts from the same seeded random head: a zero head
    // would stall body training (the feature gradient is a combination of
    // head blocks), and fairness requires one shared initialization.
    HeadParams head0(config.m, n_class);
    {
        Rng head_rng(derive_seed(seed, kTagHeadInit));
        const double bound = 1.0 / std::sqrt(static_cast<double>(config.m));
        for (double& v : head0.eta) v = head_rng.uniform(-bound, bound);
    }
    setup.server.head = head0;
    setup.lg_server.head = head0;

    const std::size_t groups = config.hidden_dims_groups.size();
    setup.clients.reserve(config.n_clients);
    for (std::size_t c = 0; c < config.n_clients; ++c) {
        ClientState client;
        client.id = static_cast<std::uint32_t>(c);
        client.body = make_dense_body(input_dim,
                                      config.hidden_dims_groups[c % groups],
                                      config.m - 1,
                                      derive_seed(seed, kTagBodyInit, c),
                                      config.clamp_bound);
        client.train_data = std::move(train_parts[c]);
        client.test_data = std::move(test_parts[c]);
        client.config = tc;
        client.local_head = head0;
        client.rng = Rng(derive_seed(seed, kTagClientRng, c));
        setup.clients.push_back(std::move(client));
    }

    if (config.algorithm == Algorithm::fedavg) {
        // One shared architecture; clients start from the global model, so
        // round-0 evaluation reflects it too.
        setup.fedavg_server.body =
            make_dense_body(input_dim, config.hidden_dims_groups[0],
                            config.m - 1, derive_seed(seed, kTagBodyInit, 0),
                            config.clamp_bound);
        setup.fedavg_server.head = head0;
        for (ClientState& client : setup.clients) {
            client.body = setup.fedavg_server.body;
        }
    }
    return setup;
}

std::size_t message_size_bits(std::size_t m, std::size_t n_class,
                              std::size_t float_bits) {
    return m * n_class * float_bits;
}

namespace {

struct RoundBits {
    std::size_t uplink = 0;
    std::size_t downlink = 0;
};

// Constant per-round transfer sizes, reported on the round-0 row.
RoundBits probe_round_bits(const ExperimentConfig& config,
                           const ExperimentSetup& setup) {
    RoundBits bits;
    if (config.algorithm == Algorithm::fedavg) {
        const std::size_t n_params =
            param_count(setup.fedavg_server.body) + config.m * setup.n_class;
        const std::size_t bytes =
            kMessageHeaderBytes +
            n_params * static_cast<std::size_t>(config.wire_float_bits) / 8;
        bits.uplink = bits.downlink = bytes * 8;
        return bits;
    }
    RoundMessage probe;
    probe.stat_sum = SufficientStatistic(config.m, setup.n_class);
    const std::size_t bytes =
        serialize_message(probe, config.wire_float_bits).size();
    bits.uplink = bits.downlink = bytes * 8;
    return bits;
}

MetricsRow make_row(const ExperimentConfig& config, std::uint64_t seed,
                    std::size_t round, const EvalResult& eval) {
    MetricsRow row;
    row.seed = seed;
    row.round = round;
    row.algorithm = config.algorithm;
    row.mean_test_accuracy = eval.mean;
    double sum = 0.0, mn = 1.0, mx = 0.0;
    std::size_t present = 0;
    for (const auto& acc : eval.per_client) {
        if (!acc) continue;
        ++present;
        sum += *acc;
        mn = std::min(mn, *acc);
        mx = std::max(mx, *acc);
    }
    if (present > 0) {
        row.client_acc_mean = sum / static_cast<double>(present);
        row.client_acc_min = mn;
        row.client_acc_max = mx;
    }
    return row;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
    validate_experiment_config(config);

    ExperimentResult result;
    for (const std::uint64_t seed : config.seeds) {
        ExperimentSetup setup = make_setup(config, seed);

        RoundOptions options;
        options.wire_float_width = config.wire_float_bits;
        options.parallel = config.parallel_clients;
        options.privacy = config.privacy;
        options.noise_scope = config.noise_scope;
        options.noise_seed = derive_seed(seed, kTagNoise);
        options.map_tol = config.map_tol;
        options.map_max_iters = config.map_max_iters;

        const RoundBits probe = probe_round_bits(config, setup);
        const auto current_head = [&]() -> const HeadParams& {
            switch (config.algorithm) {
                case Algorithm::fedavg: return setup.fedavg_server.head;
                case Algorithm::lgfedavg1: return setup.lg_server.head;
                case Algorithm::fedlog: break;
            }
            return setup.server.head;
        };

        {
            MetricsRow row = make_row(config, seed, 0,
                                      evaluate(setup.clients, current_head()));
            row.uplink_bits_per_client = probe.uplink;
            row.downlink_bits_per_client = probe.downlink;
            result.rows.push_back(row);
            result.wall_ms.push_back(0.0);
        }

        for (std::size_t r = 1; r <= config.rounds; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            RoundResult rr;
            switch (config.algorithm) {
                case Algorithm::fedlog:
                    rr = fedlog_round(setup.server, setup.clients, options);
                    break;
                case Algorithm::fedavg:
                    rr = fedavg_round(setup.fedavg_server, setup.clients,
                                      options);
                    break;
                case Algorithm::lgfedavg1:
                    rr = lgfedavg_round(setup.lg_server, setup.clients,
                                        options);
                    break;
            }
            const auto t1 = std::chrono::steady_clock::now();

            MetricsRow row = make_row(config, seed, r,
                                      evaluate(setup.clients, current_head()));
            row.uplink_bits_per_client =
                rr.uplink_bytes * 8 / setup.clients.size();
            row.downlink_bits_per_client =
                rr.downlink_bytes * 8 / setup.clients.size();
            row.map_iterations = rr.map_iterations;
            result.rows.push_back(row);
            result.wall_ms.push_back(
                std::chrono::duration<double, std::milli>(t1 - t0).count());
        }
    }
    return result;
}

WilcoxonResult wilcoxon_one_tailed(std::span<const double> a,
                                   std::span<const double> b) {
    if (a.size() != b.size()) {
        throw InputError("paired samples differ in length");
    }
    if (a.size() < 5) {
        throw InputError("need at least 5 pairs, got " +
                         std::to_string(a.size()));
    }
    std::vector<double> diffs;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d != 0.0) diffs.push_back(d);
    }

    WilcoxonResult res;
    res.n_effective = diffs.size();
    if (diffs.empty()) {
        res.degenerate = true;
        res.p_value = 1.0;
        return res;
    }

    const std::size_t n = diffs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) {
                         return std::abs(diffs[x]) < std::abs(diffs[y]);
                     });

    // Doubled midranks stay integral: a run over sorted positions [i, j)
    // carries ranks i+1..j whose doubled average is i+j+1.
    std::vector<std::uint64_t> rank2(n);
    double tie_term = 0.0;  // sum of t^3 - t over tie groups
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && std::abs(diffs[order[j]]) == std::abs(diffs[order[i]])) {
            ++j;
        }
        for (std::size_t k = i; k < j; ++k) rank2[order[k]] = i + j + 1;
        const double t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        i = j;
    }

    std::uint64_t w2 = 0;
    std::uint64_t total2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        total2 += rank2[i];
        if (diffs[i] > 0.0) w2 += rank2[i];
    }
    res.statistic = static_cast<double>(w2) / 2.0;

    if (n <= 20) {
        res.exact = true;
        // Distribution of the doubled statistic over all 2^n sign patterns.
        std::vector<std::uint64_t> dist(total2 + 1, 0);
        dist[0] = 1;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t s = total2 + 1; s-- > rank2[i];) {
                dist[s] += dist[s - rank2[i]];
            }
        }
        std::uint64_t at_least = 0;
        for (std::size_t s = w2; s <= total2; ++s) at_least += dist[s];
        res.p_value = static_cast<double>(at_least) /
                      static_cast<double>(std::uint64_t{1} << n);
        return res;
    }

    const double dn = static_cast<double>(n);
    const double mean = dn * (dn + 1.0) / 4.0;
    const double var =
        dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0 - tie_term / 48.0;
    const double w = static_cast<double>(w2) / 2.0;
    const double z = (w - mean - 0.5) / std::sqrt(var);
    res.p_value = 0.5 * std::erfc(z / std::sqrt(2.0));
    return res;
}

namespace {

constexpr std::string_view kCsvHeader =
    "seed,round,algorithm,mean_test_accuracy,client_acc_mean,client_acc_min,"
    "client_acc_max,uplink_bits_per_client,downlink_bits_per_client,"
    "map_iterations";

}  // namespace

void write_metrics(const std::vector<MetricsRow>& rows,
                   const std::filesystem::path& csv_path) {
    std::ofstream out(csv_path, std::ios::trunc);
    if (!out) {
        throw InputError("cannot open " + csv_path.string() + " for writing");
    }
    out << kCsvHeader << '\n';
    for (const MetricsRow& r : rows) {
        out << r.seed << ',' << r.round << ',' << to_string(r.algorithm) << ','
            << format_double(r.mean_test_accuracy) << ','
            << format_double(r.client_acc_mean) << ','
            << format_double(r.client_acc_min) << ','
            << format_double(r.client_acc_max) << ','
            << r.uplink_bits_per_client << ',' << r.downlink_bits_per_client
            << ',' << r.map_iterations << '\n';
    }
    if (!out.flush()) {
        throw InputError("write failed for " + csv_path.string());
    }
}

std::vector<MetricsRow> parse_metrics(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw InputError("cannot open " + csv_path.string());
    std::string line;
    if (!std::getline(in, line) || trim(line) != kCsvHeader) {
        throw InputError(csv_path.string() + ": unexpected metrics header");
    }
    std::vector<MetricsRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::vector<std::string> fields = split(line, ',');
        if (fields.size() != 10) {
            throw InputError(csv_path.string() + " line " +
                             std::to_string(line_no) + ": expected 10 fields");
        }
        MetricsRow r;
        r.seed = parse_u64_field(fields[0], "seed");
        r.round = static_cast<std::size_t>(parse_u64_field(fields[1], "round"));
        r.algorithm = algorithm_from_string(fields[2]);
        r.mean_test_accuracy =
            parse_double_field(fields[3], "mean_test_accuracy");
        r.client_acc_mean = parse_double_field(fields[4], "client_acc_mean");
        r.client_acc_min = parse_double_field(fields[5], "client_acc_min");
        r.client_acc_max = parse_double_field(fields[6], "client_acc_max");
        r.uplink_bits_per_client = static_cast<std::size_t>(
            parse_u64_field(fields[7], "uplink_bits_per_client"));
        r.downlink_bits_per_client = static_cast<std::size_t>(
            parse_u64_field(fields[8], "downlink_bits_per_client"));
        r.map_iterations = static_cast<std::size_t>(
            parse_u64_field(fields[9], "map_iterations"));
        rows.push_back(r);
    }
    return rows;
}

void write_sidecar(const ExperimentConfig& config,
                   const ExperimentResult& result,
                   const std::filesystem::path& json_path) {
    nlohmann::json j;
    j["version"] = FEDLOG_VERSION;

    nlohmann::json c;
    c["task"] = to_string(config.task);
    c["algorithm"] = to_string(config.algorithm);
    c["rounds"] = config.rounds;
    c["local_epochs"] = config.local_epochs;
    c["batch_size"] = config.batch_size;
    c["learning_rate"] = config.learning_rate;
    c["optimizer"] =
        config.optimizer == OptimizerKind::adam ? "adam" : "sgd";
    c["map_tol"] = config.map_tol;
    c["map_max_iters"] = config.map_max_iters;
    c["n_clients"] = config.n_clients;
    c["classes_per_client"] = config.classes_per_client;
    c["m"] = config.m;
    c["hidden_dims"] = config.hidden_dims_groups;
    c["clamp_bound"] = config.clamp_bound;
    c["wire_float_bits"] = config.wire_float_bits;
    c["seeds"] = config.seeds;
    c["parallel_clients"] = config.parallel_clients;
    c["prior_nu"] = config.prior_nu;
    if (config.task == Task::synthetic_circle) {
        c["train_points"] = config.train_points;
        c["test_points"] = config.test_points;
    } else {
        c["train_images"] = config.train_images.string();
        c["train_labels"] = config.train_labels.string();
        c["test_images"] = config.test_images.string();
        c["test_labels"] = config.test_labels.string();
        c["subsample_fraction"] = config.subsample_fraction;
    }
    if (config.privacy) {
        nlohmann::json p;
        p["epsilon"] = config.privacy->epsilon;
        p["delta"] = config.privacy->delta;
        p["clip_bound"] = config.privacy->clip_bound;
        p["noise_scope"] = config.noise_scope == NoiseScope::global
                               ? "global"
                               : "per_message";
        p["note"] =
            "(epsilon, delta) holds per uploaded message; no composition "
            "accounting across rounds";
        c["privacy"] = p;
    } else {
        c["privacy"] = nullptr;
    }
    j["config"] = c;
    j["wall_ms"] = result.wall_ms;

    std::ofstream out(json_path, std::ios::trunc);
    if (!out) {
        throw InputError("cannot open " + json_path.string() + " for writing");
    }
    out << j.dump(2) << '\n';
    if (!out.flush()) {
        throw InputError("write failed for " + json_path.string());
    }
}

SeriesSummary summarize_rows(const std::string& name,
                             const std::vector<MetricsRow>& rows) {
    if (rows.empty()) throw InputError(name + ": no metrics rows");
    SeriesSummary s;
    s.name = name;
    s.algorithm = rows.front().algorithm;
    for (const MetricsRow& r : rows) {
        if (r.algorithm != s.algorithm) {
            throw InputError(name + ": mixes algorithms in one series");
        }
        s.final_round = std::max(s.final_round, r.round);
    }
    for (const MetricsRow& r : rows) {
        if (r.round != s.final_round) continue;
        s.seeds.push_back(r.seed);
        s.final_accuracy.push_back(r.mean_test_accuracy);
    }
    // Keep seed order stable for pairing across series.
    std::vector<std::size_t> order(s.seeds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return s.seeds[x] < s.seeds[y];
    });
    std::vector<std::uint64_t> seeds;
    std::vector<double> acc;
    for (std::size_t i : order) {
        seeds.push_back(s.seeds[i]);
        acc.push_back(s.final_accuracy[i]);
    }
    s.seeds = std::move(seeds);
    s.final_accuracy = std::move(acc);

    const double n = static_cast<double>(s.final_accuracy.size());
    for (double v : s.final_accuracy) s.mean += v;
    s.mean /= n;
    if (s.final_accuracy.size() > 1) {
        double ss = 0.0;
        for (double v : s.final_accuracy) ss += (v - s.mean) * (v - s.mean);
        s.std_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
    return s;
}

std::string format_report(const std::vector<SeriesSummary>& series) {
    std::ostringstream out;
    out << "series summaries (final round, mean test accuracy over seeds)\n";
    for (const SeriesSummary& s : series) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "  %-28s %-10s round %-4zu seeds %-3zu acc %.4f +/- %.4f\n",
                      s.name.c_str(), to_string(s.algorithm).c_str(),
                      s.final_round, s.seeds.size(), s.mean, s.std_error);
        out << buf;
    }
    if (series.size() < 2) return out.str();

    out << "\npairwise one-tailed Wilcoxon signed-rank (alternative: row > "
           "column), final-round accuracy\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        for (std::size_t j = 0; j < series.size(); ++j) {
            if (i == j) continue;
            const SeriesSummary& a = series[i];
            const SeriesSummary& b = series[j];
            out << "  " << a.name << " > " << b.name << ": ";
            if (a.seeds != b.seeds) {
                out << "skipped (seed sets differ)\n";
                continue;
            }
            try {
                const WilcoxonResult w =
                    wilcoxon_one_tailed(a.final_accuracy, b.final_accuracy);
                char buf[96];
                std::snprintf(buf, sizeof buf, "p = %.6g%s%s", w.p_value,
                              w.degenerate ? " (degenerate: all ties)" : "",
                              !w.degenerate && w.p_value < 0.01 ? "  **" : "");
                out << buf << '\n';
            } catch (const InputError& e) {
                out << "skipped (" << e.what() << ")\n";
            }
        }
    }
    return out.str();
}

}  // namespace fedlog
