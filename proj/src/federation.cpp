#include "fedlog/federation.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <string>
#include <utility>

#include "fedlog/errors.hpp"

namespace fedlog {

namespace {

constexpr std::uint32_t kBroadcastId = 0xffffffffu;
// Noise-stream tag for server-side (global-scope) noise; outside the u32
// client-id range so it can never collide with a per-client stream.
constexpr std::uint64_t kServerNoiseTag = 1ULL << 32;

template <typename F>
auto map_clients(std::vector<ClientState>& clients, bool parallel, F fn)
    -> std::vector<decltype(fn(clients[0]))> {
    using R = decltype(fn(clients[0]));
    std::vector<R> out;
    out.reserve(clients.size());
    if (!parallel) {
        for (ClientState& c : clients) out.push_back(fn(c));
        return out;
    }
    std::vector<std::future<R>> futures;
    futures.reserve(clients.size());
    for (ClientState& c : clients) {
        futures.push_back(std::async(std::launch::async,
                                     [&fn, &c]() { return fn(c); }));
    }
    for (auto& f : futures) out.push_back(f.get());
    return out;
}

RoundMessage head_as_message(const HeadParams& head) {
    RoundMessage msg;
    msg.client_id = kBroadcastId;
    msg.count = 0;
    msg.stat_sum.m = head.m;
    msg.stat_sum.n_class = head.n_class;
    msg.stat_sum.values = head.eta;
    return msg;
}

HeadParams message_as_head(const RoundMessage& msg) {
    HeadParams head(msg.stat_sum.m, msg.stat_sum.n_class);
    head.eta = msg.stat_sum.values;
    return head;
}

void check_client_dims(const ClientState& client, std::size_t m,
                       std::size_t n_class) {
    if (client.body.feature_dim() != m) {
        throw ProtocolError("client " + std::to_string(client.id) +
                            " feature dim " +
                            std::to_string(client.body.feature_dim()) +
                            " does not match head m=" + std::to_string(m));
    }
    if (client.train_data.size() > 0 && client.train_data.n_class != n_class) {
        throw ProtocolError("client " + std::to_string(client.id) +
                            " trains over " +
                            std::to_string(client.train_data.n_class) +
                            " classes but the head has " +
                            std::to_string(n_class));
    }
}

// One pass over the shuffled data in batches, stepping the optimizer on the
// flat parameter view after each batch. `grads` must already be sized.
struct Batch {
    std::vector<std::vector<double>> inputs;
    std::vector<int> labels;
};

Batch gather_batch(const LabeledDataset& data,
                   const std::vector<std::size_t>& order, std::size_t begin,
                   std::size_t end) {
    Batch b;
    b.inputs.reserve(end - begin);
    b.labels.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        b.inputs.push_back(data.inputs[order[i]]);
        b.labels.push_back(data.labels[order[i]]);
    }
    return b;
}

}  // namespace

ServerState make_server(std::size_t m, std::size_t n_class, double prior_nu) {
    if (m == 0 || n_class == 0) {
        throw ConfigError("server dims must be positive");
    }
    if (prior_nu < 1.0) {
        throw ConfigError("prior nu must be at least 1");
    }
    ServerState server;
    server.head = HeadParams(m, n_class);
    server.prior = PriorParams(m * n_class, prior_nu);
    return server;
}

TrainStatus local_train(ClientState& client, const HeadParams& head) {
    validate_train_config(client.config);
    if (client.train_data.size() == 0) return TrainStatus::skipped_empty;
    validate_dataset(client.train_data);

    const std::size_t n = client.train_data.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> flat = flatten_params(client.body);

    for (std::size_t epoch = 0; epoch < client.config.local_epochs; ++epoch) {
        client.rng.shuffle(order);
        for (std::size_t begin = 0; begin < n;
             begin += client.config.batch_size) {
            const std::size_t end =
                std::min(n, begin + client.config.batch_size);
            const Batch batch =
                gather_batch(client.train_data, order, begin, end);
            const BodyGradient g =
                body_gradient(client.body, batch.inputs, batch.labels, head);
            std::vector<double> gflat = flatten_gradient(g);
            const double inv = 1.0 / static_cast<double>(end - begin);
            for (double& v : gflat) v *= inv;
            optimizer_step(flat, gflat, client.body_opt, client.config);
            unflatten_params(client.body, flat);
        }
    }
    return TrainStatus::ok;
}

TrainStatus joint_local_train(ClientState& client) {
    validate_train_config(client.config);
    if (client.train_data.size() == 0) return TrainStatus::skipped_empty;
    validate_dataset(client.train_data);
    if (client.local_head.m != client.body.feature_dim()) {
        throw ConfigError("client " + std::to_string(client.id) +
                          " local head does not match its body features");
    }

    const std::size_t n = client.train_data.size();
    const std::size_t nb = param_count(client.body);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<double> flat = flatten_params(client.body);
    flat.insert(flat.end(), client.local_head.eta.begin(),
                client.local_head.eta.end());

    for (std::size_t epoch = 0; epoch < client.config.local_epochs; ++epoch) {
        client.rng.shuffle(order);
        for (std::size_t begin = 0; begin < n;
             begin += client.config.batch_size) {
            const std::size_t end =
                std::min(n, begin + client.config.batch_size);
            const Batch batch =
                gather_batch(client.train_data, order, begin, end);
            const JointGradient g = joint_gradient(
                client.body, batch.inputs, batch.labels, client.local_head);
            std::vector<double> gflat = flatten_gradient(g.body);
            gflat.insert(gflat.end(), g.head_grad.begin(), g.head_grad.end());
            const double inv = 1.0 / static_cast<double>(end - begin);
            for (double& v : gflat) v *= inv;
            optimizer_step(flat, gflat, client.joint_opt, client.config);
            unflatten_params(client.body, std::span(flat).first(nb));
            std::copy(flat.begin() + static_cast<std::ptrdiff_t>(nb),
                      flat.end(), client.local_head.eta.begin());
        }
    }
    return TrainStatus::ok;
}

RoundMessage summarize(const ClientState& client) {
    if (client.train_data.n_class == 0) {
        throw InputError("client " + std::to_string(client.id) +
                         " has no class count set");
    }
    RoundMessage msg;
    msg.client_id = client.id;
    msg.count = static_cast<std::uint32_t>(client.train_data.size());
    msg.stat_sum = SufficientStatistic(client.body.feature_dim(),
                                       client.train_data.n_class);
    for (std::size_t i = 0; i < client.train_data.size(); ++i) {
        const std::vector<double> phi =
            forward_one(client.body, client.train_data.inputs[i]);
        accumulate_statistic(msg.stat_sum, phi, client.train_data.labels[i]);
    }
    return msg;
}

RoundMessage summarize(const ClientState& client, const PrivacyParams& privacy,
                       Rng& noise_rng) {
    RoundMessage msg = summarize(client);
    return privatize(msg, noise_sigma(privacy, msg.stat_sum.m), noise_rng);
}

RoundResult fedlog_round(ServerState& server, std::vector<ClientState>& clients,
                         const RoundOptions& options) {
    if (server.head.m == 0 || server.head.n_class == 0) {
        throw ConfigError("server head dims are unset");
    }
    if (server.prior.chi.size() != server.head.eta.size()) {
        throw ConfigError("server prior does not match head dims");
    }
    if (options.privacy) validate_privacy_params(*options.privacy);
    for (const ClientState& c : clients) {
        check_client_dims(c, server.head.m, server.head.n_class);
    }

    RoundResult result;

    const std::vector<std::uint8_t> bcast_bytes =
        serialize_message(head_as_message(server.head), options.wire_float_width);
    result.downlink_bytes = bcast_bytes.size() * clients.size();
    const HeadParams broadcast_head =
        message_as_head(deserialize_message(bcast_bytes));

    struct ClientOut {
        RoundMessage msg;
        std::size_t wire_bytes = 0;
        bool skipped = false;
    };
    const std::size_t round = server.round;
    const bool per_message_noise =
        options.privacy && options.noise_scope == NoiseScope::per_message;
    auto outputs = map_clients(clients, options.parallel,
                               [&](ClientState& c) -> ClientOut {
        ClientOut out;
        out.skipped =
            local_train(c, broadcast_head) == TrainStatus::skipped_empty;
        RoundMessage msg;
        if (per_message_noise) {
            Rng noise(derive_seed(options.noise_seed, round, c.id));
            msg = summarize(c, *options.privacy, noise);
        } else {
            msg = summarize(c);
        }
        const std::vector<std::uint8_t> wire =
            serialize_message(msg, options.wire_float_width);
        out.wire_bytes = wire.size();
        out.msg = deserialize_message(wire);
        return out;
    });

    std::vector<RoundMessage> messages;
    messages.reserve(outputs.size());
    for (ClientOut& out : outputs) {
        result.uplink_bytes += out.wire_bytes;
        result.skipped_clients += out.skipped ? 1 : 0;
        messages.push_back(std::move(out.msg));
    }
    std::sort(messages.begin(), messages.end(),
              [](const RoundMessage& a, const RoundMessage& b) {
                  return a.client_id < b.client_id;
              });

    SufficientStatistic agg(server.head.m, server.head.n_class);
    std::size_t total = 0;
    for (const RoundMessage& msg : messages) {
        if (msg.stat_sum.values.size() != agg.values.size()) {
            throw ProtocolError("client " + std::to_string(msg.client_id) +
                                " sent a statistic of wrong length");
        }
        for (std::size_t i = 0; i < agg.values.size(); ++i) {
            agg.values[i] += msg.stat_sum.values[i];
        }
        total += msg.count;
    }
    if (options.privacy && options.noise_scope == NoiseScope::global) {
        Rng noise(derive_seed(options.noise_seed, round, kServerNoiseTag));
        const double sigma = noise_sigma(*options.privacy, server.head.m);
        for (double& v : agg.values) v += noise.gaussian(0.0, sigma);
    }

    const MapResult map =
        map_solve(server.prior, agg, total, server.head, options.map_tol,
                  options.map_max_iters);
    server.head = map.head;
    server.round += 1;
    result.map_converged = map.converged;
    result.map_iterations = map.iterations;
    return result;
}

std::vector<double> fedavg_aggregate(
    const std::vector<std::vector<double>>& models,
    const std::vector<std::size_t>& weights) {
    if (models.empty()) throw InputError("nothing to aggregate");
    if (weights.size() != models.size()) {
        throw ProtocolError("got " + std::to_string(weights.size()) +
                            " weights for " + std::to_string(models.size()) +
                            " models");
    }
    const std::size_t dim = models[0].size();
    std::size_t total = 0;
    for (std::size_t c = 0; c < models.size(); ++c) {
        if (models[c].size() != dim) {
            throw ProtocolError("model " + std::to_string(c) +
                                " has mismatched shape");
        }
        total += weights[c];
    }
    if (total == 0) throw InputError("all aggregation weights are zero");
    std::vector<double> avg(dim, 0.0);
    for (std::size_t c = 0; c < models.size(); ++c) {
        const double w = static_cast<double>(weights[c]);
        for (std::size_t i = 0; i < dim; ++i) avg[i] += w * models[c][i];
    }
    const double inv = 1.0 / static_cast<double>(total);
    for (double& v : avg) v *= inv;
    return avg;
}

RoundResult fedavg_round(FedAvgState& server, std::vector<ClientState>& clients,
                         const RoundOptions& options) {
    if (options.privacy) {
        throw ConfigError("privacy noise applies only to statistic uploads");
    }
    validate_body(server.body);
    if (server.head.m != server.body.feature_dim()) {
        throw ConfigError("global head does not match global body features");
    }
    for (const ClientState& c : clients) {
        if (c.body.layers.size() != server.body.layers.size()) {
            throw ProtocolError("client " + std::to_string(c.id) +
                                " architecture differs from the global model");
        }
        for (std::size_t l = 0; l < c.body.layers.size(); ++l) {
            if (c.body.layers[l].in_dim != server.body.layers[l].in_dim ||
                c.body.layers[l].out_dim != server.body.layers[l].out_dim) {
                throw ProtocolError("client " + std::to_string(c.id) +
                                    " architecture differs from the global "
                                    "model");
            }
        }
    }

    RoundResult result;

    std::vector<double> global = flatten_params(server.body);
    global.insert(global.end(), server.head.eta.begin(),
                  server.head.eta.end());
    std::vector<std::uint8_t> blob;
    append_values(blob, global, options.wire_float_width);
    result.downlink_bytes =
        (kMessageHeaderBytes + blob.size()) * clients.size();
    const std::vector<double> received =
        read_values(blob, 0, global.size(), options.wire_float_width);

    const std::size_t nb = param_count(server.body);
    struct ClientOut {
        std::vector<double> model;
        std::size_t weight = 0;
        std::size_t wire_bytes = 0;
        bool skipped = false;
    };
    auto outputs = map_clients(clients, options.parallel,
                               [&](ClientState& c) -> ClientOut {
        unflatten_params(c.body, std::span(received).first(nb));
        c.local_head = server.head;
        std::copy(received.begin() + static_cast<std::ptrdiff_t>(nb),
                  received.end(), c.local_head.eta.begin());
        ClientOut out;
        out.skipped = joint_local_train(c) == TrainStatus::skipped_empty;
        std::vector<double> upload = flatten_params(c.body);
        upload.insert(upload.end(), c.local_head.eta.begin(),
                      c.local_head.eta.end());
        std::vector<std::uint8_t> wire;
        append_values(wire, upload, options.wire_float_width);
        out.wire_bytes = kMessageHeaderBytes + wire.size();
        out.model =
            read_values(wire, 0, upload.size(), options.wire_float_width);
        out.weight = c.train_data.size();
        return out;
    });

    std::vector<std::vector<double>> models;
    std::vector<std::size_t> weights;
    std::size_t total = 0;
    for (ClientOut& out : outputs) {
        result.uplink_bytes += out.wire_bytes;
        result.skipped_clients += out.skipped ? 1 : 0;
        total += out.weight;
        models.push_back(std::move(out.model));
        weights.push_back(out.weight);
    }
    if (total > 0) {
        const std::vector<double> avg = fedavg_aggregate(models, weights);
        unflatten_params(server.body, std::span(avg).first(nb));
        std::copy(avg.begin() + static_cast<std::ptrdiff_t>(nb), avg.end(),
                  server.head.eta.begin());
        // Clients leave the round holding the new global model so that
        // evaluation between rounds sees it.
        for (ClientState& c : clients) {
            unflatten_params(c.body, std::span(avg).first(nb));
            std::copy(avg.begin() + static_cast<std::ptrdiff_t>(nb), avg.end(),
                      c.local_head.eta.begin());
        }
    }
    server.round += 1;
    return result;
}

RoundResult lgfedavg_round(LgFedAvgState& server,
                           std::vector<ClientState>& clients,
                           const RoundOptions& options) {
    if (options.privacy) {
        throw ConfigError("privacy noise applies only to statistic uploads");
    }
    if (server.head.m == 0 || server.head.n_class == 0) {
        throw ConfigError("global head dims are unset");
    }
    for (const ClientState& c : clients) {
        check_client_dims(c, server.head.m, server.head.n_class);
    }

    RoundResult result;

    const std::vector<std::uint8_t> bcast_bytes =
        serialize_message(head_as_message(server.head), options.wire_float_width);
    result.downlink_bytes = bcast_bytes.size() * clients.size();
    const HeadParams broadcast_head =
        message_as_head(deserialize_message(bcast_bytes));

    struct ClientOut {
        std::vector<double> head;
        std::size_t weight = 0;
        std::size_t wire_bytes = 0;
        bool skipped = false;
    };
    auto outputs = map_clients(clients, options.parallel,
                               [&](ClientState& c) -> ClientOut {
        c.local_head = broadcast_head;
        ClientOut out;
        out.skipped = joint_local_train(c) == TrainStatus::skipped_empty;
        RoundMessage msg;
        msg.client_id = c.id;
        msg.count = static_cast<std::uint32_t>(c.train_data.size());
        msg.stat_sum.m = c.local_head.m;
        msg.stat_sum.n_class = c.local_head.n_class;
        msg.stat_sum.values = c.local_head.eta;
        const std::vector<std::uint8_t> wire =
            serialize_message(msg, options.wire_float_width);
        out.wire_bytes = wire.size();
        const RoundMessage received = deserialize_message(wire);
        out.head = received.stat_sum.values;
        out.weight = received.count;
        return out;
    });

    std::vector<std::vector<double>> heads;
    std::vector<std::size_t> weights;
    std::size_t total = 0;
    for (ClientOut& out : outputs) {
        result.uplink_bytes += out.wire_bytes;
        result.skipped_clients += out.skipped ? 1 : 0;
        total += out.weight;
        heads.push_back(std::move(out.head));
        weights.push_back(out.weight);
    }
    if (total > 0) {
        server.head.eta = fedavg_aggregate(heads, weights);
    }
    server.round += 1;
    return result;
}

double accuracy(const BodyNetwork& body, const HeadParams& head,
                const LabeledDataset& data) {
    validate_dataset(data);
    if (data.size() == 0) throw InputError("accuracy over an empty dataset");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const std::vector<double> phi = forward_one(body, data.inputs[i]);
        if (classify(head, phi) == data.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

EvalResult evaluate(const std::vector<ClientState>& clients,
                    const HeadParams& head) {
    EvalResult result;
    result.per_client.reserve(clients.size());
    double weighted = 0.0;
    for (const ClientState& c : clients) {
        if (c.test_data.size() == 0) {
            result.per_client.push_back(std::nullopt);
            continue;
        }
        const double acc = accuracy(c.body, head, c.test_data);
        result.per_client.push_back(acc);
        weighted += acc * static_cast<double>(c.test_data.size());
        result.total_points += c.test_data.size();
    }
    result.mean = result.total_points > 0
                      ? weighted / static_cast<double>(result.total_points)
                      : std::nan("");
    return result;
}

}  // namespace fedlog
