#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fedlog/data.hpp"
#include "fedlog/expfam.hpp"
#include "fedlog/message.hpp"
#include "fedlog/nn.hpp"
#include "fedlog/privacy.hpp"
#include "fedlog/rng.hpp"

namespace fedlog {

/// One simulated client. Bodies may differ across clients in depth and
/// width, but every body must produce features of the same dimension m
/// because the head is shared. local_head and joint_opt are used only by
/// the baselines that train the last layer locally; the statistic-sharing
/// path never reads them.
struct ClientState {
    std::uint32_t id = 0;
    BodyNetwork body;
    LabeledDataset train_data;
    LabeledDataset test_data;
    TrainConfig config;
    HeadParams local_head;
    OptimizerState body_opt;
    OptimizerState joint_opt;
    Rng rng{0};  // batch order; reseed per client before use
};

struct ServerState {
    HeadParams head;
    PriorParams prior;
    std::size_t round = 0;
};

/// Zero head and flat prior (chi = 0, nu = prior_nu) of matching dims.
ServerState make_server(std::size_t m, std::size_t n_class,
                        double prior_nu = 1.0);

enum class TrainStatus { ok, skipped_empty };

/// Runs config.local_epochs epochs of mini-batch gradient steps on the
/// client's body with the head frozen. Gradients are batch means; batch
/// order comes from client.rng. Empty training data is a warning no-op.
TrainStatus local_train(ClientState& client, const HeadParams& head);

/// Baseline variant: optimizes body and client.local_head together as one
/// parameter vector (optimizer state in joint_opt).
TrainStatus joint_local_train(ClientState& client);

/// Feature-sums upload: runs every training point through the body and
/// accumulates sufficient statistics. Payload size is m * n_class values
/// regardless of how much data the client holds.
RoundMessage summarize(const ClientState& client);

/// As above, then adds Gaussian noise with sigma calibrated to the
/// statistic's L2 sensitivity at the client's feature dimension (see
/// noise_sigma in privacy.hpp).
RoundMessage summarize(const ClientState& client, const PrivacyParams& privacy,
                       Rng& noise_rng);

struct RoundOptions {
    int wire_float_width = 64;
    /// Train and summarize clients concurrently. Results are bit-identical
    /// to serial execution: every client owns its random streams and the
    /// server sorts messages by client id before aggregating.
    bool parallel = false;
    std::optional<PrivacyParams> privacy;
    NoiseScope noise_scope = NoiseScope::per_message;
    /// Master seed for noise streams (mixed with round and client id).
    std::uint64_t noise_seed = 0;
    double map_tol = 1e-6;
    std::size_t map_max_iters = 10000;
};

struct RoundResult {
    std::size_t uplink_bytes = 0;    // all client uploads, serialized
    std::size_t downlink_bytes = 0;  // broadcast bytes times client count
    bool map_converged = true;
    std::size_t map_iterations = 0;
    std::size_t skipped_clients = 0;  // empty training sets
};

/// One global round of the statistic-sharing algorithm: broadcast the head,
/// train all bodies locally, collect summed statistics through a
/// serialization round trip, update the conjugate posterior (messages sorted
/// by client id), and re-solve the MAP head warm-started from the current
/// one. Dimension mismatches raise ProtocolError naming the client.
RoundResult fedlog_round(ServerState& server, std::vector<ClientState>& clients,
                         const RoundOptions& options);

/// Entry-wise average with weights w_c / sum(w). Shape mismatch raises
/// ProtocolError; an all-zero weight vector raises InputError.
std::vector<double> fedavg_aggregate(
    const std::vector<std::vector<double>>& models,
    const std::vector<std::size_t>& weights);

/// Whole-model averaging baseline. Requires every client to share the
/// server's architecture; the global model is body plus linear head.
struct FedAvgState {
    BodyNetwork body;
    HeadParams head;
    std::size_t round = 0;
};

/// Broadcast the full model, train body and head jointly on every client,
/// then replace the global model with the count-weighted average of the
/// client models (and sync clients to it).
RoundResult fedavg_round(FedAvgState& server, std::vector<ClientState>& clients,
                         const RoundOptions& options);

/// Head-averaging baseline with localized bodies (the 1-global-layer
/// variant): only the last linear layer is shared, so its uplink matches
/// the statistic-sharing payload.
struct LgFedAvgState {
    HeadParams head;
    std::size_t round = 0;
};

RoundResult lgfedavg_round(LgFedAvgState& server,
                           std::vector<ClientState>& clients,
                           const RoundOptions& options);

/// Fraction of points whose top conditional probability matches the label.
double accuracy(const BodyNetwork& body, const HeadParams& head,
                const LabeledDataset& data);

/// Per-client test accuracy under one shared head and each client's own
/// body. Clients without test data are reported absent and excluded from
/// the count-weighted mean; the mean is NaN when nobody has test data.
struct EvalResult {
    std::vector<std::optional<double>> per_client;
    std::size_t total_points = 0;
    double mean = 0.0;
};

EvalResult evaluate(const std::vector<ClientState>& clients,
                    const HeadParams& head);

}  // namespace fedlog
