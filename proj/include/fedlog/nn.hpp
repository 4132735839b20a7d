#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedlog/expfam.hpp"

namespace fedlog {

enum class Activation { identity, relu, clamp };

/// Clips x to [-b, b]. Applied element-wise to layer outputs, never to the
/// constant feature appended after the last layer.
double clamp_activation(double x, double b);

struct DenseLayer {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::vector<double> weights;  // out_dim x in_dim, row-major
    std::vector<double> biases;   // out_dim
    Activation activation = Activation::identity;
    double clamp_bound = 0.0;  // > 0 required when activation == clamp
};

/// Client-local feature extractor: a chain of dense layers. The feature
/// vector fed to the head is the last layer's output with a constant 1.0
/// appended, so feature_dim() = last out_dim + 1.
struct BodyNetwork {
    std::vector<DenseLayer> layers;

    std::size_t input_dim() const { return layers.front().in_dim; }
    std::size_t feature_dim() const { return layers.back().out_dim + 1; }
};

/// Throws ConfigError when layer dims do not chain, a clamp bound is not
/// positive, or the body is empty.
void validate_body(const BodyNetwork& body);

/// Fresh body with relu hidden layers and weights drawn uniformly from
/// [-1/sqrt(fan_in), 1/sqrt(fan_in)]. A positive clamp_bound swaps the output
/// layer's activation from identity to clamp.
BodyNetwork make_dense_body(std::size_t input_dim,
                            const std::vector<std::size_t>& hidden_dims,
                            std::size_t output_dim, std::uint64_t seed,
                            double clamp_bound = 0.0);

/// Features for one input: layer chain plus the trailing constant 1.0.
std::vector<double> forward_one(const BodyNetwork& body,
                                std::span<const double> input);

/// Batch version of forward_one.
std::vector<std::vector<double>> forward(
    const BodyNetwork& body, const std::vector<std::vector<double>>& inputs);

/// Summed cross entropy -sum_i ln softmax(eta . phi_i)[y_i], computed with a
/// max shift. Labels are 1-based class ids; out-of-range labels throw
/// InputError.
double cross_entropy_loss(const std::vector<std::vector<double>>& features,
                          std::span<const int> labels, const HeadParams& head);

/// Gradients of the summed cross entropy with respect to every body weight
/// and bias, shapes mirroring the layers. The head is a constant here; no
/// gradient flows to it or through the appended 1.
struct BodyGradient {
    std::vector<std::vector<double>> weight_grads;
    std::vector<std::vector<double>> bias_grads;
};

BodyGradient body_gradient(const BodyNetwork& body,
                           const std::vector<std::vector<double>>& inputs,
                           std::span<const int> labels, const HeadParams& head);

/// As body_gradient, but also trains the head: returns the gradient with
/// respect to eta alongside the body gradients. Used by the baselines that
/// optimize the last layer locally.
struct JointGradient {
    BodyGradient body;
    std::vector<double> head_grad;  // length m * n_class
};

JointGradient joint_gradient(const BodyNetwork& body,
                             const std::vector<std::vector<double>>& inputs,
                             std::span<const int> labels,
                             const HeadParams& head);

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t batch_size = 10;
    std::size_t local_epochs = 1;
    OptimizerKind optimizer = OptimizerKind::sgd;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
};

/// Throws ConfigError listing the violated fields.
void validate_train_config(const TrainConfig& config);

/// Adam moments; step counts applied updates. Empty state is valid for sgd
/// and is lazily sized for adam on first use.
struct OptimizerState {
    std::uint64_t step = 0;
    std::vector<double> m1;
    std::vector<double> m2;
};

/// In-place parameter update. sgd: p -= lr * g. adam: bias-corrected moment
/// update with the configured constants. Shape mismatch throws ConfigError.
void optimizer_step(std::span<double> params, std::span<const double> grads,
                    OptimizerState& state, const TrainConfig& config);

// Flat views used to run the optimizer over a whole body (plus, for the
// joint-training baselines, the head appended after the body parameters).
std::size_t param_count(const BodyNetwork& body);
std::vector<double> flatten_params(const BodyNetwork& body);
void unflatten_params(BodyNetwork& body, std::span<const double> flat);
std::vector<double> flatten_gradient(const BodyGradient& grads);

}  // namespace fedlog
