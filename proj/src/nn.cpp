#include "fedlog/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedlog/errors.hpp"
#include "fedlog/rng.hpp"

namespace fedlog {

double clamp_activation(double x, double b) {
    if (x > b) return b;
    if (x < -b) return -b;
    return x;
}

namespace {

double apply_activation(double z, const DenseLayer& layer) {
    switch (layer.activation) {
        case Activation::identity:
            return z;
        case Activation::relu:
            return z > 0.0 ? z : 0.0;
        case Activation::clamp:
            return clamp_activation(z, layer.clamp_bound);
    }
    return z;
}

// Subgradient convention: 0 at the relu kink and at |z| = clamp_bound.
double activation_derivative(double z, const DenseLayer& layer) {
    switch (layer.activation) {
        case Activation::identity:
            return 1.0;
        case Activation::relu:
            return z > 0.0 ? 1.0 : 0.0;
        case Activation::clamp:
            return std::abs(z) < layer.clamp_bound ? 1.0 : 0.0;
    }
    return 1.0;
}

void check_input_dim(const BodyNetwork& body, std::size_t got) {
    if (got != body.input_dim()) {
        throw ConfigError("input dim " + std::to_string(got) +
                          " does not match body input dim " +
                          std::to_string(body.input_dim()));
    }
}

// Forward pass for one input keeping per-layer pre-activations and
// activations for the backward pass.
struct Trace {
    std::vector<std::vector<double>> pre;   // z per layer
    std::vector<std::vector<double>> post;  // a per layer
};

Trace forward_trace(const BodyNetwork& body, std::span<const double> input) {
    Trace t;
    t.pre.resize(body.layers.size());
    t.post.resize(body.layers.size());
    const double* prev = input.data();
    std::size_t prev_dim = input.size();
    for (std::size_t l = 0; l < body.layers.size(); ++l) {
        const DenseLayer& layer = body.layers[l];
        t.pre[l].resize(layer.out_dim);
        t.post[l].resize(layer.out_dim);
        for (std::size_t o = 0; o < layer.out_dim; ++o) {
            const double* row = layer.weights.data() + o * layer.in_dim;
            double z = layer.biases[o];
            for (std::size_t i = 0; i < layer.in_dim; ++i) z += row[i] * prev[i];
            t.pre[l][o] = z;
            t.post[l][o] = apply_activation(z, layer);
        }
        prev = t.post[l].data();
        prev_dim = layer.out_dim;
    }
    (void)prev_dim;
    return t;
}

// Log-softmax over class logits eta_y . phi for a single feature vector.
std::vector<double> log_softmax_logits(const HeadParams& head,
                                       std::span<const double> phi) {
    std::vector<double> logits(head.n_class, 0.0);
    for (std::size_t y = 1; y <= head.n_class; ++y) {
        const auto block = head.block(y);
        double dot = 0.0;
        for (std::size_t i = 0; i < head.m; ++i) dot += block[i] * phi[i];
        logits[y - 1] = dot;
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double v : logits) total += std::exp(v - mx);
    const double lse = mx + std::log(total);
    for (double& v : logits) v -= lse;
    return logits;
}

BodyGradient zero_gradient(const BodyNetwork& body) {
    BodyGradient g;
    g.weight_grads.reserve(body.layers.size());
    g.bias_grads.reserve(body.layers.size());
    for (const DenseLayer& layer : body.layers) {
        g.weight_grads.emplace_back(layer.weights.size(), 0.0);
        g.bias_grads.emplace_back(layer.biases.size(), 0.0);
    }
    return g;
}

// Accumulates gradients of the summed cross entropy for one point into
// body_grads and (when head_grad is non-null) the head gradient.
void backward_one(const BodyNetwork& body, const HeadParams& head,
                  std::span<const double> input, int label, const Trace& trace,
                  BodyGradient& body_grads, std::vector<double>* head_grad) {
    const std::size_t m = head.m;
    const std::vector<double>& out = trace.post.back();

    // phi = [out ; 1]
    std::vector<double> phi(m);
    std::copy(out.begin(), out.end(), phi.begin());
    phi[m - 1] = 1.0;

    const auto log_probs = log_softmax_logits(head, phi);

    // dL/dphi = sum_y p_y eta_y - eta_label; the constant slot is dropped.
    std::vector<double> dphi(m, 0.0);
    for (std::size_t y = 1; y <= head.n_class; ++y) {
        const double p = std::exp(log_probs[y - 1]);
        const double coeff = p - (static_cast<std::size_t>(label) == y ? 1.0 : 0.0);
        const auto block = head.block(y);
        for (std::size_t i = 0; i < m; ++i) dphi[i] += coeff * block[i];
        if (head_grad != nullptr) {
            double* hg = head_grad->data() + (y - 1) * m;
            for (std::size_t i = 0; i < m; ++i) hg[i] += coeff * phi[i];
        }
    }

    std::vector<double> delta(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) delta[i] = dphi[i];

    for (std::size_t l = body.layers.size(); l-- > 0;) {
        const DenseLayer& layer = body.layers[l];
        for (std::size_t o = 0; o < layer.out_dim; ++o) {
            delta[o] *= activation_derivative(trace.pre[l][o], layer);
        }
        const double* prev =
            l == 0 ? input.data() : trace.post[l - 1].data();
        double* wg = body_grads.weight_grads[l].data();
        for (std::size_t o = 0; o < layer.out_dim; ++o) {
            const double d = delta[o];
            body_grads.bias_grads[l][o] += d;
            double* row = wg + o * layer.in_dim;
            for (std::size_t i = 0; i < layer.in_dim; ++i) {
                row[i] += d * prev[i];
            }
        }
        if (l > 0) {
            std::vector<double> next(layer.in_dim, 0.0);
            for (std::size_t o = 0; o < layer.out_dim; ++o) {
                const double d = delta[o];
                const double* row = layer.weights.data() + o * layer.in_dim;
                for (std::size_t i = 0; i < layer.in_dim; ++i) {
                    next[i] += d * row[i];
                }
            }
            delta.swap(next);
        }
    }
}

void check_batch(const BodyNetwork& body,
                 const std::vector<std::vector<double>>& inputs,
                 std::span<const int> labels, const HeadParams& head) {
    if (inputs.size() != labels.size()) {
        throw InputError("batch has " + std::to_string(inputs.size()) +
                         " inputs but " + std::to_string(labels.size()) +
                         " labels");
    }
    if (body.feature_dim() != head.m) {
        throw ConfigError("body feature dim " +
                          std::to_string(body.feature_dim()) +
                          " does not match head m=" + std::to_string(head.m));
    }
    for (int y : labels) {
        if (y < 1 || static_cast<std::size_t>(y) > head.n_class) {
            throw InputError("label " + std::to_string(y) + " outside {1.." +
                             std::to_string(head.n_class) + "}");
        }
    }
}

}  // namespace

void validate_body(const BodyNetwork& body) {
    if (body.layers.empty()) throw ConfigError("body has no layers");
    for (std::size_t l = 0; l < body.layers.size(); ++l) {
        const DenseLayer& layer = body.layers[l];
        if (layer.in_dim == 0 || layer.out_dim == 0) {
            throw ConfigError("layer " + std::to_string(l) + " has zero dim");
        }
        if (layer.weights.size() != layer.in_dim * layer.out_dim ||
            layer.biases.size() != layer.out_dim) {
            throw ConfigError("layer " + std::to_string(l) +
                              " parameter sizes do not match declared dims");
        }
        if (layer.activation == Activation::clamp && layer.clamp_bound <= 0.0) {
            throw ConfigError("layer " + std::to_string(l) +
                              " clamp bound must be positive");
        }
        if (l > 0 && layer.in_dim != body.layers[l - 1].out_dim) {
            throw ConfigError("layer " + std::to_string(l) +
                              " input dim does not chain with previous layer");
        }
    }
}

BodyNetwork make_dense_body(std::size_t input_dim,
                            const std::vector<std::size_t>& hidden_dims,
                            std::size_t output_dim, std::uint64_t seed,
                            double clamp_bound) {
    BodyNetwork body;
    Rng rng(seed);
    std::size_t prev = input_dim;
    std::vector<std::size_t> dims = hidden_dims;
    dims.push_back(output_dim);
    for (std::size_t l = 0; l < dims.size(); ++l) {
        DenseLayer layer;
        layer.in_dim = prev;
        layer.out_dim = dims[l];
        const double bound = 1.0 / std::sqrt(static_cast<double>(prev));
        layer.weights.resize(layer.in_dim * layer.out_dim);
        layer.biases.resize(layer.out_dim);
        for (double& w : layer.weights) w = rng.uniform(-bound, bound);
        for (double& b : layer.biases) b = rng.uniform(-bound, bound);
        if (l + 1 == dims.size()) {
            layer.activation =
                clamp_bound > 0.0 ? Activation::clamp : Activation::identity;
            layer.clamp_bound = clamp_bound;
        } else {
            layer.activation = Activation::relu;
        }
        body.layers.push_back(std::move(layer));
        prev = dims[l];
    }
    validate_body(body);
    return body;
}

std::vector<double> forward_one(const BodyNetwork& body,
                                std::span<const double> input) {
    check_input_dim(body, input.size());
    Trace t = forward_trace(body, input);
    std::vector<double> phi(body.feature_dim());
    const std::vector<double>& out = t.post.back();
    std::copy(out.begin(), out.end(), phi.begin());
    phi.back() = 1.0;
    return phi;
}

std::vector<std::vector<double>> forward(
    const BodyNetwork& body, const std::vector<std::vector<double>>& inputs) {
    std::vector<std::vector<double>> features;
    features.reserve(inputs.size());
    for (const auto& x : inputs) features.push_back(forward_one(body, x));
    return features;
}

double cross_entropy_loss(const std::vector<std::vector<double>>& features,
                          std::span<const int> labels, const HeadParams& head) {
    if (features.size() != labels.size()) {
        throw InputError("feature/label count mismatch");
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
        const int y = labels[i];
        if (y < 1 || static_cast<std::size_t>(y) > head.n_class) {
            throw InputError("label " + std::to_string(y) + " outside {1.." +
                             std::to_string(head.n_class) + "}");
        }
        if (features[i].size() != head.m) {
            throw InputError("feature dim does not match head m");
        }
        const auto log_probs = log_softmax_logits(head, features[i]);
        loss -= log_probs[static_cast<std::size_t>(y) - 1];
    }
    return loss;
}

BodyGradient body_gradient(const BodyNetwork& body,
                           const std::vector<std::vector<double>>& inputs,
                           std::span<const int> labels, const HeadParams& head) {
    check_batch(body, inputs, labels, head);
    BodyGradient grads = zero_gradient(body);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        check_input_dim(body, inputs[i].size());
        Trace t = forward_trace(body, inputs[i]);
        backward_one(body, head, inputs[i], labels[i], t, grads, nullptr);
    }
    return grads;
}

JointGradient joint_gradient(const BodyNetwork& body,
                             const std::vector<std::vector<double>>& inputs,
                             std::span<const int> labels,
                             const HeadParams& head) {
    check_batch(body, inputs, labels, head);
    JointGradient grads;
    grads.body = zero_gradient(body);
    grads.head_grad.assign(head.eta.size(), 0.0);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        check_input_dim(body, inputs[i].size());
        Trace t = forward_trace(body, inputs[i]);
        backward_one(body, head, inputs[i], labels[i], t, grads.body,
                     &grads.head_grad);
    }
    return grads;
}

void validate_train_config(const TrainConfig& config) {
    std::string problems;
    if (config.learning_rate <= 0.0) problems += " learning_rate";
    if (config.batch_size == 0) problems += " batch_size";
    if (config.adam_beta1 <= 0.0 || config.adam_beta1 >= 1.0) problems += " adam_beta1";
    if (config.adam_beta2 <= 0.0 || config.adam_beta2 >= 1.0) problems += " adam_beta2";
    if (config.adam_eps <= 0.0) problems += " adam_eps";
    if (!problems.empty()) {
        throw ConfigError("invalid train config fields:" + problems);
    }
}

void optimizer_step(std::span<double> params, std::span<const double> grads,
                    OptimizerState& state, const TrainConfig& config) {
    if (params.size() != grads.size()) {
        throw ConfigError("parameter/gradient size mismatch: " +
                          std::to_string(params.size()) + " vs " +
                          std::to_string(grads.size()));
    }
    if (config.optimizer == OptimizerKind::sgd) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            params[i] -= config.learning_rate * grads[i];
        }
        return;
    }
    if (state.m1.empty()) {
        state.m1.assign(params.size(), 0.0);
        state.m2.assign(params.size(), 0.0);
    }
    if (state.m1.size() != params.size()) {
        throw ConfigError("optimizer state size does not match parameters");
    }
    state.step += 1;
    const double b1 = config.adam_beta1;
    const double b2 = config.adam_beta2;
    const double bias1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m1[i] = b1 * state.m1[i] + (1.0 - b1) * grads[i];
        state.m2[i] = b2 * state.m2[i] + (1.0 - b2) * grads[i] * grads[i];
        const double mhat = state.m1[i] / bias1;
        const double vhat = state.m2[i] / bias2;
        params[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.adam_eps);
    }
}

std::size_t param_count(const BodyNetwork& body) {
    std::size_t n = 0;
    for (const DenseLayer& layer : body.layers) {
        n += layer.weights.size() + layer.biases.size();
    }
    return n;
}

std::vector<double> flatten_params(const BodyNetwork& body) {
    std::vector<double> flat;
    flat.reserve(param_count(body));
    for (const DenseLayer& layer : body.layers) {
        flat.insert(flat.end(), layer.weights.begin(), layer.weights.end());
        flat.insert(flat.end(), layer.biases.begin(), layer.biases.end());
    }
    return flat;
}

void unflatten_params(BodyNetwork& body, std::span<const double> flat) {
    if (flat.size() != param_count(body)) {
        throw ConfigError("flat parameter vector size does not match body");
    }
    std::size_t pos = 0;
    for (DenseLayer& layer : body.layers) {
        std::copy_n(flat.begin() + pos, layer.weights.size(),
                    layer.weights.begin());
        pos += layer.weights.size();
        std::copy_n(flat.begin() + pos, layer.biases.size(),
                    layer.biases.begin());
        pos += layer.biases.size();
    }
}

std::vector<double> flatten_gradient(const BodyGradient& grads) {
    std::vector<double> flat;
    for (std::size_t l = 0; l < grads.weight_grads.size(); ++l) {
        flat.insert(flat.end(), grads.weight_grads[l].begin(),
                    grads.weight_grads[l].end());
        flat.insert(flat.end(), grads.bias_grads[l].begin(),
                    grads.bias_grads[l].end());
    }
    return flat;
}

}  // namespace fedlog
