#pragma once

#include <cstddef>

#include "fedlog/message.hpp"
#include "fedlog/rng.hpp"

namespace fedlog {

/// Gaussian-mechanism parameters. clip_bound must equal the clamp bound of
/// the body's output activation or the sensitivity bound does not hold.
struct PrivacyParams {
    double epsilon = 1.0;
    double delta = 0.01;
    double clip_bound = 2.0;
};

/// Throws ConfigError listing the violated fields (epsilon > 0,
/// 0 < delta < 1, clip_bound > 0).
void validate_privacy_params(const PrivacyParams& privacy);

/// per_message: every client noises its own upload (the default).
/// global: one noise draw is added to the aggregated statistic at the
/// server, modeling a secure-aggregation deployment where the server never
/// sees individual uploads. This simulates that deployment; it does not
/// implement the multiparty computation itself.
enum class NoiseScope { per_message, global };

/// Worst-case L2 norm of one point's statistic when every feature except
/// the constant slot is clipped to [-b, b]: sqrt(1 + (m-1) b^2).
/// m counts the constant slot, so m >= 2 is required.
double l2_sensitivity(std::size_t m, double b);

/// Gaussian noise scale sqrt(2 (1 + (m-1) b^2) ln(1.25/delta)) / epsilon,
/// which makes one message (epsilon, delta)-DP at sensitivity
/// l2_sensitivity(m, clip_bound).
double noise_sigma(const PrivacyParams& privacy, std::size_t m);

/// Adds i.i.d. N(0, sigma^2) to every statistic coordinate; client id and
/// count pass through. sigma = 0 returns the message unchanged.
RoundMessage privatize(const RoundMessage& msg, double sigma, Rng& rng);

}  // namespace fedlog
