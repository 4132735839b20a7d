#include "fedlog/privacy.hpp"

#include <cmath>
#include <string>

#include "fedlog/errors.hpp"

namespace fedlog {

void validate_privacy_params(const PrivacyParams& privacy) {
    std::string problems;
    if (!(privacy.epsilon > 0.0)) problems += " epsilon";
    if (!(privacy.delta > 0.0 && privacy.delta < 1.0)) problems += " delta";
    if (!(privacy.clip_bound > 0.0)) problems += " clip_bound";
    if (!problems.empty()) {
        throw ConfigError("invalid privacy fields:" + problems);
    }
}

double l2_sensitivity(std::size_t m, double b) {
    if (m < 2) {
        throw InputError(
            "sensitivity needs m >= 2 (one slot is the constant feature)");
    }
    if (!(b > 0.0)) throw InputError("clip bound must be positive");
    return std::sqrt(1.0 + static_cast<double>(m - 1) * b * b);
}

double noise_sigma(const PrivacyParams& privacy, std::size_t m) {
    validate_privacy_params(privacy);
    const double sens = l2_sensitivity(m, privacy.clip_bound);
    return sens * std::sqrt(2.0 * std::log(1.25 / privacy.delta)) /
           privacy.epsilon;
}

RoundMessage privatize(const RoundMessage& msg, double sigma, Rng& rng) {
    if (sigma < 0.0) throw InputError("noise sigma must be nonnegative");
    RoundMessage noisy = msg;
    if (sigma == 0.0) return noisy;
    for (double& v : noisy.stat_sum.values) v += rng.gaussian(0.0, sigma);
    return noisy;
}

}  // namespace fedlog
