#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fedlog {

/// Global head: canonical parameters of the exponential-family model over
/// (feature, label) pairs. Flat length m * n_class; block y (1-based) holds
/// the m coefficients for class y at flat indices [(y-1)*m, y*m).
struct HeadParams {
    std::size_t m = 0;
    std::size_t n_class = 0;
    std::vector<double> eta;

    HeadParams() = default;
    HeadParams(std::size_t m_, std::size_t n_class_)
        : m(m_), n_class(n_class_), eta(m_ * n_class_, 0.0) {}

    std::span<double> block(std::size_t y) {
        return {eta.data() + (y - 1) * m, m};
    }
    std::span<const double> block(std::size_t y) const {
        return {eta.data() + (y - 1) * m, m};
    }
};

/// T(phi, y) = phi (x) e_y, or a sum of such terms over data points. Same
/// block layout as HeadParams.
struct SufficientStatistic {
    std::size_t m = 0;
    std::size_t n_class = 0;
    std::vector<double> values;

    SufficientStatistic() = default;
    SufficientStatistic(std::size_t m_, std::size_t n_class_)
        : m(m_), n_class(n_class_), values(m_ * n_class_, 0.0) {}
};

/// Conjugate prior over the head: chi (pseudo-statistics) and nu >= 1
/// (pseudo-count). chi = 0, nu = 1 encodes no prior knowledge.
struct PriorParams {
    std::vector<double> chi;
    double nu = 1.0;

    PriorParams() = default;
    PriorParams(std::size_t dim, double nu_) : chi(dim, 0.0), nu(nu_) {}
};

/// Posterior parameters: chi accumulated with statistics, nu with counts.
struct PosteriorParams {
    std::vector<double> chi_post;
    double nu_post = 0.0;
};

struct MapResult {
    HeadParams head;
    bool converged = false;
    std::size_t iterations = 0;
};

/// Builds T(phi, y): block y equals phi, all other blocks zero.
/// Throws InputError when y is outside {1..n_class}.
SufficientStatistic sufficient_statistic(std::span<const double> phi, int y,
                                         std::size_t n_class);

/// Adds T(phi, y) into `acc` without allocating.
void accumulate_statistic(SufficientStatistic& acc, std::span<const double> phi,
                          int y);

/// Cumulant A(eta) = ln sum_y exp(||eta_y||^2 / 4), evaluated with a max
/// shift so large heads do not overflow.
double cumulant(const HeadParams& head);

/// Log-softmax of the per-class logits eta_y . phi.
std::vector<double> conditional_log_probs(const HeadParams& head,
                                          std::span<const double> phi);

/// Predicted class: argmax of conditional_log_probs, lowest class id on ties.
int classify(const HeadParams& head, std::span<const double> phi);

/// Log posterior density of the head up to its (intractable) normalizer:
/// eta . chi_post - nu_post * A(eta). Concave in eta.
double log_posterior_kernel(const HeadParams& head,
                            std::span<const double> chi_post, double nu_post);

/// Gradient of log_posterior_kernel. Block y:
///   chi_post_y - nu_post * w_y * eta_y / 2,
/// where w_y = exp(||eta_y||^2/4 - A(eta)) is the softmax over block norms.
std::vector<double> kernel_gradient(const HeadParams& head,
                                    std::span<const double> chi_post,
                                    double nu_post);

/// MAP estimate of the head: damped Newton ascent on log_posterior_kernel.
/// The cumulant Hessian factors into per-block rank-1 updates plus one
/// global rank-1 term, so each Newton direction costs O(m * n_class) via
/// Sherman-Morrison; steps are backtracked (Armijo) with a plain gradient
/// fallback. Stops when the gradient infinity norm drops below `tol`. The
/// objective is strictly concave, so any converged result is the global
/// maximizer. When max_iters is hit first the iterate is returned flagged
/// non-converged.
MapResult map_solve(const PriorParams& prior, const SufficientStatistic& stat_sum,
                    std::size_t n, const HeadParams& init, double tol = 1e-6,
                    std::size_t max_iters = 10000);

/// Conjugate update: chi_post = chi + sum of statistics in the given order,
/// nu_post = nu + sum of counts. Callers wanting the canonical federation
/// order must pass messages sorted by ascending client id.
PosteriorParams posterior_update(
    const PriorParams& prior,
    std::span<const std::pair<SufficientStatistic, std::size_t>> messages);

}  // namespace fedlog
