#include "fedlog/expfam.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedlog/errors.hpp"

namespace fedlog {

namespace {

void check_label(int y, std::size_t n_class) {
    if (y < 1 || static_cast<std::size_t>(y) > n_class) {
        throw InputError("class id " + std::to_string(y) + " outside {1.." +
                         std::to_string(n_class) + "}");
    }
}

/// Per-block softmax weights w_y = exp(||eta_y||^2/4 - A(eta)); also returns
/// A(eta) itself. One pass over the block norms with a max shift.
struct BlockSoftmax {
    std::vector<double> weights;
    double cumulant = 0.0;
};

BlockSoftmax block_softmax(const HeadParams& head) {
    std::vector<double> q(head.n_class, 0.0);
    for (std::size_t y = 1; y <= head.n_class; ++y) {
        double sq = 0.0;
        for (double v : head.block(y)) sq += v * v;
        q[y - 1] = sq / 4.0;
    }
    const double qmax = *std::max_element(q.begin(), q.end());
    double total = 0.0;
    for (double& v : q) {
        v = std::exp(v - qmax);
        total += v;
    }
    BlockSoftmax out;
    out.cumulant = qmax + std::log(total);
    out.weights.resize(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) out.weights[i] = q[i] / total;
    return out;
}

}  // namespace

SufficientStatistic sufficient_statistic(std::span<const double> phi, int y,
                                         std::size_t n_class) {
    check_label(y, n_class);
    SufficientStatistic stat(phi.size(), n_class);
    accumulate_statistic(stat, phi, y);
    return stat;
}

void accumulate_statistic(SufficientStatistic& acc, std::span<const double> phi,
                          int y) {
    check_label(y, acc.n_class);
    if (phi.size() != acc.m) {
        throw InputError("feature dim " + std::to_string(phi.size()) +
                         " does not match statistic m=" + std::to_string(acc.m));
    }
    double* block = acc.values.data() + (static_cast<std::size_t>(y) - 1) * acc.m;
    for (std::size_t i = 0; i < acc.m; ++i) block[i] += phi[i];
}

double cumulant(const HeadParams& head) { return block_softmax(head).cumulant; }

std::vector<double> conditional_log_probs(const HeadParams& head,
                                          std::span<const double> phi) {
    if (phi.size() != head.m) {
        throw InputError("feature dim " + std::to_string(phi.size()) +
                         " does not match head m=" + std::to_string(head.m));
    }
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

int classify(const HeadParams& head, std::span<const double> phi) {
    const auto lp = conditional_log_probs(head, phi);
    std::size_t best = 0;
    for (std::size_t y = 1; y < lp.size(); ++y) {
        if (lp[y] > lp[best]) best = y;  // strict: ties keep the lowest id
    }
    return static_cast<int>(best) + 1;
}

double log_posterior_kernel(const HeadParams& head,
                            std::span<const double> chi_post, double nu_post) {
    if (chi_post.size() != head.eta.size()) {
        throw InputError("chi_post length " + std::to_string(chi_post.size()) +
                         " does not match head dims");
    }
    double linear = 0.0;
    for (std::size_t i = 0; i < chi_post.size(); ++i) {
        linear += head.eta[i] * chi_post[i];
    }
    return linear - nu_post * cumulant(head);
}

std::vector<double> kernel_gradient(const HeadParams& head,
                                    std::span<const double> chi_post,
                                    double nu_post) {
    if (chi_post.size() != head.eta.size()) {
        throw InputError("chi_post length " + std::to_string(chi_post.size()) +
                         " does not match head dims");
    }
    const auto soft = block_softmax(head);
    std::vector<double> grad(chi_post.begin(), chi_post.end());
    for (std::size_t y = 1; y <= head.n_class; ++y) {
        const double scale = nu_post * soft.weights[y - 1] * 0.5;
        const auto block = head.block(y);
        double* g = grad.data() + (y - 1) * head.m;
        for (std::size_t i = 0; i < head.m; ++i) g[i] -= scale * block[i];
    }
    return grad;
}

MapResult map_solve(const PriorParams& prior, const SufficientStatistic& stat_sum,
                    std::size_t n, const HeadParams& init, double tol,
                    std::size_t max_iters) {
    const std::size_t dim = init.eta.size();
    if (prior.chi.size() != dim || stat_sum.values.size() != dim) {
        throw InputError("prior/statistic dims do not match head dims");
    }
    if (tol <= 0.0) throw InputError("map_solve tol must be positive");

    std::vector<double> chi_post(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        chi_post[i] = prior.chi[i] + stat_sum.values[i];
    }
    const double nu_post = prior.nu + static_cast<double>(n);

    constexpr double kArmijo = 1e-4;
    constexpr double kMinStep = 1e-18;
    constexpr double kWeightFloor = 1e-290;  // keeps 1/w finite

    MapResult result;
    result.head = init;
    HeadParams& head = result.head;
    const std::size_t m = head.m;
    const std::size_t n_class = head.n_class;

    double value = log_posterior_kernel(head, chi_post, nu_post);
    std::vector<double> grad = kernel_gradient(head, chi_post, nu_post);
    HeadParams trial = head;
    std::vector<double> dir(dim), dinv_g(dim), dinv_u(dim);

    // The cumulant Hessian is blockdiag(w_y (I/2 + eta_y eta_y^T/4)) minus
    // u u^T/4 with u = stack(w_y eta_y), so a Newton direction costs O(dim)
    // via one Sherman-Morrison per block and one more for the rank-1 tail.
    auto newton_direction = [&]() -> bool {
        const BlockSoftmax soft = block_softmax(head);
        double u_dinv_u = 0.0;
        double u_dinv_g = 0.0;
        for (std::size_t y = 0; y < n_class; ++y) {
            const double w = std::max(soft.weights[y], kWeightFloor);
            const double* eta_y = head.eta.data() + y * m;
            const double* g_y = grad.data() + y * m;
            double eta_sq = 0.0, eta_g = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                eta_sq += eta_y[i] * eta_y[i];
                eta_g += eta_y[i] * g_y[i];
            }
            // D_y^{-1} x = (2/w) x - (eta^T x / (w (1 + |eta|^2/2))) eta
            const double shrink = 1.0 / (w * (1.0 + eta_sq / 2.0));
            double* ig = dinv_g.data() + y * m;
            double* iu = dinv_u.data() + y * m;
            for (std::size_t i = 0; i < m; ++i) {
                ig[i] = (2.0 / w) * g_y[i] - shrink * eta_g * eta_y[i];
                // u block is w*eta, so D_y^{-1} u has the same closed form.
                iu[i] = 2.0 * eta_y[i] - shrink * w * eta_sq * eta_y[i];
            }
            u_dinv_u += w * eta_sq * (2.0 - shrink * w * eta_sq);
            for (std::size_t i = 0; i < m; ++i) u_dinv_g += w * eta_y[i] * ig[i];
        }
        const double denom = 4.0 - u_dinv_u;  // positive while H stays PD
        if (!(denom > 0.0) || !std::isfinite(denom) || !std::isfinite(u_dinv_g)) {
            return false;
        }
        const double scale = u_dinv_g / denom;
        for (std::size_t i = 0; i < dim; ++i) {
            dir[i] = (dinv_g[i] + scale * dinv_u[i]) / nu_post;
        }
        return true;
    };

    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        double grad_inf = 0.0;
        for (double g : grad) grad_inf = std::max(grad_inf, std::abs(g));
        if (grad_inf < tol) {
            result.converged = true;
            result.iterations = iter;
            return result;
        }

        bool have_newton = newton_direction();
        if (have_newton) {
            // Far from the optimum the quadratic model can ask for a jump
            // that underflows every class weight; cap the move instead.
            constexpr double kMaxMove = 64.0;
            double dir_inf = 0.0;
            for (double d : dir) dir_inf = std::max(dir_inf, std::abs(d));
            if (!std::isfinite(dir_inf)) {
                have_newton = false;
            } else if (dir_inf > kMaxMove) {
                const double shrink = kMaxMove / dir_inf;
                for (double& d : dir) d *= shrink;
            }
        }

        bool moved = false;
        for (int attempt = have_newton ? 0 : 1; attempt < 2 && !moved;
             ++attempt) {
            if (attempt == 1) dir = grad;
            double slope = 0.0;
            for (std::size_t i = 0; i < dim; ++i) slope += grad[i] * dir[i];
            if (!(slope > 0.0) || !std::isfinite(slope)) continue;

            if (attempt == 0 && slope < std::abs(value) * 1e-13) {
                // The predicted gain is below the rounding noise of the
                // objective, so a line search cannot certify anything;
                // take the full Newton step on gradient evidence alone.
                for (std::size_t i = 0; i < dim; ++i) {
                    trial.eta[i] = head.eta[i] + dir[i];
                }
                head.eta.swap(trial.eta);
                value = log_posterior_kernel(head, chi_post, nu_post);
                moved = true;
                break;
            }

            double step = 1.0;
            while (step >= kMinStep) {
                for (std::size_t i = 0; i < dim; ++i) {
                    trial.eta[i] = head.eta[i] + step * dir[i];
                }
                const double trial_value =
                    log_posterior_kernel(trial, chi_post, nu_post);
                if (trial_value >= value + kArmijo * step * slope) {
                    head.eta.swap(trial.eta);
                    value = trial_value;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
        }
        if (!moved) {
            // No ascent at floating-point resolution.
            result.iterations = iter;
            result.converged = grad_inf < tol;
            return result;
        }
        grad = kernel_gradient(head, chi_post, nu_post);
    }

    result.iterations = max_iters;
    double grad_inf = 0.0;
    for (double g : grad) grad_inf = std::max(grad_inf, std::abs(g));
    result.converged = grad_inf < tol;
    return result;
}

PosteriorParams posterior_update(
    const PriorParams& prior,
    std::span<const std::pair<SufficientStatistic, std::size_t>> messages) {
    PosteriorParams post;
    post.chi_post.assign(prior.chi.begin(), prior.chi.end());
    post.nu_post = prior.nu;
    for (const auto& [stat, count] : messages) {
        if (stat.values.size() != post.chi_post.size()) {
            throw ProtocolError("statistic length " +
                                std::to_string(stat.values.size()) +
                                " does not match prior length " +
                                std::to_string(post.chi_post.size()));
        }
        for (std::size_t i = 0; i < stat.values.size(); ++i) {
            post.chi_post[i] += stat.values[i];
        }
        post.nu_post += static_cast<double>(count);
    }
    return post;
}

}  // namespace fedlog
