#pragma once

#include "cellvar/error.hpp"
#include "cellvar/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace cellvar {

struct McmcConfig {
    int n_steps = 20000;
    int burn_in = 5000;
    int thin = 10;
    std::uint64_t seed = 0;
    int adapt_window = 50;

    void validate() const;
    int retained() const noexcept { return (n_steps - burn_in) / thin; }
};

struct ChainDiagnostics {
    double acceptance_rate = 0.0;
    Eigen::VectorXd ess;
    bool converged = false;
};

struct Chain {
    Eigen::MatrixXd draws; // rows = retained draws, cols = dimensions
    ChainDiagnostics diagnostics;
};

inline constexpr double kMinEffectiveSampleSize = 100.0;

// Effective sample size of one series via Geyer's initial monotone sequence.
double effective_sample_size(const Eigen::VectorXd& series);

// Component-wise random-walk Metropolis. Each step proposes a Gaussian move
// along every proposal direction in turn: the coordinate axes, or the columns
// of `directions` when given. During burn-in the per-direction scale is tuned
// every adapt_window steps toward a 20-40% acceptance rate (halved when a
// window accepted nothing); it is frozen afterwards. Axes flagged in
// reflect_at_zero are proposed as |x + step|, keeping them non-negative
// (axis directions only).
template <class LogDensity>
Chain sample_random_walk(LogDensity&& log_density, Eigen::VectorXd start,
                         Eigen::VectorXd scale, const McmcConfig& cfg,
                         const Eigen::Array<bool, Eigen::Dynamic, 1>& reflect_at_zero,
                         const Eigen::MatrixXd& directions = Eigen::MatrixXd())
{
    cfg.validate();
    const Eigen::Index dims = start.size();
    if (scale.size() != dims || reflect_at_zero.size() != dims)
        throw ConfigError("sampler start, scale and reflection mask differ in size");
    const bool along_axes = directions.size() == 0;
    if (!along_axes && (directions.rows() != dims || directions.cols() != dims))
        throw ConfigError("proposal directions must form a square matrix");
    if (!along_axes && reflect_at_zero.any())
        throw ConfigError("reflection needs axis-aligned proposals");

    Rng rng = make_rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    Eigen::VectorXd x = std::move(start);
    Eigen::VectorXd previous(dims);
    double logp = log_density(x);
    if (!std::isfinite(logp))
        throw DomainError("sampler started at a point of zero density");

    Chain chain;
    chain.draws.resize(cfg.retained(), dims);
    Eigen::VectorXi window_accepts = Eigen::VectorXi::Zero(dims);
    long long accepted = 0;
    long long proposed = 0;
    Eigen::Index row = 0;

    for (int step = 0; step < cfg.n_steps; ++step) {
        const bool burning = step < cfg.burn_in;
        for (Eigen::Index d = 0; d < dims; ++d) {
            const double step_size = scale(d) * normal(rng);
            double old_value = 0.0;
            if (along_axes) {
                old_value = x(d);
                const double candidate = old_value + step_size;
                x(d) = reflect_at_zero(d) ? std::abs(candidate) : candidate;
            } else {
                previous = x;
                x.noalias() += step_size * directions.col(d);
            }
            const double logp_new = log_density(x);
            const bool accept =
                logp_new >= logp || std::log(uniform(rng)) < logp_new - logp;
            if (accept) {
                logp = logp_new;
                if (burning)
                    ++window_accepts(d);
                else
                    ++accepted;
            } else if (along_axes) {
                x(d) = old_value;
            } else {
                x = previous;
            }
            if (!burning)
                ++proposed;
        }

        if (burning && (step + 1) % cfg.adapt_window == 0) {
            for (Eigen::Index d = 0; d < dims; ++d) {
                const double rate = double(window_accepts(d)) / cfg.adapt_window;
                if (window_accepts(d) == 0)
                    scale(d) *= 0.5;
                else if (rate < 0.2)
                    scale(d) *= 0.75;
                else if (rate > 0.4)
                    scale(d) *= 1.35;
            }
            window_accepts.setZero();
        }

        if (!burning && (step - cfg.burn_in) % cfg.thin == 0 && row < chain.draws.rows())
            chain.draws.row(row++) = x.transpose();
    }

    chain.diagnostics.acceptance_rate =
        proposed > 0 ? double(accepted) / double(proposed) : 0.0;
    chain.diagnostics.ess.resize(dims);
    bool converged = true;
    for (Eigen::Index d = 0; d < dims; ++d) {
        chain.diagnostics.ess(d) = effective_sample_size(chain.draws.col(d));
        if (!(chain.diagnostics.ess(d) >= kMinEffectiveSampleSize))
            converged = false;
    }
    chain.diagnostics.converged = converged;
    return chain;
}

} // namespace cellvar
