#include "cellvar/mcmc.hpp"

#include <algorithm>
#include <string>

namespace cellvar {

void McmcConfig::validate() const
{
    if (n_steps <= 0)
        throw ConfigError("n_steps must be positive");
    if (burn_in < 0 || burn_in >= n_steps)
        throw ConfigError("burn_in must satisfy 0 <= burn_in < n_steps");
    if (thin < 1)
        throw ConfigError("thin must be at least 1");
    if (adapt_window < 1)
        throw ConfigError("adapt_window must be at least 1");
    if (retained() < 1)
        throw ConfigError("chain settings retain no draws");
}

double effective_sample_size(const Eigen::VectorXd& series)
{
    const Eigen::Index n = series.size();
    if (n < 4)
        return static_cast<double>(n);
    const Eigen::VectorXd centered = series.array() - series.mean();
    const double c0 = centered.squaredNorm() / double(n);
    if (!(c0 > 0))
        return 0.0; // a constant chain carries no information about spread

    auto autocov = [&](Eigen::Index lag) {
        return centered.head(n - lag).dot(centered.tail(n - lag)) / double(n);
    };

    // Geyer: sum consecutive pairs while positive, enforcing monotone decrease.
    double sum = 0.0;
    double previous_pair = std::numeric_limits<double>::infinity();
    for (Eigen::Index lag = 0; lag + 1 < n; lag += 2) {
        double pair = (autocov(lag) + autocov(lag + 1)) / c0;
        if (pair <= 0)
            break;
        pair = std::min(pair, previous_pair);
        previous_pair = pair;
        sum += pair;
    }
    const double tau = std::max(2.0 * sum - 1.0, 1.0 / double(n));
    return std::min(double(n) / tau, double(n) * std::log10(double(n)));
}

} // namespace cellvar
