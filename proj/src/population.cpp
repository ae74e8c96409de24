#include "cellvar/population.hpp"

#include "cellvar/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace cellvar {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void require_dims(std::span<const GaussianSummary> summaries)
{
    if (summaries.empty())
        throw DataError("population inference needs at least one cell summary");
    const Eigen::Index p = summaries.front().mean.size();
    for (const auto& s : summaries)
        if (s.mean.size() != p || s.variance.size() != p)
            throw DataError("cell summaries have inconsistent dimensions");
}

double column_sd(std::span<const GaussianSummary> summaries, Eigen::Index d)
{
    const std::size_t k = summaries.size();
    if (k < 2)
        return 0.0;
    double mean = 0;
    for (const auto& s : summaries)
        mean += s.mean(d);
    mean /= double(k);
    double ss = 0;
    for (const auto& s : summaries)
        ss += (s.mean(d) - mean) * (s.mean(d) - mean);
    return std::sqrt(ss / double(k - 1));
}

} // namespace

PopulationPrior PopulationPrior::from_summaries(std::span<const GaussianSummary> summaries)
{
    require_dims(summaries);
    const Eigen::Index p = summaries.front().mean.size();
    PopulationPrior prior;
    prior.sd_upper.resize(p);
    for (Eigen::Index d = 0; d < p; ++d)
        prior.sd_upper(d) = std::max(kSdUpperFactor * column_sd(summaries, d), kSdUpperFloor);
    return prior;
}

double log_population_posterior_dim(double mu_g, double sigma_g,
                                    std::span<const double> cell_means,
                                    std::span<const double> cell_variances,
                                    double mean_prior_variance, double sd_upper)
{
    if (!(sigma_g >= 0.0) || sigma_g > sd_upper || !std::isfinite(mu_g))
        return -std::numeric_limits<double>::infinity();
    const double group_var = sigma_g * sigma_g;
    std::vector<double> terms(cell_means.size());
    for (std::size_t k = 0; k < cell_means.size(); ++k) {
        const double v = cell_variances[k] + group_var;
        if (!(v > 0))
            return -std::numeric_limits<double>::infinity();
        const double diff = cell_means[k] - mu_g;
        terms[k] = -0.5 * (kLog2Pi + std::log(v)) - diff * diff / (2.0 * v);
    }
    // Summing in sorted order makes the result independent of cell order.
    std::sort(terms.begin(), terms.end());
    double sum = 0.0;
    for (double t : terms)
        sum += t;
    // N(0, mean_prior_variance) on mu_g; the uniform sigma_g prior is flat on
    // its support.
    sum += -0.5 * (kLog2Pi + std::log(mean_prior_variance)) -
           mu_g * mu_g / (2.0 * mean_prior_variance);
    sum += -std::log(sd_upper);
    return sum;
}

PopulationDimDensity::PopulationDimDensity(std::span<const double> cell_means,
                                           std::span<const double> cell_variances,
                                           double mean_prior_variance, double sd_upper)
    : cell_count_(double(cell_means.size())), mean_prior_variance_(mean_prior_variance),
      sd_upper_(sd_upper)
{
    if (cell_means.size() != cell_variances.size())
        throw DataError("cell means and variances differ in length");
    std::vector<std::pair<double, double>> cells(cell_means.size());
    for (std::size_t k = 0; k < cells.size(); ++k)
        cells[k] = {cell_means[k], cell_variances[k]};
    std::sort(cells.begin(), cells.end());
    for (const auto& [m, v] : cells) {
        if (!means_.empty() && means_.back() == m && variances_.back() == v) {
            counts_.back() += 1.0;
            continue;
        }
        means_.push_back(m);
        variances_.push_back(v);
        counts_.push_back(1.0);
    }
    for (std::size_t k = 0; k < means_.size(); ++k)
        centre_ += counts_[k] * means_[k];
    if (cell_count_ > 0)
        centre_ /= cell_count_;
}

const PopulationDimDensity::Sums& PopulationDimDensity::sums_for(double sigma_g)
{
    ++clock_;
    for (auto& slot : slots_) {
        if (slot.used > 0 && slot.sigma_g == sigma_g) {
            slot.used = clock_;
            return slot;
        }
    }
    Sums& slot = slots_[0].used <= slots_[1].used ? slots_[0] : slots_[1];
    slot = Sums{};
    slot.sigma_g = sigma_g;
    slot.used = clock_;
    slot.valid = true;
    const double group_var = sigma_g * sigma_g;
    for (std::size_t k = 0; k < means_.size(); ++k) {
        const double v = variances_[k] + group_var;
        if (!(v > 0)) {
            slot.valid = false;
            break;
        }
        const double d = means_[k] - centre_;
        const double w = counts_[k] / v;
        slot.weight += w;
        slot.first += d * w;
        slot.second += d * d * w;
        slot.log_det += counts_[k] * std::log(v);
    }
    return slot;
}

double PopulationDimDensity::operator()(double mu_g, double sigma_g)
{
    if (!(sigma_g >= 0.0) || sigma_g > sd_upper_ || !std::isfinite(mu_g))
        return -std::numeric_limits<double>::infinity();
    const Sums& s = sums_for(sigma_g);
    if (!s.valid)
        return -std::numeric_limits<double>::infinity();
    const double shift = mu_g - centre_;
    const double quadratic = s.second - 2.0 * shift * s.first + shift * shift * s.weight;
    return -0.5 * (cell_count_ * kLog2Pi + s.log_det) - 0.5 * quadratic -
           0.5 * (kLog2Pi + std::log(mean_prior_variance_)) -
           mu_g * mu_g / (2.0 * mean_prior_variance_) - std::log(sd_upper_);
}

double log_population_posterior(const Eigen::VectorXd& mu_g, const Eigen::VectorXd& sigma_g,
                                std::span<const GaussianSummary> summaries,
                                const PopulationPrior& prior)
{
    require_dims(summaries);
    const Eigen::Index p = summaries.front().mean.size();
    if (mu_g.size() != p || sigma_g.size() != p || prior.sd_upper.size() != p)
        throw DataError("population parameters do not match the summary dimension");
    std::vector<double> means(summaries.size());
    std::vector<double> vars(summaries.size());
    double total = 0.0;
    for (Eigen::Index d = 0; d < p; ++d) {
        for (std::size_t k = 0; k < summaries.size(); ++k) {
            means[k] = summaries[k].mean(d);
            vars[k] = summaries[k].variance(d);
        }
        total += log_population_posterior_dim(mu_g(d), sigma_g(d), means, vars,
                                              prior.mean_prior_variance, prior.sd_upper(d));
    }
    return total;
}

PopulationPosterior sample_population_posterior(std::span<const GaussianSummary> summaries,
                                                const PopulationPrior& prior,
                                                const McmcConfig& cfg)
{
    require_dims(summaries);
    if (summaries.size() < 3)
        throw DataError("population inference needs at least 3 cells");
    cfg.validate();
    const Eigen::Index p = summaries.front().mean.size();
    const std::size_t k = summaries.size();
    if (prior.sd_upper.size() != p)
        throw ConfigError("population prior dimension does not match the summaries");

    PopulationPosterior post;
    post.mean.resize(p);
    post.sd.resize(p);
    post.mean_sd.resize(p);
    post.sd_sd.resize(p);
    post.samples.resize(cfg.retained(), 2 * p);
    post.diagnostics.ess.resize(2 * p);
    post.diagnostics.converged = true;
    double acceptance = 0.0;

    std::vector<double> means(k);
    std::vector<double> vars(k);
    for (Eigen::Index d = 0; d < p; ++d) {
        double mean_var = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            means[i] = summaries[i].mean(d);
            vars[i] = summaries[i].variance(d);
            mean_var += vars[i];
        }
        mean_var /= double(k);
        const double upper = prior.sd_upper(d);

        double centre = 0.0;
        for (double m : means)
            centre += m;
        centre /= double(k);
        const double spread = column_sd(summaries, d);

        Eigen::Vector2d start(centre, std::min(spread, 0.999 * upper));
        const double width = std::max({spread, std::sqrt(mean_var), 1e-12 * std::abs(centre),
                                       1e-300});
        Eigen::Vector2d scale(2.4 * width / std::sqrt(double(k)),
                              std::min(2.4 * width / std::sqrt(2.0 * double(k)), 0.5 * upper));

        PopulationDimDensity density(means, vars, prior.mean_prior_variance, upper);
        auto log_density = [&](const Eigen::VectorXd& x) { return density(x(0), x(1)); };
        McmcConfig dim_cfg = cfg;
        dim_cfg.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(d)});
        Eigen::Array<bool, Eigen::Dynamic, 1> reflect(2);
        reflect << false, true;
        const Chain chain = sample_random_walk(log_density, start, scale, dim_cfg, reflect);

        post.samples.col(d) = chain.draws.col(0);
        post.samples.col(p + d) = chain.draws.col(1);
        post.diagnostics.ess(d) = chain.diagnostics.ess(0);
        post.diagnostics.ess(p + d) = chain.diagnostics.ess(1);
        post.diagnostics.converged = post.diagnostics.converged && chain.diagnostics.converged;
        acceptance += chain.diagnostics.acceptance_rate;

        const double rows = double(chain.draws.rows());
        post.mean(d) = chain.draws.col(0).mean();
        post.sd(d) = chain.draws.col(1).mean();
        post.mean_sd(d) =
            std::sqrt((chain.draws.col(0).array() - post.mean(d)).square().sum() / (rows - 1));
        post.sd_sd(d) =
            std::sqrt((chain.draws.col(1).array() - post.sd(d)).square().sum() / (rows - 1));
    }
    post.diagnostics.acceptance_rate = acceptance / double(p);
    return post;
}

SsdSummary ssd(std::span<const Eigen::VectorXd> estimates)
{
    const std::size_t k = estimates.size();
    if (k < 2)
        throw DataError("the sub-sample distribution needs at least 2 cells");
    const Eigen::Index p = estimates.front().size();
    SsdSummary out;
    out.mean = Eigen::VectorXd::Zero(p);
    for (const auto& e : estimates) {
        if (e.size() != p)
            throw DataError("estimates have inconsistent dimensions");
        out.mean += e;
    }
    out.mean /= double(k);
    Eigen::VectorXd ss = Eigen::VectorXd::Zero(p);
    for (const auto& e : estimates)
        ss += (e - out.mean).cwiseAbs2();
    out.sd = (ss / double(k - 1)).cwiseSqrt();
    return out;
}

SsdSummary ssd(std::span<const GaussianSummary> summaries)
{
    std::vector<Eigen::VectorXd> means;
    means.reserve(summaries.size());
    for (const auto& s : summaries)
        means.push_back(s.mean);
    return ssd(std::span<const Eigen::VectorXd>(means));
}

Eigen::MatrixXd parameter_correlations(std::span<const GaussianSummary> summaries)
{
    require_dims(summaries);
    const Eigen::Index p = summaries.front().mean.size();
    const auto k = static_cast<Eigen::Index>(summaries.size());
    if (p < 2)
        throw DataError("parameter correlations need a model with at least 2 parameters");
    if (k < 3)
        throw DataError("parameter correlations need at least 3 cells");

    Eigen::MatrixXd x(k, p);
    for (Eigen::Index i = 0; i < k; ++i)
        x.row(i) = summaries[static_cast<std::size_t>(i)].mean.transpose();
    const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered;
    const Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();

    Eigen::MatrixXd corr(p, p);
    for (Eigen::Index a = 0; a < p; ++a) {
        for (Eigen::Index b = 0; b < p; ++b) {
            if (!(sd(a) > 0) || !(sd(b) > 0))
                corr(a, b) = std::numeric_limits<double>::quiet_NaN();
            else if (a == b)
                corr(a, b) = 1.0;
            else
                corr(a, b) = std::clamp(cov(a, b) / (sd(a) * sd(b)), -1.0, 1.0);
        }
    }
    return corr;
}

std::vector<GaussianSummary> summaries_of(std::span<const CellPosterior> posteriors)
{
    std::vector<GaussianSummary> out;
    out.reserve(posteriors.size());
    for (const auto& p : posteriors)
        out.push_back({p.mean, p.variance});
    return out;
}

} // namespace cellvar
