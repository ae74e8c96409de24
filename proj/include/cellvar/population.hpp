#pragma once

#include "cellvar/cell_inference.hpp"
#include "cellvar/mcmc.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace cellvar {

// Priors on the population parameters, per dimension:
//   mu_g    ~ N(0, mean_prior_variance)
//   sigma_g ~ Uniform[0, sd_upper(d)]
struct PopulationPrior {
    double mean_prior_variance = 1e4;
    Eigen::VectorXd sd_upper;

    // sd_upper = 10 x sample sd of the cell means, floored at 1e-6.
    static PopulationPrior from_summaries(std::span<const GaussianSummary> summaries);
};

inline constexpr double kSdUpperFactor = 10.0;
inline constexpr double kSdUpperFloor = 1e-6;

struct PopulationPosterior {
    Eigen::VectorXd mean;       // posterior mean of mu_g
    Eigen::VectorXd sd;         // posterior mean of sigma_g
    Eigen::VectorXd mean_sd;    // posterior sd of mu_g
    Eigen::VectorXd sd_sd;      // posterior sd of sigma_g
    Eigen::MatrixXd samples;    // columns [mu_g(0..p), sigma_g(0..p)]
    ChainDiagnostics diagnostics;

    Eigen::Index dims() const noexcept { return mean.size(); }
};

// Sub-sample distribution baseline: mean and (K-1)-denominator sd.
struct SsdSummary {
    Eigen::VectorXd mean; // m_g
    Eigen::VectorXd sd;   // s_g
};

// Log posterior of one dimension up to a constant:
//   sum_k log N(mu_k; mu_g, sigma_k^2 + sigma_g^2) + log prior.
// -infinity outside the prior support. Cell terms are summed in sorted order,
// so the value does not depend on the order of the cells.
double log_population_posterior_dim(double mu_g, double sigma_g,
                                    std::span<const double> cell_means,
                                    std::span<const double> cell_variances,
                                    double mean_prior_variance, double sd_upper);

// log_population_posterior_dim for repeated calls on one set of cells.
// Repeated cells (common in with-replacement sub-samples) are evaluated once
// and weighted by multiplicity, and the per-sigma_g sums are cached in two
// slots (least recently used replaced), so moving mu_g alone costs O(1).
// Agrees with the direct form to rounding.
class PopulationDimDensity {
public:
    PopulationDimDensity(std::span<const double> cell_means,
                         std::span<const double> cell_variances, double mean_prior_variance,
                         double sd_upper);

    double operator()(double mu_g, double sigma_g);

private:
    struct Sums {
        double sigma_g = -1.0;
        double weight = 0.0;       // sum 1/v
        double first = 0.0;        // sum d/v, d = mu_k - centre
        double second = 0.0;       // sum d^2/v
        double log_det = 0.0;      // sum log v
        bool valid = false;
        std::uint64_t used = 0;
    };

    const Sums& sums_for(double sigma_g);

    std::vector<double> means_;
    std::vector<double> variances_;
    std::vector<double> counts_;
    double cell_count_ = 0.0;
    double mean_prior_variance_;
    double sd_upper_;
    double centre_ = 0.0;
    Sums slots_[2];
    std::uint64_t clock_ = 0;
};

// Sum of log_population_posterior_dim over dimensions (diagonal population
// covariance).
double log_population_posterior(const Eigen::VectorXd& mu_g, const Eigen::VectorXd& sigma_g,
                                std::span<const GaussianSummary> summaries,
                                const PopulationPrior& prior);

// Random-walk Metropolis on (mu_g, sigma_g). Dimensions are independent a
// posteriori, so each runs its own 2-d chain seeded from hash(cfg.seed, d).
// Starts at (mean, sd) of the cell means; sigma_g proposals reflect at 0.
// Needs at least 3 summaries.
PopulationPosterior sample_population_posterior(std::span<const GaussianSummary> summaries,
                                                const PopulationPrior& prior,
                                                const McmcConfig& cfg);

SsdSummary ssd(std::span<const Eigen::VectorXd> estimates);
SsdSummary ssd(std::span<const GaussianSummary> summaries);

// Pearson product-moment correlation of the cell means across cells.
// Dimensions with zero variance get NaN rows/columns (diagonal included).
Eigen::MatrixXd parameter_correlations(std::span<const GaussianSummary> summaries);

std::vector<GaussianSummary> summaries_of(std::span<const CellPosterior> posteriors);

} // namespace cellvar
