#pragma once

#include "cellvar/cell_inference.hpp"
#include "cellvar/dataset.hpp"
#include "cellvar/population.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace cellvar {

struct StudyConfig {
    int n_repeats = 200;
    int subsample_min = 3;
    std::optional<int> subsample_max; // defaults to K - 3
    double alpha = 0.10;
    std::uint64_t master_seed = 0;
    double tail_fraction = 0.5;

    int resolved_max(std::size_t cell_count) const;
    void validate(std::size_t cell_count) const;
};

// Execution knobs that never change results.
struct ExecutionOptions {
    unsigned threads = 0; // 0 = all cores
    const PosteriorCache* cache = nullptr;
};

// N picks uniformly with replacement.
template <class T>
std::vector<T> draw_subsample(std::span<const T> ids, int n, Rng& rng)
{
    if (n < 3)
        throw ConfigError("sub-sample size must be at least 3");
    if (ids.empty())
        throw ConfigError("cannot sub-sample an empty cell list");
    std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
    std::vector<T> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        out.push_back(ids[pick(rng)]);
    return out;
}

struct EstimatorStats {
    double sd_of_sd = 0.0;    // spread of sigma_g (or s_g) estimates across repeats
    double sd_of_mean = 0.0;  // spread of mu_g (or m_g) estimates
    double mean_of_sd = 0.0;
    double mean_of_mean = 0.0;
};

struct CurvePoint {
    int n = 0;
    EstimatorStats mlb;
    EstimatorStats ssd;
    int valid_repeats = 0;
    int excluded_repeats = 0;
};

// One parameter dimension's dispersion-versus-N curve.
struct DimensionCurve {
    std::string param;
    std::vector<CurvePoint> points; // ascending N
};

struct StabilityFit {
    double slope = 0.0;     // a in log y = a N + b
    double intercept = 0.0; // b
    std::vector<int> fit_region;
    std::optional<int> required_n; // empty = not reached
    bool converged = false;
};

// Per-repeat estimates at one sub-sample size, in repeat order (excluded
// repeats omitted).
struct RepeatEstimates {
    int n = 0;
    std::vector<int> repeat_index;
    std::vector<Eigen::VectorXd> mlb_sd;
    std::vector<Eigen::VectorXd> mlb_mean;
    std::vector<Eigen::VectorXd> ssd_sd;
    std::vector<Eigen::VectorXd> ssd_mean;
};

struct StudyResult {
    std::string dataset_name;
    ModelSpec spec;
    StudyConfig config;
    McmcConfig mcmc;
    std::vector<std::string> cell_ids;
    std::vector<GaussianSummary> cell_summaries;
    std::vector<DimensionCurve> curves;
    std::vector<StabilityFit> stability;
    std::optional<int> required_n_model; // max over parameters
    Eigen::MatrixXd correlation;
    PopulationPosterior full_sample;
    SsdSummary full_sample_ssd;
    std::vector<RepeatEstimates> repeats;
};

// OLS of log(dispersion) on N over the tail_fraction largest N; required_n is
// the smallest N from which every larger N stays at or below
// (1 + alpha) exp(a N + b). Needs >= 4 tail points; a >= 0 means not converged.
StabilityFit fit_stability(std::span<const int> sizes, std::span<const double> dispersion,
                           const StudyConfig& cfg);

// Full sub-sampling experiment on a normalised dataset. First-level posteriors
// are computed once per cell and shared by all repeats.
StudyResult run_study(const Dataset& dataset, const ModelSpec& spec,
                      const StudyConfig& study_cfg, const McmcConfig& mcmc_cfg,
                      const ExecutionOptions& exec = {});

// Same, reusing already computed first-level posteriors (dataset order).
StudyResult run_study(const Dataset& dataset, const ModelSpec& spec,
                      std::span<const CellPosterior> cells, const StudyConfig& study_cfg,
                      const McmcConfig& mcmc_cfg, const ExecutionOptions& exec = {});

struct SingleDrawPoint {
    int n = 0;
    Eigen::VectorXd mean;    // posterior mean mu_g
    Eigen::VectorXd mean_sd; // posterior sd of mu_g
    Eigen::VectorXd sd;      // posterior mean sigma_g
    Eigen::VectorXd sd_sd;   // posterior sd of sigma_g
};

// One repeat per N. Nested: the sub-sample at N+1 extends the one at N by one
// draw. Not nested: uses exactly run_study's repeat-0 draws.
std::vector<SingleDrawPoint> single_draw_trace(std::span<const CellPosterior> cells,
                                               const StudyConfig& study_cfg,
                                               const McmcConfig& mcmc_cfg,
                                               bool nested = true,
                                               const ExecutionOptions& exec = {});

// Seed helpers shared by run_study and single_draw_trace.
std::uint64_t subsample_seed(std::uint64_t master, int n, int repeat);
std::uint64_t population_seed(std::uint64_t master, int n, int repeat);

// Sample standard deviation (n-1 denominator); 0 for fewer than two values.
double sample_sd(std::span<const double> values);

} // namespace cellvar
