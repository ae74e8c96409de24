#pragma once

#include "cellvar/dataset.hpp"
#include "cellvar/mcmc.hpp"
#include "cellvar/models.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cellvar {

// First-level (per-cell) posterior, summarised as a Gaussian.
struct CellPosterior {
    std::string cell_id;
    Eigen::VectorXd mean;     // mu_k
    Eigen::VectorXd variance; // sigma_k^2
    Eigen::MatrixXd samples;  // retained, thinned draws
    ChainDiagnostics diagnostics;
    bool start_converged = true; // least-squares start point converged
};

struct GaussianSummary {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;
};

inline constexpr double kVarianceFloor = 1e-12;
inline constexpr double kSsrFloor = 1e-300;
inline constexpr Eigen::Index kMinSummaryDraws = 100;

// log p(B | theta) with the noise variance integrated out under the Jeffreys
// prior 1/sigma_n^2:  -(n/2) log SSR(theta), theta-independent terms dropped.
// SSR is floored at kSsrFloor; invalid theta gives -infinity.
double log_marginal_likelihood(const ModelSpec& spec, const ParamVector& theta,
                               const CapacityTrace& trace);

// Column means and unbiased variances, variance floored at kVarianceFloor
// (a warning is appended when the floor applies). No minimum draw count.
GaussianSummary gaussian_summary(const Eigen::MatrixXd& draws,
                                 Warnings* warnings = nullptr);

// gaussian_summary over a posterior's retained draws; needs >= 100 draws.
GaussianSummary summarize_gaussian(const CellPosterior& posterior,
                                   Warnings* warnings = nullptr);

// Random-walk Metropolis over theta with a flat parameter prior, started at the
// least-squares fit. Deterministic for a given cfg.seed.
CellPosterior sample_cell_posterior(const ModelSpec& spec, const CapacityTrace& trace,
                                    const McmcConfig& cfg);

// Seed of a cell's first-level chain: hash(master seed, cell id, repeat id).
std::uint64_t cell_stream_seed(std::uint64_t master_seed, const std::string& cell_id,
                               std::uint64_t repeat = 0);

// On-disk store of CellPosterior records keyed by (dataset hash, model, chain
// settings, cell id). Each record is one JSON file.
class PosteriorCache {
public:
    explicit PosteriorCache(std::filesystem::path directory);

    std::filesystem::path entry_path(std::uint64_t dataset_key, const ModelSpec& spec,
                                     const McmcConfig& cfg,
                                     const std::string& cell_id) const;
    std::optional<CellPosterior> load(std::uint64_t dataset_key, const ModelSpec& spec,
                                      const McmcConfig& cfg,
                                      const std::string& cell_id) const;
    void store(std::uint64_t dataset_key, const ModelSpec& spec, const McmcConfig& cfg,
               const CellPosterior& posterior) const;

    const std::filesystem::path& directory() const noexcept { return directory_; }

private:
    std::filesystem::path directory_;
};

// Samples every cell of a normalised dataset. Cell k uses
// cell_stream_seed(master_seed, id); cfg.seed is ignored. Results follow the
// dataset's cell order regardless of thread count.
std::vector<CellPosterior> fit_cells(const Dataset& dataset, const ModelSpec& spec,
                                     const McmcConfig& cfg, std::uint64_t master_seed,
                                     unsigned threads = 1,
                                     const PosteriorCache* cache = nullptr);

} // namespace cellvar
