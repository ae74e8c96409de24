#include "cellvar/cell_inference.hpp"

#include "cellvar/parallel.hpp"
#include "cellvar/rng.hpp"
#include "cellvar/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace cellvar {

double log_marginal_likelihood(const ModelSpec& spec, const ParamVector& theta,
                               const CapacityTrace& trace)
{
    const Eigen::Index n = trace.n_points();
    if (n < spec.param_count() + 2)
        throw DataError("trace '" + trace.cell_id + "' has too few points for model " +
                        std::string(spec.name()));
    if (!is_valid_params(spec, theta))
        return -std::numeric_limits<double>::infinity();
    const Eigen::VectorXd r = residuals(spec, theta, trace);
    if (!r.allFinite())
        return -std::numeric_limits<double>::infinity();
    const double ssr = std::max(r.squaredNorm(), kSsrFloor);
    return -0.5 * double(n) * std::log(ssr);
}

GaussianSummary gaussian_summary(const Eigen::MatrixXd& draws, Warnings* warnings)
{
    const Eigen::Index rows = draws.rows();
    if (rows < 2)
        throw DataError("a Gaussian summary needs at least two draws");
    GaussianSummary out;
    out.mean = draws.colwise().mean().transpose();
    const Eigen::MatrixXd centered = draws.rowwise() - out.mean.transpose();
    out.variance = centered.colwise().squaredNorm().transpose() / double(rows - 1);
    for (Eigen::Index d = 0; d < out.variance.size(); ++d) {
        if (!(out.variance(d) > kVarianceFloor)) {
            out.variance(d) = kVarianceFloor;
            if (warnings)
                warnings->push_back("posterior variance of dimension " + std::to_string(d) +
                                    " floored at 1e-12 (degenerate chain)");
        }
    }
    return out;
}

GaussianSummary summarize_gaussian(const CellPosterior& posterior, Warnings* warnings)
{
    if (posterior.samples.rows() < kMinSummaryDraws)
        throw DataError("posterior of cell '" + posterior.cell_id + "' has " +
                        std::to_string(posterior.samples.rows()) +
                        " draws; at least 100 are needed for a Gaussian summary");
    return gaussian_summary(posterior.samples, warnings);
}

CellPosterior sample_cell_posterior(const ModelSpec& spec, const CapacityTrace& trace,
                                    const McmcConfig& cfg)
{
    cfg.validate();
    const LeastSquaresFit start = least_squares_fit(spec, trace);
    if (!is_valid_params(spec, start.params))
        throw DomainError("least-squares start for cell '" + trace.cell_id +
                          "' is not a valid parameter vector");

    // Proposals move along the principal axes of the Gauss-Newton covariance
    // noise_var (J^T J)^-1, scaled to unit posterior sd, which decorrelates the
    // onset and time constant of LinExp.
    const Eigen::Index n = trace.n_points();
    const int p = spec.param_count();
    const double noise_var = std::max(start.ssr / double(n - p), 1e-16);
    const Eigen::MatrixXd jac = model_jacobian(spec, start.params, trace.times);
    const Eigen::MatrixXd precision = jac.transpose() * jac / noise_var;
    Eigen::MatrixXd directions = Eigen::MatrixXd::Identity(p, p);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(precision);
    if (eig.info() == Eigen::Success && precision.allFinite()) {
        const double top = eig.eigenvalues().maxCoeff();
        const Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(top * 1e-14).cwiseMax(1e-300);
        directions = eig.eigenvectors() * lambda.cwiseSqrt().cwiseInverse().asDiagonal();
    }
    if (!directions.allFinite())
        directions = Eigen::MatrixXd::Identity(p, p) * 1e-9;
    const Eigen::VectorXd scale = Eigen::VectorXd::Constant(p, 2.4);

    auto log_density = [&](const Eigen::VectorXd& theta) {
        return log_marginal_likelihood(spec, theta, trace);
    };
    Chain chain = sample_random_walk(log_density, start.params, scale, cfg,
                                     Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(p, false),
                                     directions);

    CellPosterior post;
    post.cell_id = trace.cell_id;
    const GaussianSummary summary = gaussian_summary(chain.draws);
    post.mean = summary.mean;
    post.variance = summary.variance;
    post.samples = std::move(chain.draws);
    post.diagnostics = std::move(chain.diagnostics);
    post.start_converged = start.converged;
    return post;
}

std::uint64_t cell_stream_seed(std::uint64_t master_seed, const std::string& cell_id,
                               std::uint64_t repeat)
{
    return derive_seed(master_seed, {fnv1a(cell_id), repeat});
}

PosteriorCache::PosteriorCache(std::filesystem::path directory)
    : directory_(std::move(directory))
{
    std::filesystem::create_directories(directory_);
}

std::filesystem::path PosteriorCache::entry_path(std::uint64_t dataset_key,
                                                 const ModelSpec& spec,
                                                 const McmcConfig& cfg,
                                                 const std::string& cell_id) const
{
    const std::uint64_t key = derive_seed(
        dataset_key,
        {static_cast<std::uint64_t>(spec.kind()), static_cast<std::uint64_t>(cfg.n_steps),
         static_cast<std::uint64_t>(cfg.burn_in), static_cast<std::uint64_t>(cfg.thin),
         static_cast<std::uint64_t>(cfg.adapt_window), cfg.seed, fnv1a(cell_id)});
    char name[32];
    std::snprintf(name, sizeof name, "%016llx.json", static_cast<unsigned long long>(key));
    return directory_ / name;
}

std::optional<CellPosterior> PosteriorCache::load(std::uint64_t dataset_key,
                                                  const ModelSpec& spec,
                                                  const McmcConfig& cfg,
                                                  const std::string& cell_id) const
{
    const auto path = entry_path(dataset_key, spec, cfg, cell_id);
    if (!std::filesystem::exists(path))
        return std::nullopt;
    try {
        CellPosterior post = cell_posterior_from_json(read_json(path));
        if (post.cell_id != cell_id || post.mean.size() != spec.param_count())
            return std::nullopt;
        return post;
    } catch (const std::exception&) {
        return std::nullopt; // unreadable entry: recompute
    }
}

void PosteriorCache::store(std::uint64_t dataset_key, const ModelSpec& spec,
                           const McmcConfig& cfg, const CellPosterior& posterior) const
{
    const auto path = entry_path(dataset_key, spec, cfg, posterior.cell_id);
    auto tmp = path;
    tmp += ".tmp";
    write_json(to_json(posterior), tmp);
    std::filesystem::rename(tmp, path);
}

std::vector<CellPosterior> fit_cells(const Dataset& dataset, const ModelSpec& spec,
                                     const McmcConfig& cfg, std::uint64_t master_seed,
                                     unsigned threads, const PosteriorCache* cache)
{
    const std::uint64_t key = cache ? dataset_hash(dataset) : 0;
    std::vector<CellPosterior> out(dataset.cell_count());
    parallel_for(dataset.cell_count(), threads, [&](std::size_t k) {
        const CapacityTrace& trace = dataset.traces[k];
        McmcConfig cell_cfg = cfg;
        cell_cfg.seed = cell_stream_seed(master_seed, trace.cell_id);
        if (cache) {
            if (auto hit = cache->load(key, spec, cell_cfg, trace.cell_id)) {
                out[k] = std::move(*hit);
                return;
            }
        }
        out[k] = sample_cell_posterior(spec, trace, cell_cfg);
        if (cache)
            cache->store(key, spec, cell_cfg, out[k]);
    });
    return out;
}

} // namespace cellvar
