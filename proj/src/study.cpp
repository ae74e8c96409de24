#include "cellvar/study.hpp"

#include "cellvar/parallel.hpp"
#include "cellvar/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace cellvar {

namespace {

enum StreamTag : std::uint64_t {
    kTagSubsample = 1,
    kTagPopulation = 2,
    kTagFullSample = 3,
    kTagNested = 4,
};

// Dispersion values are logged; zero spread is clamped to this.
constexpr double kDispersionFloor = 1e-300;

struct RepeatOutcome {
    bool valid = false;
    Eigen::VectorXd mlb_mean;
    Eigen::VectorXd mlb_sd;
    Eigen::VectorXd ssd_mean;
    Eigen::VectorXd ssd_sd;
};

std::vector<GaussianSummary> pick(std::span<const GaussianSummary> all,
                                  std::span<const std::size_t> indices)
{
    std::vector<GaussianSummary> out;
    out.reserve(indices.size());
    for (std::size_t i : indices)
        out.push_back(all[i]);
    return out;
}

RepeatOutcome run_repeat(std::span<const GaussianSummary> summaries,
                         std::span<const std::size_t> indices, const McmcConfig& mcmc_cfg,
                         std::uint64_t seed)
{
    RepeatOutcome out;
    try {
        const auto subset = pick(summaries, indices);
        const PopulationPrior prior = PopulationPrior::from_summaries(subset);
        McmcConfig cfg = mcmc_cfg;
        cfg.seed = seed;
        const PopulationPosterior post = sample_population_posterior(subset, prior, cfg);
        const SsdSummary base = ssd(std::span<const GaussianSummary>(subset));
        out.mlb_mean = post.mean;
        out.mlb_sd = post.sd;
        out.ssd_mean = base.mean;
        out.ssd_sd = base.sd;
        out.valid = post.mean.allFinite() && post.sd.allFinite() && base.mean.allFinite() &&
                    base.sd.allFinite();
    } catch (const Error&) {
        out.valid = false;
    }
    return out;
}

EstimatorStats stats_of(const std::vector<const Eigen::VectorXd*>& means,
                        const std::vector<const Eigen::VectorXd*>& sds, Eigen::Index d)
{
    std::vector<double> m;
    std::vector<double> s;
    m.reserve(means.size());
    s.reserve(sds.size());
    for (const auto* v : means)
        m.push_back((*v)(d));
    for (const auto* v : sds)
        s.push_back((*v)(d));
    EstimatorStats st;
    st.sd_of_sd = sample_sd(s);
    st.sd_of_mean = sample_sd(m);
    st.mean_of_sd = s.empty() ? 0.0 : std::accumulate(s.begin(), s.end(), 0.0) / double(s.size());
    st.mean_of_mean =
        m.empty() ? 0.0 : std::accumulate(m.begin(), m.end(), 0.0) / double(m.size());
    return st;
}

void require_normalised(const Dataset& dataset, const ModelSpec& spec)
{
    for (const auto& t : dataset.traces)
        if (t.normalization != spec.required_normalization())
            throw DataError("dataset '" + dataset.name + "' is not normalised as model " +
                            std::string(spec.name()) + " requires");
}

} // namespace

double sample_sd(std::span<const double> values)
{
    if (values.size() < 2)
        return 0.0;
    const double mean =
        std::accumulate(values.begin(), values.end(), 0.0) / double(values.size());
    double ss = 0.0;
    for (double v : values)
        ss += (v - mean) * (v - mean);
    return std::sqrt(ss / double(values.size() - 1));
}

std::uint64_t subsample_seed(std::uint64_t master, int n, int repeat)
{
    return derive_seed(master, {kTagSubsample, static_cast<std::uint64_t>(n),
                                static_cast<std::uint64_t>(repeat)});
}

std::uint64_t population_seed(std::uint64_t master, int n, int repeat)
{
    return derive_seed(master, {kTagPopulation, static_cast<std::uint64_t>(n),
                                static_cast<std::uint64_t>(repeat)});
}

int StudyConfig::resolved_max(std::size_t cell_count) const
{
    return subsample_max.value_or(static_cast<int>(cell_count) - 3);
}

void StudyConfig::validate(std::size_t cell_count) const
{
    if (cell_count < kMinStudyCells)
        throw ConfigError("a study needs at least " + std::to_string(kMinStudyCells) +
                          " cells, dataset has " + std::to_string(cell_count));
    const int max_n = resolved_max(cell_count);
    if (subsample_min < 3 || subsample_min > max_n ||
        max_n > static_cast<int>(cell_count) - 3)
        throw ConfigError("sub-sample sizes must satisfy 3 <= min <= max <= K - 3 (K = " +
                          std::to_string(cell_count) + ")");
    if (n_repeats < 1)
        throw ConfigError("n_repeats must be positive");
    if (!(alpha > 0 && alpha < 1))
        throw ConfigError("alpha must lie in (0, 1)");
    if (!(tail_fraction > 0 && tail_fraction <= 1))
        throw ConfigError("tail_fraction must lie in (0, 1]");
}

StabilityFit fit_stability(std::span<const int> sizes, std::span<const double> dispersion,
                           const StudyConfig& cfg)
{
    if (sizes.size() != dispersion.size())
        throw DataError("stability fit needs one dispersion value per sub-sample size");
    StabilityFit fit;
    const std::size_t count = sizes.size();
    const auto tail = std::min<std::size_t>(
        count, std::max<std::size_t>(4, static_cast<std::size_t>(
                                            std::ceil(cfg.tail_fraction * double(count)))));
    if (count < 4)
        return fit;

    const std::size_t first = count - tail;
    double sx = 0, sy = 0;
    for (std::size_t i = first; i < count; ++i) {
        fit.fit_region.push_back(sizes[i]);
        sx += sizes[i];
        sy += std::log(std::max(dispersion[i], kDispersionFloor));
    }
    const double mx = sx / double(tail);
    const double my = sy / double(tail);
    double sxx = 0, sxy = 0;
    for (std::size_t i = first; i < count; ++i) {
        const double dx = sizes[i] - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(std::max(dispersion[i], kDispersionFloor)) - my);
    }
    fit.slope = sxx > 0 ? sxy / sxx : 0.0;
    fit.intercept = my - fit.slope * mx;
    fit.converged = fit.slope < 0;
    if (!fit.converged)
        return fit;

    auto in_band = [&](std::size_t i) {
        return dispersion[i] <= (1.0 + cfg.alpha) * std::exp(fit.slope * sizes[i] + fit.intercept);
    };
    std::size_t start = count;
    while (start > 0 && in_band(start - 1))
        --start;
    if (start < count)
        fit.required_n = sizes[start];
    return fit;
}

StudyResult run_study(const Dataset& dataset, const ModelSpec& spec,
                      const StudyConfig& study_cfg, const McmcConfig& mcmc_cfg,
                      const ExecutionOptions& exec)
{
    study_cfg.validate(dataset.cell_count());
    require_normalised(dataset, spec);
    const auto cells = fit_cells(dataset, spec, mcmc_cfg, study_cfg.master_seed, exec.threads,
                                 exec.cache);
    return run_study(dataset, spec, cells, study_cfg, mcmc_cfg, exec);
}

StudyResult run_study(const Dataset& dataset, const ModelSpec& spec,
                      std::span<const CellPosterior> cells, const StudyConfig& study_cfg,
                      const McmcConfig& mcmc_cfg, const ExecutionOptions& exec)
{
    const std::size_t k = cells.size();
    study_cfg.validate(k);
    mcmc_cfg.validate();
    require_normalised(dataset, spec);
    if (k != dataset.cell_count())
        throw DataError("cell posteriors do not match the dataset");
    const int p = spec.param_count();
    for (const auto& c : cells)
        if (c.mean.size() != p)
            throw DataError("cell posterior of '" + c.cell_id + "' has the wrong dimension");

    StudyResult result;
    result.dataset_name = dataset.name;
    result.spec = spec;
    result.config = study_cfg;
    result.mcmc = mcmc_cfg;
    for (const auto& c : cells)
        result.cell_ids.push_back(c.cell_id);
    result.cell_summaries = summaries_of(cells);
    const std::span<const GaussianSummary> summaries(result.cell_summaries);

    std::vector<std::size_t> indices(k);
    std::iota(indices.begin(), indices.end(), std::size_t{0});

    const int n_min = study_cfg.subsample_min;
    const int n_max = study_cfg.resolved_max(k);
    const int n_sizes = n_max - n_min + 1;
    const int repeats = study_cfg.n_repeats;
    const std::uint64_t master = study_cfg.master_seed;

    std::vector<RepeatOutcome> outcomes(static_cast<std::size_t>(n_sizes) * repeats);
    parallel_for(outcomes.size(), exec.threads, [&](std::size_t task) {
        const int n = n_min + static_cast<int>(task / repeats);
        const int r = static_cast<int>(task % repeats);
        Rng rng = make_rng(subsample_seed(master, n, r));
        const auto drawn = draw_subsample(std::span<const std::size_t>(indices), n, rng);
        outcomes[task] = run_repeat(summaries, drawn, mcmc_cfg, population_seed(master, n, r));
    });

    result.curves.resize(p);
    for (int d = 0; d < p; ++d)
        result.curves[d].param = std::string(spec.param_names()[d]);

    const int max_excluded = static_cast<int>(std::floor(0.05 * repeats));
    for (int s = 0; s < n_sizes; ++s) {
        const int n = n_min + s;
        RepeatEstimates rep;
        rep.n = n;
        std::vector<const Eigen::VectorXd*> mlb_m, mlb_s, ssd_m, ssd_s;
        for (int r = 0; r < repeats; ++r) {
            const auto& o = outcomes[static_cast<std::size_t>(s) * repeats + r];
            if (!o.valid)
                continue;
            rep.repeat_index.push_back(r);
            rep.mlb_mean.push_back(o.mlb_mean);
            rep.mlb_sd.push_back(o.mlb_sd);
            rep.ssd_mean.push_back(o.ssd_mean);
            rep.ssd_sd.push_back(o.ssd_sd);
        }
        const int valid = static_cast<int>(rep.repeat_index.size());
        const int excluded = repeats - valid;
        if (excluded > max_excluded) {
            std::ostringstream msg;
            msg << "study aborted: " << excluded << " of " << repeats
                << " repeats failed at sub-sample size " << n << " (limit 5%)";
            throw StudyAborted(msg.str());
        }
        for (int i = 0; i < valid; ++i) {
            mlb_m.push_back(&rep.mlb_mean[i]);
            mlb_s.push_back(&rep.mlb_sd[i]);
            ssd_m.push_back(&rep.ssd_mean[i]);
            ssd_s.push_back(&rep.ssd_sd[i]);
        }
        for (int d = 0; d < p; ++d) {
            CurvePoint pt;
            pt.n = n;
            pt.mlb = stats_of(mlb_m, mlb_s, d);
            pt.ssd = stats_of(ssd_m, ssd_s, d);
            pt.valid_repeats = valid;
            pt.excluded_repeats = excluded;
            result.curves[d].points.push_back(pt);
        }
        result.repeats.push_back(std::move(rep));
    }

    bool all_reached = true;
    int worst = 0;
    for (int d = 0; d < p; ++d) {
        std::vector<int> sizes;
        std::vector<double> disp;
        for (const auto& pt : result.curves[d].points) {
            sizes.push_back(pt.n);
            disp.push_back(pt.mlb.sd_of_sd);
        }
        StabilityFit fit = fit_stability(sizes, disp, study_cfg);
        if (fit.required_n)
            worst = std::max(worst, *fit.required_n);
        else
            all_reached = false;
        result.stability.push_back(std::move(fit));
    }
    if (all_reached)
        result.required_n_model = worst;

    result.correlation = p >= 2 ? parameter_correlations(summaries)
                                : Eigen::MatrixXd(Eigen::MatrixXd::Ones(1, 1));

    McmcConfig full_cfg = mcmc_cfg;
    full_cfg.seed = derive_seed(master, {kTagFullSample});
    result.full_sample = sample_population_posterior(
        summaries, PopulationPrior::from_summaries(summaries), full_cfg);
    result.full_sample_ssd = ssd(summaries);
    return result;
}

std::vector<SingleDrawPoint> single_draw_trace(std::span<const CellPosterior> cells,
                                               const StudyConfig& study_cfg,
                                               const McmcConfig& mcmc_cfg, bool nested,
                                               const ExecutionOptions& exec)
{
    const std::size_t k = cells.size();
    study_cfg.validate(k);
    const auto summaries = summaries_of(cells);
    std::vector<std::size_t> indices(k);
    std::iota(indices.begin(), indices.end(), std::size_t{0});

    const int n_min = study_cfg.subsample_min;
    const int n_max = study_cfg.resolved_max(k);
    const std::uint64_t master = study_cfg.master_seed;

    std::vector<std::size_t> nested_draw;
    if (nested) {
        Rng rng = make_rng(derive_seed(master, {kTagNested}));
        nested_draw = draw_subsample(std::span<const std::size_t>(indices), n_max, rng);
    }

    std::vector<SingleDrawPoint> out(static_cast<std::size_t>(n_max - n_min + 1));
    parallel_for(out.size(), exec.threads, [&](std::size_t i) {
        const int n = n_min + static_cast<int>(i);
        std::vector<std::size_t> drawn;
        if (nested) {
            drawn.assign(nested_draw.begin(), nested_draw.begin() + n);
        } else {
            Rng rng = make_rng(subsample_seed(master, n, 0));
            drawn = draw_subsample(std::span<const std::size_t>(indices), n, rng);
        }
        const auto subset = pick(summaries, drawn);
        McmcConfig cfg = mcmc_cfg;
        cfg.seed = population_seed(master, n, 0);
        const PopulationPosterior post =
            sample_population_posterior(subset, PopulationPrior::from_summaries(subset), cfg);
        out[i] = SingleDrawPoint{n, post.mean, post.mean_sd, post.sd, post.sd_sd};
    });
    return out;
}

} // namespace cellvar
