#include "cellvar/cell_inference.hpp"
#include "cellvar/serialize.hpp"
#include "cellvar/synth.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace cellvar;
using cellvar::test::make_trace;
using cellvar::test::vec;

namespace {

const ModelSpec linear1(ModelKind::Linear1);
const ModelSpec linear2(ModelKind::Linear2);
const ModelSpec linexp(ModelKind::LinExp);

McmcConfig chain(std::uint64_t seed)
{
    McmcConfig cfg;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST_CASE("Jeffreys marginal depends on the residual sum of squares only")
{
    const Eigen::VectorXd times = uniform_time_grid(10, 100.0);
    const auto trace = make_trace(linear1, vec({-0.01}), times, 0.2, 3);
    const auto ls = least_squares_fit(linear1, trace);
    const double ssr1 = residuals(linear1, ls.params, trace).squaredNorm();
    // SSR(c) = SSR_min + (c - c_hat)^2 sum t^2; pick c with SSR = 4 SSR_min.
    const double shift = std::sqrt(3.0 * ssr1 / times.squaredNorm());
    const Eigen::VectorXd other = ls.params + vec({shift});
    CHECK(residuals(linear1, other, trace).squaredNorm() == doctest::Approx(4 * ssr1).epsilon(1e-10));
    CHECK(log_marginal_likelihood(linear1, other, trace) -
              log_marginal_likelihood(linear1, ls.params, trace) ==
          doctest::Approx(-5.0 * std::log(4.0)).epsilon(1e-10));
}

TEST_CASE("Jeffreys marginal matches quadrature over the noise variance")
{
    const Eigen::VectorXd times = uniform_time_grid(50, 1000.0);
    const Eigen::VectorXd truth = vec({-0.005, 800.0, 100.0});
    const auto trace = make_trace(linexp, truth, times, 0.1, 21);
    const int n = static_cast<int>(times.size());
    const std::vector<Eigen::VectorXd> thetas = {
        truth, vec({-0.0051, 805.0, 98.0}), vec({-0.0045, 790.0, 110.0}), vec({-0.006, 820.0, 90.0})};
    const double ref_analytic = log_marginal_likelihood(linexp, thetas[0], trace);
    const double ref_quad =
        oracle::jeffreys_log_evidence(residuals(linexp, thetas[0], trace).squaredNorm(), n);
    for (std::size_t i = 1; i < thetas.size(); ++i) {
        const double analytic = log_marginal_likelihood(linexp, thetas[i], trace) - ref_analytic;
        const double quad =
            oracle::jeffreys_log_evidence(residuals(linexp, thetas[i], trace).squaredNorm(), n) - ref_quad;
        CHECK(std::abs(analytic - quad) < 1e-6);
    }
}

TEST_CASE("Jeffreys marginal edge cases")
{
    const Eigen::VectorXd times = uniform_time_grid(20, 1000.0);
    const auto exact = make_trace(linexp, vec({-0.005, 800.0, 100.0}), times);
    const double at_truth = log_marginal_likelihood(linexp, vec({-0.005, 800.0, 100.0}), exact);
    CHECK(std::isfinite(at_truth));
    CHECK(at_truth > 1e3);
    CHECK(log_marginal_likelihood(linexp, vec({-0.005, 800.0, -1.0}), exact) ==
          -std::numeric_limits<double>::infinity());
    CHECK(log_marginal_likelihood(linexp, vec({-0.005, 0.0, 0.5}), exact) ==
          -std::numeric_limits<double>::infinity());

    const auto tiny = make_trace(linexp, vec({-0.005, 800.0, 100.0}), uniform_time_grid(4, 10.0));
    CHECK_THROWS_AS(log_marginal_likelihood(linexp, vec({-0.005, 800.0, 100.0}), tiny), DataError);
}

TEST_CASE("Linear2 likelihood is invariant to a common capacity shift")
{
    const Eigen::VectorXd times = uniform_time_grid(30, 500.0);
    auto trace = make_trace(linear2, vec({99.0, -0.01}), times, 0.1, 5);
    const Eigen::VectorXd theta = vec({98.9, -0.0098});
    const double before = log_marginal_likelihood(linear2, theta, trace);
    const double delta = 1.75;
    trace.capacities_pct.array() += delta;
    CHECK(log_marginal_likelihood(linear2, theta + vec({delta, 0.0}), trace) ==
          doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("Linear1 likelihood is covariant under time rescaling")
{
    const Eigen::VectorXd times = uniform_time_grid(30, 500.0);
    auto trace = make_trace(linear1, vec({-0.01}), times, 0.1, 6);
    const double before = log_marginal_likelihood(linear1, vec({-0.0102}), trace);
    const double lambda = 24.0;
    trace.times *= lambda;
    CHECK(log_marginal_likelihood(linear1, vec({-0.0102 / lambda}), trace) ==
          doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("Gaussian summaries")
{
    SUBCASE("hand arithmetic")
    {
        Eigen::MatrixXd draws(3, 1);
        draws << 1, 2, 3;
        const auto s = gaussian_summary(draws);
        CHECK(s.mean(0) == 2.0);
        CHECK(s.variance(0) == 1.0);
    }
    SUBCASE("a constant chain is floored with a warning")
    {
        const Eigen::MatrixXd draws = Eigen::MatrixXd::Constant(200, 2, 0.7);
        Warnings warnings;
        const auto s = gaussian_summary(draws, &warnings);
        CHECK(s.variance(0) == kVarianceFloor);
        CHECK(s.variance(1) == kVarianceFloor);
        CHECK(warnings.size() == 2);
    }
    SUBCASE("recovers a known Gaussian")
    {
        Rng rng = make_rng(99);
        std::normal_distribution<double> normal(-3.0, 0.5);
        Eigen::MatrixXd draws(1000, 1);
        for (Eigen::Index i = 0; i < draws.rows(); ++i)
            draws(i, 0) = normal(rng);
        const auto s = gaussian_summary(draws);
        CHECK(std::abs(s.mean(0) + 3.0) < 3 * 0.5 / std::sqrt(1000.0));
        CHECK(std::abs(s.variance(0) - 0.25) < 3 * 0.25 * std::sqrt(2.0 / 999.0));
    }
    SUBCASE("posterior summaries need 100 draws")
    {
        CellPosterior post;
        post.cell_id = "short";
        post.samples = Eigen::MatrixXd::Random(99, 1);
        CHECK_THROWS_AS(summarize_gaussian(post), DataError);
        post.samples = Eigen::MatrixXd::Random(100, 1);
        CHECK_NOTHROW(summarize_gaussian(post));
    }
}

TEST_CASE("effective sample size")
{
    Rng rng = make_rng(4);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Eigen::Index n = 20000;
    Eigen::VectorXd iid(n), ar(n);
    const double rho = 0.8;
    double x = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        iid(i) = normal(rng);
        x = rho * x + std::sqrt(1 - rho * rho) * normal(rng);
        ar(i) = x;
    }
    CHECK(effective_sample_size(iid) == doctest::Approx(double(n)).epsilon(0.1));
    CHECK(effective_sample_size(ar) == doctest::Approx(n * (1 - rho) / (1 + rho)).epsilon(0.15));
    CHECK(effective_sample_size(Eigen::VectorXd::Constant(50, 1.0)) == 0.0);
}

TEST_CASE("sampler configuration is validated")
{
    McmcConfig cfg;
    cfg.burn_in = cfg.n_steps;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = McmcConfig{};
    cfg.thin = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = McmcConfig{};
    cfg.adapt_window = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK(McmcConfig{}.retained() == 1500);
}

TEST_CASE("adaptation recovers from an absurd initial proposal scale")
{
    McmcConfig cfg;
    cfg.seed = 8;
    auto narrow = [](const Eigen::VectorXd& x) { return -0.5 * (x(0) / 1e-3) * (x(0) / 1e-3); };
    const Chain c = sample_random_walk(narrow, vec({0.0}), vec({1e3}), cfg,
                                       Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(1, false));
    CHECK(c.diagnostics.converged);
    CHECK(c.diagnostics.acceptance_rate > 0.15);
    CHECK(c.diagnostics.acceptance_rate < 0.5);
    const auto s = gaussian_summary(c.draws);
    CHECK(std::sqrt(s.variance(0)) == doctest::Approx(1e-3).epsilon(0.15));
}

TEST_CASE("reflection keeps a coordinate non-negative")
{
    McmcConfig cfg;
    cfg.seed = 12;
    auto half_normal = [](const Eigen::VectorXd& x) {
        return x(0) < 0 ? -std::numeric_limits<double>::infinity() : -0.5 * x(0) * x(0);
    };
    const Chain c = sample_random_walk(half_normal, vec({0.5}), vec({1.0}), cfg,
                                       Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(1, true));
    CHECK(c.draws.minCoeff() >= 0.0);
    // Half-normal mean sqrt(2/pi).
    CHECK(c.draws.mean() == doctest::Approx(std::sqrt(2 / std::numbers::pi)).epsilon(0.1));
}

TEST_CASE("Linear1 posterior matches the closed-form Student-t")
{
    const Eigen::VectorXd times = uniform_time_grid(50, 1000.0);
    const double truth = -0.01;
    const auto trace = make_trace(linear1, vec({truth}), times, 0.1, 77);
    const auto post = sample_cell_posterior(linear1, trace, chain(5));

    const int n = static_cast<int>(times.size());
    const double s0 = least_squares_fit(linear1, trace).ssr;
    const double exact_variance = s0 / ((n - 3) * times.squaredNorm());
    CHECK(post.variance(0) == doctest::Approx(exact_variance).epsilon(0.10));
    CHECK(std::abs(post.mean(0) - truth) < 3 * std::sqrt(post.variance(0)));
    CHECK(post.diagnostics.converged);
}

TEST_CASE("cell posteriors satisfy their invariants for every model")
{
    const Eigen::VectorXd times = uniform_time_grid(50, 1000.0);
    const std::pair<ModelSpec, Eigen::VectorXd> cases[] = {
        {linear1, vec({-0.01})},
        {linear2, vec({99.7, -0.01})},
        {linexp, vec({-0.005, 800.0, 100.0})},
    };
    std::uint64_t seed = 40;
    for (const auto& [spec, theta] : cases) {
        const auto trace = make_trace(spec, theta, times, 0.1, ++seed);
        const auto post = sample_cell_posterior(spec, trace, chain(seed));
        CAPTURE(spec.name());
        CHECK(post.diagnostics.converged);
        CHECK(post.diagnostics.acceptance_rate >= 0.0);
        CHECK(post.diagnostics.acceptance_rate <= 1.0);
        CHECK(post.samples.rows() == McmcConfig{}.retained());
        for (Eigen::Index d = 0; d < theta.size(); ++d) {
            CHECK(post.variance(d) > 0);
            CHECK(post.mean(d) >= post.samples.col(d).minCoeff());
            CHECK(post.mean(d) <= post.samples.col(d).maxCoeff());
            CHECK(std::abs(post.mean(d) - theta(d)) < 4 * std::sqrt(post.variance(d)));

            // The two halves of the retained chain agree.
            const Eigen::Index half = post.samples.rows() / 2;
            const double pooled = std::sqrt(post.variance(d));
            const double first = post.samples.col(d).head(half).mean();
            const double second = post.samples.col(d).tail(half).mean();
            CHECK(std::abs(first - second) < 0.2 * pooled);
        }
    }
}

TEST_CASE("sampling is deterministic given the seed")
{
    const auto trace =
        make_trace(linexp, vec({-0.005, 800.0, 100.0}), uniform_time_grid(50, 1000.0), 0.1, 9);
    McmcConfig cfg = chain(123);
    cfg.n_steps = 4000;
    cfg.burn_in = 1000;
    const auto a = sample_cell_posterior(linexp, trace, cfg);
    const auto b = sample_cell_posterior(linexp, trace, cfg);
    CHECK(a.samples == b.samples);
    CHECK(a.mean == b.mean);
    CHECK(a.variance == b.variance);
    cfg.seed = 124;
    CHECK(sample_cell_posterior(linexp, trace, cfg).samples != a.samples);
}

TEST_CASE("more data points concentrate the posterior")
{
    int narrower = 0;
    McmcConfig cfg;
    cfg.n_steps = 6000;
    cfg.burn_in = 1500;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto coarse = make_trace(linear2, vec({99.7, -0.01}), uniform_time_grid(25, 1000.0), 0.1, 2 * seed);
        const auto fine = make_trace(linear2, vec({99.7, -0.01}), uniform_time_grid(50, 1000.0), 0.1, 2 * seed + 1);
        cfg.seed = seed;
        const auto a = sample_cell_posterior(linear2, coarse, cfg);
        const auto b = sample_cell_posterior(linear2, fine, cfg);
        if ((b.variance.array() < a.variance.array()).all())
            ++narrower;
    }
    CHECK(narrower >= 16);
}

TEST_CASE("cell seeds differ per cell and repeat")
{
    CHECK(cell_stream_seed(1, "a") != cell_stream_seed(1, "b"));
    CHECK(cell_stream_seed(1, "a") != cell_stream_seed(2, "a"));
    CHECK(cell_stream_seed(1, "a", 0) != cell_stream_seed(1, "a", 1));
    CHECK(cell_stream_seed(1, "a") == cell_stream_seed(1, "a"));
}

TEST_CASE("posterior cache returns what was stored and fit_cells ignores it for results")
{
    PopulationTruth truth = PopulationTruth::defaults(linear2);
    truth.cell_count = 6;
    truth.seed = 3;
    const Dataset ds = generate(truth).dataset;
    McmcConfig cfg;
    cfg.n_steps = 3000;
    cfg.burn_in = 1000;

    const auto dir = test::scratch_dir("posterior-cache");
    const PosteriorCache cache(dir);
    const auto plain = fit_cells(ds, linear2, cfg, 17, 1);
    const auto cold = fit_cells(ds, linear2, cfg, 17, 2, &cache);
    const auto warm = fit_cells(ds, linear2, cfg, 17, 3, &cache);
    CHECK(std::distance(std::filesystem::directory_iterator(dir), {}) == 6);
    for (std::size_t k = 0; k < plain.size(); ++k) {
        CHECK(plain[k].cell_id == ds.traces[k].cell_id);
        CHECK(cold[k].samples == plain[k].samples);
        CHECK(warm[k].samples == plain[k].samples);
        CHECK(warm[k].mean == plain[k].mean);
        CHECK(warm[k].variance == plain[k].variance);
        CHECK(warm[k].diagnostics.ess == plain[k].diagnostics.ess);
    }

    McmcConfig other = cfg;
    other.seed = cell_stream_seed(17, ds.traces[0].cell_id);
    const auto key = dataset_hash(ds);
    CHECK(cache.load(key, linear2, other, ds.traces[0].cell_id));
    CHECK_FALSE(cache.load(key, linexp, other, ds.traces[0].cell_id));
    other.n_steps += 1;
    CHECK_FALSE(cache.load(key, linear2, other, ds.traces[0].cell_id));
}

TEST_CASE("cell posterior records round-trip through JSON")
{
    const auto trace = make_trace(linear2, vec({99.7, -0.01}), uniform_time_grid(30, 1000.0), 0.1, 2);
    McmcConfig cfg = chain(3);
    cfg.n_steps = 2000;
    cfg.burn_in = 500;
    const auto post = sample_cell_posterior(linear2, trace, cfg);
    const auto back = cell_posterior_from_json(Json::parse(to_json(post).dump()));
    CHECK(back.cell_id == post.cell_id);
    CHECK(back.mean == post.mean);
    CHECK(back.variance == post.variance);
    CHECK(back.samples == post.samples);
    CHECK(back.diagnostics.acceptance_rate == post.diagnostics.acceptance_rate);
    CHECK(back.diagnostics.converged == post.diagnostics.converged);
}
