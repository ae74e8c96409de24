#include "cellvar/synth.hpp"

#include "cellvar/rng.hpp"
#include "cellvar/serialize.hpp"

#include <cstdio>
#include <random>

namespace cellvar {

Eigen::VectorXd uniform_time_grid(int n, double span)
{
    if (n < 2)
        throw ConfigError("a time grid needs at least two checkups");
    return Eigen::VectorXd::LinSpaced(n, 0.0, span);
}

void PopulationTruth::validate() const
{
    const int p = spec.param_count();
    if (mean.size() != p || sd.size() != p)
        throw ConfigError("population mean and sd must have " + std::to_string(p) +
                          " entries for model " + std::string(spec.name()));
    if (!mean.allFinite() || !sd.allFinite() || (sd.array() < 0).any())
        throw ConfigError("population sd must be finite and non-negative");
    if (!(noise_sd >= 0) || !std::isfinite(noise_sd))
        throw ConfigError("noise sd must be finite and non-negative");
    if (cell_count < 1)
        throw ConfigError("cell count must be positive");
    if (time_grid.size() < p + 2)
        throw ConfigError("time grid too short for model " + std::string(spec.name()));
    if (!(nominal_capacity > 0))
        throw ConfigError("nominal capacity must be positive");
    for (Eigen::Index i = 1; i < time_grid.size(); ++i)
        if (!(time_grid(i) > time_grid(i - 1)))
            throw ConfigError("time grid must be strictly increasing");
    if (correlation) {
        const auto& r = *correlation;
        if (r.rows() != p || r.cols() != p)
            throw ConfigError("correlation matrix has the wrong shape");
        if (!r.isApprox(r.transpose(), 1e-12) ||
            !r.diagonal().isApprox(Eigen::VectorXd::Ones(p), 1e-12))
            throw ConfigError("correlation matrix must be symmetric with unit diagonal");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r);
        if (eig.eigenvalues().minCoeff() < -1e-10)
            throw ConfigError("correlation matrix is not positive semi-definite");
    }
}

PopulationTruth PopulationTruth::defaults(const ModelSpec& spec)
{
    PopulationTruth t;
    t.spec = spec;
    t.time_grid = uniform_time_grid();
    const int p = spec.param_count();
    t.mean.resize(p);
    t.sd.resize(p);
    switch (spec.kind()) {
    case ModelKind::Linear1:
        t.mean << -0.01;
        t.sd << 0.002;
        break;
    case ModelKind::Linear2:
        t.mean << 99.7, -0.01;
        t.sd << 0.5, 0.002;
        break;
    case ModelKind::LinExp:
        t.mean << -0.005, 800.0, 100.0;
        t.sd << 0.001, 40.0, 10.0;
        break;
    }
    t.name = "synthetic-" + std::string(spec.name());
    return t;
}

SyntheticDataset generate(const PopulationTruth& truth)
{
    truth.validate();
    const int p = truth.spec.param_count();

    // Factor of the correlation: R = L L^T (eigen-based, so PSD is fine).
    Eigen::MatrixXd factor = Eigen::MatrixXd::Identity(p, p);
    if (truth.correlation) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(*truth.correlation);
        factor = eig.eigenvectors() *
                 eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }

    Rng rng = make_rng(truth.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    SyntheticDataset out;
    Dataset& ds = out.dataset;
    ds.name = truth.name;
    ds.nominal_capacity = truth.nominal_capacity;
    ds.time_unit = "cycles";

    constexpr int kMaxRedraws = 1000;
    for (int k = 0; k < truth.cell_count; ++k) {
        ParamVector theta(p);
        int attempts = 0;
        for (;;) {
            Eigen::VectorXd z(p);
            for (int d = 0; d < p; ++d)
                z(d) = normal(rng);
            theta = truth.mean + truth.sd.asDiagonal() * (factor * z);
            if (is_valid_params(truth.spec, theta))
                break;
            if (++attempts >= kMaxRedraws)
                throw ConfigError("could not draw a positive tau in 1000 attempts; "
                                  "narrow the population sd of tau");
        }

        CapacityTrace trace;
        char id[32];
        std::snprintf(id, sizeof id, "cell_%03d", k + 1);
        trace.cell_id = id;
        trace.times = truth.time_grid.array() - truth.time_grid(0);
        Eigen::VectorXd pct = evaluate(truth.spec, theta, trace.times);
        for (Eigen::Index i = 0; i < pct.size(); ++i)
            pct(i) += truth.noise_sd * normal(rng);
        if (!pct.allFinite() || (pct.array() <= 0).any())
            throw ConfigError("synthetic capacity left the positive range; "
                              "shorten the time grid or slow the fade");
        trace.capacities_ah = pct * (truth.nominal_capacity / 100.0);
        ds.traces.push_back(std::move(trace));
        out.true_params.push_back(std::move(theta));
    }
    ds = normalize(std::move(ds), truth.spec.required_normalization());
    return out;
}

void write_truth_sidecar(const PopulationTruth& truth, const SyntheticDataset& synthetic,
                         const std::filesystem::path& path)
{
    Json j;
    j["schema"] = "cellvar.truth/1";
    j["model"] = std::string(truth.spec.name());
    Json names = Json::array();
    for (auto n : truth.spec.param_names())
        names.push_back(std::string(n));
    j["param_names"] = names;
    j["mu_star"] = to_json(truth.mean);
    j["sigma_star"] = to_json(truth.sd);
    j["correlation"] = truth.correlation ? to_json(*truth.correlation)
                                         : to_json(Eigen::MatrixXd(
                                               Eigen::MatrixXd::Identity(truth.sd.size(),
                                                                         truth.sd.size())));
    j["noise_sd"] = truth.noise_sd;
    j["cell_count"] = truth.cell_count;
    j["time_grid"] = to_json(truth.time_grid);
    j["seed"] = truth.seed;
    j["nominal_capacity"] = truth.nominal_capacity;
    Json cells = Json::array();
    for (std::size_t k = 0; k < synthetic.true_params.size(); ++k)
        cells.push_back({{"cell_id", synthetic.dataset.traces[k].cell_id},
                         {"theta", to_json(synthetic.true_params[k])}});
    j["cells"] = cells;
    write_json(j, path);
}

} // namespace cellvar
