#include "cellvar/models.hpp"

#include "cellvar/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <string>

namespace cellvar {

namespace {

constexpr std::string_view kLinear1Names[] = {"c1"};
constexpr std::string_view kLinear2Names[] = {"B0", "c2"};
constexpr std::string_view kLinExpNames[] = {"c3", "t_f", "tau"};

std::string canonical(std::string_view text)
{
    std::string out;
    for (char c : text) {
        if (c == '-' || c == '_' || c == ' ')
            continue;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

void require_normalization(const ModelSpec& spec, const CapacityTrace& trace)
{
    if (trace.normalization != spec.required_normalization())
        throw DataError("trace '" + trace.cell_id + "' is not normalised to " +
                        std::string(to_string(spec.required_normalization())) +
                        " capacity as model " + std::string(spec.name()) + " requires");
}

double sum_squares(const Eigen::VectorXd& r)
{
    return r.squaredNorm();
}

// SSR of LinExp at theta, +inf when theta is invalid or the model overflows.
double linexp_ssr(const ModelSpec& spec, const ParamVector& theta,
                  const Eigen::VectorXd& times, const Eigen::VectorXd& y)
{
    if (!is_valid_params(spec, theta))
        return std::numeric_limits<double>::infinity();
    const Eigen::VectorXd f = evaluate(spec, theta, times);
    if (!f.allFinite())
        return std::numeric_limits<double>::infinity();
    return sum_squares(y - f);
}

LeastSquaresFit fit_linexp(const ModelSpec& spec, const Eigen::VectorXd& t,
                           const Eigen::VectorXd& y)
{
    const Eigen::Index n = t.size();
    const double span = t(n - 1) - t(0);

    // Start: slope of the first half, onset just past the data, tau = 10% span.
    const Eigen::Index half = std::max<Eigen::Index>(2, n / 2);
    const Eigen::VectorXd th = t.head(half);
    const Eigen::VectorXd yh = y.head(half);
    const double tm = th.mean();
    const double ym = yh.mean();
    const double sxx = (th.array() - tm).square().sum();
    const double slope = sxx > 0 ? ((th.array() - tm) * (yh.array() - ym)).sum() / sxx : 0.0;

    ParamVector theta(3);
    theta << slope, 1.05 * t(n - 1), std::max(0.1 * span, 1e-6);

    double cost = linexp_ssr(spec, theta, t, y);
    double lambda = 1e-3;
    constexpr int kMaxIterations = 500;
    constexpr double kGradientTolerance = 1e-8;

    // Converged when the gradient norm is below 1e-8, or when a full
    // Gauss-Newton step would lower the objective by less than 1e-12 of its
    // value (the slope's gradient cannot drop below roundoff for t ~ 1e3).
    auto stationary = [&](const Eigen::VectorXd& gradient, const Eigen::MatrixXd& jtj) {
        if (gradient.norm() < kGradientTolerance)
            return true;
        const Eigen::VectorXd newton = jtj.ldlt().solve(gradient);
        const double decrement = 0.25 * gradient.dot(newton);
        return std::isfinite(decrement) && decrement <= 1e-12 * std::max(cost, 1e-300);
    };

    LeastSquaresFit fit;
    for (int iter = 0; iter < kMaxIterations; ++iter) {
        fit.iterations = iter + 1;
        const Eigen::VectorXd r = y - evaluate(spec, theta, t);
        const Eigen::MatrixXd jac = model_jacobian(spec, theta, t);
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd jtr = jac.transpose() * r;
        if (stationary(-2.0 * jtr, jtj)) {
            fit.converged = true;
            break;
        }
        const Eigen::VectorXd diag = jtj.diagonal().cwiseMax(1e-300);

        bool improved = false;
        for (int attempt = 0; attempt < 60; ++attempt) {
            Eigen::MatrixXd damped = jtj;
            damped.diagonal() += lambda * diag;
            const Eigen::VectorXd step = damped.ldlt().solve(jtr);
            const ParamVector candidate = theta + step;
            const double candidate_cost = linexp_ssr(spec, candidate, t, y);
            if (candidate_cost < cost) {
                theta = candidate;
                cost = candidate_cost;
                lambda = std::max(lambda * 0.3, 1e-12);
                improved = true;
                break;
            }
            lambda *= 4.0;
            if (step.norm() <= 1e-15 * (theta.norm() + 1e-15))
                break;
        }
        if (!improved) {
            // No representable downhill step remains.
            const Eigen::VectorXd rr = y - evaluate(spec, theta, t);
            const Eigen::MatrixXd jj = model_jacobian(spec, theta, t);
            fit.converged = stationary(-2.0 * jj.transpose() * rr, jj.transpose() * jj);
            break;
        }
    }
    fit.params = theta;
    fit.ssr = cost;
    return fit;
}

} // namespace

std::span<const std::string_view> ModelSpec::param_names() const noexcept
{
    switch (kind_) {
    case ModelKind::Linear1: return kLinear1Names;
    case ModelKind::Linear2: return kLinear2Names;
    case ModelKind::LinExp: return kLinExpNames;
    }
    return {};
}

std::string_view ModelSpec::name() const noexcept
{
    switch (kind_) {
    case ModelKind::Linear1: return "linear1";
    case ModelKind::Linear2: return "linear2";
    case ModelKind::LinExp: return "linexp";
    }
    return "unknown";
}

ModelSpec ModelSpec::parse(std::string_view text)
{
    const std::string key = canonical(text);
    if (key == "linear1")
        return ModelSpec(ModelKind::Linear1);
    if (key == "linear2")
        return ModelSpec(ModelKind::Linear2);
    if (key == "linexp")
        return ModelSpec(ModelKind::LinExp);
    throw ConfigError("unknown model '" + std::string(text) +
                      "' (expected linear1, linear2 or linexp)");
}

std::string_view to_string(Normalization n) noexcept
{
    return n == Normalization::InitialCapacity ? "initial" : "nominal";
}

Normalization parse_normalization(std::string_view text)
{
    const std::string key = canonical(text);
    if (key == "initial" || key == "initialcapacity")
        return Normalization::InitialCapacity;
    if (key == "nominal" || key == "nominalcapacity")
        return Normalization::NominalCapacity;
    throw ConfigError("unknown normalization '" + std::string(text) + "'");
}

Eigen::VectorXd residuals(const ModelSpec& spec, const ParamVector& theta,
                          const CapacityTrace& trace)
{
    require_normalization(spec, trace);
    return trace.capacities_pct - evaluate(spec, theta, trace.times);
}

Eigen::MatrixXd model_jacobian(const ModelSpec& spec, const ParamVector& theta,
                               const Eigen::VectorXd& times)
{
    const Eigen::Index n = times.size();
    Eigen::MatrixXd jac(n, spec.param_count());
    switch (spec.kind()) {
    case ModelKind::Linear1:
        jac.col(0) = times;
        break;
    case ModelKind::Linear2:
        jac.col(0).setOnes();
        jac.col(1) = times;
        break;
    case ModelKind::LinExp: {
        const double onset = theta(1);
        const double tau = theta(2);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double z = (times(i) - onset) / tau;
            const double e = z > kExpOverflowGuard ? std::numeric_limits<double>::infinity()
                                                   : std::exp(z);
            jac(i, 0) = times(i);
            jac(i, 1) = e / tau;
            jac(i, 2) = e * z / tau;
        }
        break;
    }
    }
    return jac;
}

LeastSquaresFit least_squares_fit(const ModelSpec& spec, const CapacityTrace& trace)
{
    const Eigen::Index n = trace.n_points();
    if (n < spec.param_count() + 2)
        throw DataError("trace '" + trace.cell_id + "' has " + std::to_string(n) +
                        " points; model " + std::string(spec.name()) + " needs at least " +
                        std::to_string(spec.param_count() + 2));
    require_normalization(spec, trace);

    const Eigen::VectorXd& t = trace.times;
    const Eigen::VectorXd& y = trace.capacities_pct;
    LeastSquaresFit fit;
    switch (spec.kind()) {
    case ModelKind::Linear1: {
        // Regression through (0, 100).
        const double stt = t.squaredNorm();
        const double sty = t.dot((y.array() - 100.0).matrix());
        fit.params = ParamVector::Constant(1, stt > 0 ? sty / stt : 0.0);
        fit.converged = stt > 0;
        break;
    }
    case ModelKind::Linear2: {
        Eigen::MatrixXd design(n, 2);
        design.col(0).setOnes();
        design.col(1) = t;
        fit.params = design.colPivHouseholderQr().solve(y);
        fit.converged = true;
        break;
    }
    case ModelKind::LinExp:
        return fit_linexp(spec, t, y);
    }
    fit.iterations = 1;
    fit.ssr = sum_squares(y - evaluate(spec, fit.params, t));
    return fit;
}

} // namespace cellvar
