#pragma once

#include "cellvar/error.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <string_view>

namespace cellvar {

struct CapacityTrace;

enum class ModelKind { Linear1, Linear2, LinExp };

enum class Normalization { InitialCapacity, NominalCapacity };

using ParamVector = Eigen::VectorXd;

// Identity of an empirical capacity-fade model.
//
//   Linear1: B(t) = 100 + c1 t                      params [c1]
//   Linear2: B(t) = B0 + c2 t                       params [B0, c2]
//   LinExp:  B(t) = 100 + c3 t - exp((t - t_f)/tau) params [c3, t_f, tau]
//
// Capacities are in percent; Linear1 and LinExp expect traces normalised to
// each cell's initial capacity, Linear2 to the nominal capacity.
class ModelSpec {
public:
    constexpr ModelSpec() = default;
    constexpr explicit ModelSpec(ModelKind kind) : kind_(kind) {}

    constexpr ModelKind kind() const noexcept { return kind_; }

    constexpr int param_count() const noexcept
    {
        switch (kind_) {
        case ModelKind::Linear1: return 1;
        case ModelKind::Linear2: return 2;
        case ModelKind::LinExp: return 3;
        }
        return 0;
    }

    std::span<const std::string_view> param_names() const noexcept;

    constexpr Normalization required_normalization() const noexcept
    {
        return kind_ == ModelKind::Linear2 ? Normalization::NominalCapacity
                                           : Normalization::InitialCapacity;
    }

    std::string_view name() const noexcept;

    // Accepts "linear1", "linear2", "linexp" (case-insensitive, '-' and '_' ignored).
    static ModelSpec parse(std::string_view text);

    friend constexpr bool operator==(ModelSpec, ModelSpec) = default;

private:
    ModelKind kind_ = ModelKind::Linear1;
};

std::string_view to_string(Normalization n) noexcept;
Normalization parse_normalization(std::string_view text);

inline constexpr double kExpOverflowGuard = 700.0;

// True when theta has the right length, finite entries and tau > 0 (LinExp).
template <class Derived>
bool is_valid_params(const ModelSpec& spec, const Eigen::MatrixBase<Derived>& theta)
{
    if (theta.size() != spec.param_count() || !theta.allFinite())
        return false;
    if (spec.kind() == ModelKind::LinExp && !(theta(2) > 0))
        return false;
    return true;
}

// Model capacity (percent) at time t. Throws DomainError for tau <= 0; when the
// exponent exceeds kExpOverflowGuard the result is -infinity, which callers
// treat as a zero likelihood.
template <class Derived>
typename Derived::Scalar evaluate(const ModelSpec& spec,
                                  const Eigen::MatrixBase<Derived>& theta,
                                  typename Derived::Scalar t)
{
    using Scalar = typename Derived::Scalar;
    if (theta.size() != spec.param_count())
        throw DomainError("parameter vector length does not match model " +
                          std::string(spec.name()));
    switch (spec.kind()) {
    case ModelKind::Linear1:
        return Scalar(100) + theta(0) * t;
    case ModelKind::Linear2:
        return theta(0) + theta(1) * t;
    case ModelKind::LinExp: {
        const Scalar tau = theta(2);
        if (!(tau > Scalar(0)))
            throw DomainError("LinExp time constant tau must be positive");
        const Scalar z = (t - theta(1)) / tau;
        if (z > Scalar(kExpOverflowGuard))
            return -std::numeric_limits<Scalar>::infinity();
        return Scalar(100) + theta(0) * t - std::exp(z);
    }
    }
    return std::numeric_limits<Scalar>::quiet_NaN();
}

// Element-wise evaluation over a time grid.
template <class DerivedTheta, class DerivedTimes>
Eigen::Matrix<typename DerivedTheta::Scalar, Eigen::Dynamic, 1>
evaluate(const ModelSpec& spec,
         const Eigen::MatrixBase<DerivedTheta>& theta,
         const Eigen::MatrixBase<DerivedTimes>& times)
{
    using Scalar = typename DerivedTheta::Scalar;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(times.size());
    for (Eigen::Index i = 0; i < times.size(); ++i)
        out(i) = evaluate(spec, theta, static_cast<Scalar>(times(i)));
    return out;
}

// capacities_pct[i] - evaluate(spec, theta, times[i]). Throws DataError when
// the trace is not normalised the way the model requires.
Eigen::VectorXd residuals(const ModelSpec& spec, const ParamVector& theta,
                          const CapacityTrace& trace);

struct LeastSquaresFit {
    ParamVector params;
    double ssr = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Linear models: exact ordinary least squares. LinExp: Levenberg-Marquardt
// from (first-half slope, 1.05 x last time, 10% of span), stopped at gradient
// norm < 1e-8, a Gauss-Newton decrement below 1e-12 of the SSR, or 500
// iterations.
LeastSquaresFit least_squares_fit(const ModelSpec& spec, const CapacityTrace& trace);

// Jacobian of the model output with respect to theta on a time grid (rows = times).
Eigen::MatrixXd model_jacobian(const ModelSpec& spec, const ParamVector& theta,
                               const Eigen::VectorXd& times);

} // namespace cellvar
