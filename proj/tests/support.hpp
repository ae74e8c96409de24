#pragma once

#include "cellvar/dataset.hpp"
#include "cellvar/models.hpp"
#include "cellvar/rng.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <random>
#include <string>

namespace cellvar::test {

// Trace whose percent capacities are f(theta) + noise, tagged with the
// normalisation the model expects. Bypasses normalize() so values are exact.
inline CapacityTrace make_trace(const ModelSpec& spec, const Eigen::VectorXd& theta,
                                const Eigen::VectorXd& times, double noise_sd = 0.0,
                                std::uint64_t seed = 0, std::string id = "cell")
{
    CapacityTrace trace;
    trace.cell_id = std::move(id);
    trace.times = times;
    trace.capacities_pct = evaluate(spec, theta, times);
    if (noise_sd > 0) {
        Rng rng = make_rng(seed);
        std::normal_distribution<double> noise(0.0, noise_sd);
        for (auto& v : trace.capacities_pct)
            v += noise(rng);
    }
    trace.capacities_ah = trace.capacities_pct * 0.011;
    trace.normalization = spec.required_normalization();
    return trace;
}

inline Eigen::VectorXd vec(std::initializer_list<double> values)
{
    Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values)
        v(i++) = x;
    return v;
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("cellvar-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace cellvar::test
