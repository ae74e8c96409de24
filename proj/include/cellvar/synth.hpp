#pragma once

#include "cellvar/dataset.hpp"
#include "cellvar/models.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cellvar {

// Known population from which synthetic cells are drawn.
struct PopulationTruth {
    ModelSpec spec;
    Eigen::VectorXd mean; // mu*
    Eigen::VectorXd sd;   // sigma*
    std::optional<Eigen::MatrixXd> correlation;
    double noise_sd = 0.1; // percent capacity
    int cell_count = 40;
    Eigen::VectorXd time_grid;
    std::uint64_t seed = 0;
    double nominal_capacity = 1.1; // ampere-hours
    std::string name = "synthetic";

    void validate() const;

    // Default population for each model (time unit: equivalent full cycles).
    static PopulationTruth defaults(const ModelSpec& spec);
};

// n equally spaced checkups on [0, span].
Eigen::VectorXd uniform_time_grid(int n = 50, double span = 1000.0);

struct SyntheticDataset {
    Dataset dataset;                       // normalised as the model requires
    std::vector<ParamVector> true_params;  // theta_k, in cell order
};

// theta_k ~ N(mu*, diag(sigma*) R diag(sigma*)); LinExp draws with tau <= 0
// are redrawn. Capacities are f(theta_k, t) + N(0, noise^2) percent, stored in
// ampere-hours against the nominal capacity and then normalised.
SyntheticDataset generate(const PopulationTruth& truth);

// JSON sidecar listing the truth and every theta_k.
void write_truth_sidecar(const PopulationTruth& truth, const SyntheticDataset& synthetic,
                         const std::filesystem::path& path);

} // namespace cellvar
