#pragma once

#include "cellvar/models.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cellvar {

using Warnings = std::vector<std::string>;

// One cell's capacity record. Times are re-based so the first checkup is at 0.
// capacities_ah always holds the ingested values; capacities_pct and
// normalization are filled by normalize().
struct CapacityTrace {
    std::string cell_id;
    Eigen::VectorXd times;
    Eigen::VectorXd capacities_ah;
    Eigen::VectorXd capacities_pct;
    std::optional<Normalization> normalization;

    Eigen::Index n_points() const noexcept { return times.size(); }
};

struct Dataset {
    std::string name;
    std::vector<CapacityTrace> traces;
    std::optional<double> nominal_capacity; // ampere-hours
    std::string time_unit = "hours";

    std::size_t cell_count() const noexcept { return traces.size(); }
    std::vector<std::string> cell_ids() const;
    const CapacityTrace& trace(const std::string& cell_id) const;
};

inline constexpr std::size_t kMinStudyCells = 6;

struct IngestConfig {
    std::string name = "dataset";
    std::string cell_id_column = "cell_id";
    std::string time_column = "time";
    std::string capacity_column = "capacity";
    std::string time_unit = "hours";
    std::optional<double> nominal_capacity;
    // Cells with fewer points are rejected (model parameter count + 2).
    int min_points = 3;

    // Reads a flat key=value file. Keys: name, cell_id_column, time_column,
    // capacity_column, time_unit, nominal_capacity, min_points. '#' starts a comment.
    static IngestConfig from_file(const std::filesystem::path& path);
    void apply(const std::map<std::string, std::string>& kv);
};

// Parses long-form CSV (header row required). Rows are grouped per cell and
// sorted by time; for duplicate (cell, time) pairs the last row wins. Every
// malformed row is reported in one DataError. Short cells are dropped with a
// warning; that is fatal only if it leaves fewer than kMinStudyCells cells.
Dataset ingest_csv(const std::filesystem::path& path, const IngestConfig& config,
                   Warnings* warnings = nullptr);
Dataset parse_csv(std::istream& in, const IngestConfig& config,
                  Warnings* warnings = nullptr);

// Writes cell_id,time,capacity (ampere-hours) with round-trip precision.
void write_csv(const Dataset& dataset, std::ostream& out);
void write_csv(const Dataset& dataset, const std::filesystem::path& path);

// InitialCapacity: each trace / its own first capacity x 100.
// NominalCapacity: every trace / nominal_capacity x 100.
Dataset normalize(Dataset dataset, Normalization mode);

// LinExp knee location for one cell.
struct KneeParams {
    double onset = 0.0;         // t_f
    double time_constant = 0.0; // tau
};

inline double pre_knee_cutoff(const KneeParams& knee)
{
    return knee.onset - 2.0 * knee.time_constant;
}

// Keeps points with t <= t_f - 2 tau. Cells missing from `knees` are kept
// unchanged; cells left with fewer than min_points are dropped with a warning.
Dataset truncate_pre_knee(const Dataset& dataset,
                          const std::map<std::string, KneeParams>& knees,
                          int min_points = 4, Warnings* warnings = nullptr);

// Content hash over names, times and raw capacities (used as a cache key).
std::uint64_t dataset_hash(const Dataset& dataset);

} // namespace cellvar
