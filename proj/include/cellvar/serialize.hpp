#pragma once

#include "cellvar/cell_inference.hpp"
#include "cellvar/population.hpp"
#include "cellvar/study.hpp"

#include <json.hpp>

#include <filesystem>
#include <string_view>

namespace cellvar {

inline constexpr std::string_view kSoftwareVersion = "0.1.0";
inline constexpr std::string_view kStudySchema = "cellvar.study/1";
inline constexpr std::string_view kTableSchema = "cellvar.table/1";

using Json = nlohmann::json;

// Non-finite doubles are written as null and read back as NaN.
Json to_json(const Eigen::VectorXd& v);
Json to_json(const Eigen::MatrixXd& m);
Eigen::VectorXd vector_from_json(const Json& j);
Eigen::MatrixXd matrix_from_json(const Json& j);

Json to_json(const McmcConfig& cfg);
McmcConfig mcmc_config_from_json(const Json& j);
Json to_json(const StudyConfig& cfg);
StudyConfig study_config_from_json(const Json& j);

Json to_json(const ChainDiagnostics& d);
ChainDiagnostics diagnostics_from_json(const Json& j);

Json to_json(const CellPosterior& p, bool include_samples = true);
CellPosterior cell_posterior_from_json(const Json& j);

Json to_json(const PopulationPosterior& p, bool include_samples = false);
PopulationPosterior population_posterior_from_json(const Json& j);

Json to_json(const SsdSummary& s);
SsdSummary ssd_summary_from_json(const Json& j);

Json to_json(const StabilityFit& f);

// Versioned document; per-repeat estimates go to the flat tables instead.
Json to_json(const StudyResult& r);

// Figure tables. Every file starts with "# schema=cellvar.table/1 table=<name>"
// followed by a CSV header row.
void write_curve_table(const StudyResult& r, const std::filesystem::path& path);
void write_repeats_table(const StudyResult& r, const std::filesystem::path& path);
void write_required_n_table(const StudyResult& r, const std::filesystem::path& path);
void write_histogram_table(const StudyResult& r, const std::filesystem::path& path,
                           int bins = 12);
void write_single_draw_table(const ModelSpec& spec,
                             std::span<const SingleDrawPoint> trace,
                             const std::filesystem::path& path);

void write_json(const Json& j, const std::filesystem::path& path);
Json read_json(const std::filesystem::path& path);

// Shortest round-trip decimal representation of a double.
std::string format_double(double v);

} // namespace cellvar
